//! Accelerated exponential Euler dynamics in eigen-coordinates.
//!
//! One step of length `δ` maps the coefficients `a_k` of `u^δ(t_i, ·)` to
//!
//! ```text
//! a_k ← e^{-λ_k δ} a_k + δ φ(λ_k δ) b̂_k + σ ξ_k,    φ(z) = (1 - e^{-z})/z,
//! ```
//!
//! where `b̂` are the modes of `x ↦ b(u^δ(t_i, x))` and `ξ_k` the
//! stochastic-convolution increments of [`crate::noise`]. Diffusion and noise
//! are integrated exactly; only the drift is frozen over the step.
//!
//! The reference solution is the same map at step `δ/2^m`, driven by a fine
//! noise tensor whose exact aggregation drives the coarse run, so both share
//! one Brownian sheet.

use crate::error::{Error, Result};
use crate::kernels::{eigenvalue, BoundaryCondition};
use crate::noise::{aggregate_to_coarse, mode_variance, sample_increments, NoisePlan, NoiseTensor};
use crate::spectral::{self, evaluate_coeffs, GridFunction, ModeVector, SpectralBasis};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

type PointMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A tagged pointwise drift with a declared bound on `|b'|`.
#[derive(Clone)]
pub struct NamedDrift {
    tag: String,
    lipschitz: f64,
    func: PointMap,
}

impl NamedDrift {
    pub fn new(
        tag: impl Into<String>,
        lipschitz: f64,
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::domain(format!("declared |b|₁ must be finite, got {lipschitz}")));
        }
        Ok(NamedDrift { tag: tag.into(), lipschitz, func: Arc::new(func) })
    }

    /// `b(u) = scale · sin(u)`, with `|b|₁ = |scale|`.
    pub fn sine(scale: f64) -> Self {
        NamedDrift {
            tag: format!("{scale}*sin"),
            lipschitz: scale.abs(),
            func: Arc::new(move |u: f64| scale * u.sin()),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.func)(u)
    }
}

impl fmt::Debug for NamedDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NamedDrift").field("tag", &self.tag).field("lipschitz", &self.lipschitz).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Drift {
    /// `b(u) = slope · u + offset`.
    Affine {
        slope: f64,
        offset: f64,
    },
    Named(NamedDrift),
}

impl Drift {
    pub fn zero() -> Self {
        Drift::Affine { slope: 0.0, offset: 0.0 }
    }

    /// Declared `|b|₁ = sup |b'|`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Drift::Affine { slope, .. } => slope.abs(),
            Drift::Named(n) => n.lipschitz,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Drift::Affine { slope, offset } if *slope == 0.0 && *offset == 0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Drift::Affine { slope, offset } => slope * u + offset,
            Drift::Named(n) => n.eval(u),
        }
    }
}

/// Continuous initial datum given as a pointwise map.
#[derive(Clone)]
pub struct InitialDatum {
    tag: String,
    func: PointMap,
}

impl InitialDatum {
    pub fn new(tag: impl Into<String>, func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialDatum { tag: tag.into(), func: Arc::new(func) }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(format!("const({value})"), move |_| value)
    }

    /// `amplitude · cos(mode · π x)`.
    pub fn cosine(amplitude: f64, mode: usize) -> Self {
        Self::new(format!("{amplitude}*cos({mode}πx)"), move |x| amplitude * (mode as f64 * PI * x).cos())
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.func)(x)
    }
}

impl fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialDatum").field("tag", &self.tag).finish()
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub drift: Drift,
    /// Noise amplitude; zero only for deterministic checks.
    pub sigma: f64,
    pub u0: InitialDatum,
    pub bc: BoundaryCondition,
}

impl ModelSpec {
    pub fn new(drift: Drift, sigma: f64, u0: InitialDatum, bc: BoundaryCondition) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::domain("σ must be finite"));
        }
        Ok(ModelSpec { drift, sigma, u0, bc })
    }

    /// Modes of `u0` from its samples on the midpoint grid.
    pub fn initial_modes(&self, max_mode: usize, grid: usize) -> Result<ModeVector> {
        let g = GridFunction::sample(self.bc, grid, |x| self.u0.eval(x))?;
        spectral::analyze(&g, max_mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    /// Horizon `T`.
    pub horizon: f64,
    /// Number of perturbed steps `N`, so `δ = T/N`.
    pub steps: usize,
    /// Highest mode `K`.
    pub max_mode: usize,
    /// Collocation grid size `M ≥ 2K + 2`.
    pub grid: usize,
    /// The reference path runs at `δ / 2^m`.
    pub ref_refinement: u32,
    /// Enforce `δ < T/12 ∧ log(3/2)/(4|b|₁)`.
    pub strict: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig { horizon: 1.0, steps: 16, max_mode: 255, grid: 1024, ref_refinement: 4, strict: true }
    }
}

impl SchemeConfig {
    pub fn delta(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn reference_ratio(&self) -> usize {
        1usize << self.ref_refinement
    }

    pub fn reference_steps(&self) -> usize {
        self.steps * self.reference_ratio()
    }

    /// `T/12 ∧ log(3/2)/(4|b|₁)`.
    pub fn step_bound(&self, drift: &Drift) -> f64 {
        let l = drift.lipschitz();
        let by_drift = if l > 0.0 { 1.5f64.ln() / (4.0 * l) } else { f64::INFINITY };
        (self.horizon / 12.0).min(by_drift)
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 || self.max_mode == 0 || self.grid == 0 || self.ref_refinement == 0 {
            return Err(Error::Config("steps, max_mode, grid and ref_refinement must be at least 1".into()));
        }
        if self.ref_refinement > 20 {
            return Err(Error::Config("ref_refinement above 20 is not supported".into()));
        }
        if self.grid < 2 * self.max_mode + 2 {
            return Err(Error::Aliasing {
                grid: self.grid,
                modes: model.bc.mode_count(self.max_mode),
                required: 2 * self.max_mode + 2,
            });
        }
        if self.strict {
            let bound = self.step_bound(&model.drift);
            if self.delta() >= bound {
                return Err(Error::Hypothesis(format!(
                    "δ = {} is outside δ∈(0, T/12 ∧ log(3/2)/(4|b|₁)) = (0, {bound}) for T = {}, |b|₁ = {}; \
                     disable strict mode to explore beyond it",
                    self.delta(),
                    self.horizon,
                    model.drift.lipschitz()
                )));
            }
        }
        Ok(())
    }
}

/// `φ(z) = (1 - e^{-z})/z` with `φ(0) = 1`, Taylor branch below `1e-8`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// Precomputed one-step map for fixed `(model, K, M, δ)`.
#[derive(Debug, Clone)]
pub struct Stepper {
    model: ModelSpec,
    decay: Vec<f64>,
    drift_weight: Vec<f64>,
    mode_mass: Vec<f64>,
    basis: Option<Arc<SpectralBasis>>,
    scratch_grid: Vec<f64>,
    scratch_modes: Vec<f64>,
}

impl Stepper {
    pub fn new(model: &ModelSpec, max_mode: usize, grid: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!("step size must be positive, got {delta}")));
        }
        let bc = model.bc;
        let n = bc.mode_count(max_mode);
        let first = bc.first_mode();
        let lambdas: Vec<f64> = (0..n).map(|i| eigenvalue(i + first)).collect();
        // Affine drifts act diagonally on the modes and need no grid.
        let basis = match model.drift {
            Drift::Named(_) => Some(Arc::new(SpectralBasis::new(bc, max_mode, grid)?)),
            Drift::Affine { .. } => None,
        };
        Ok(Stepper {
            model: model.clone(),
            decay: lambdas.iter().map(|l| (-l * delta).exp()).collect(),
            drift_weight: lambdas.iter().map(|l| delta * phi1(l * delta)).collect(),
            mode_mass: (0..n).map(|i| bc.mode_mass(i + first)).collect(),
            scratch_grid: vec![0.0; if basis.is_some() { grid } else { 0 }],
            scratch_modes: vec![0.0; n],
            basis,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.decay.len()
    }

    /// Advances `coeffs` in place by one step with increments `xi`.
    pub fn step(&mut self, coeffs: &mut [f64], xi: &[f64]) -> Result<()> {
        let n = self.mode_count();
        if coeffs.len() != n {
            return Err(Error::Dimension { expected: n, got: coeffs.len() });
        }
        if xi.len() != n {
            return Err(Error::Dimension { expected: n, got: xi.len() });
        }
        match (&self.model.drift, &self.basis) {
            (Drift::Affine { slope, offset }, _) => {
                for (i, ((b, a), w)) in
                    self.scratch_modes.iter_mut().zip(coeffs.iter()).zip(&self.mode_mass).enumerate()
                {
                    *b = slope * a + offset * w;
                    if !b.is_finite() {
                        return Err(Error::Evaluation { at: format!("mode index {i}"), value: *b });
                    }
                }
            }
            (Drift::Named(d), Some(basis)) => {
                basis.synthesize_into(coeffs, &mut self.scratch_grid);
                spectral::apply_pointwise(&|u| d.eval(u), &mut self.scratch_grid)?;
                basis.analyze_into(&self.scratch_grid, &mut self.scratch_modes);
            }
            (Drift::Named(_), None) => unreachable!("named drifts always carry a basis"),
        }
        let sigma = self.model.sigma;
        for i in 0..n {
            coeffs[i] = self.decay[i] * coeffs[i] + self.drift_weight[i] * self.scratch_modes[i] + sigma * xi[i];
        }
        Ok(())
    }

    /// Runs every step of `noise` starting from `coeffs`.
    pub fn run(&mut self, coeffs: &mut [f64], noise: &NoiseTensor) -> Result<()> {
        for i in 0..noise.plan().steps {
            self.step(coeffs, noise.step(i))?;
        }
        Ok(())
    }
}

/// One perturbed step from `state` with per-mode increments `xi`.
pub fn step_perturbed(
    state: &ModeVector,
    model: &ModelSpec,
    delta: f64,
    xi: &[f64],
    grid: usize,
) -> Result<ModeVector> {
    if state.bc() != model.bc {
        return Err(Error::domain("state and model boundary conditions differ"));
    }
    let mut stepper = Stepper::new(model, state.max_mode(), grid, delta)?;
    let mut coeffs = state.coeffs().to_vec();
    stepper.step(&mut coeffs, xi)?;
    ModeVector::new(model.bc, coeffs)
}

/// Terminal modes of a coupled perturbed/reference pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTerminal {
    pub perturbed: ModeVector,
    pub reference: ModeVector,
}

/// Seed of the reference noise when the coupling is deliberately broken.
pub fn decoupled_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Validated `(model, config)` pair with its steppers and initial modes
/// precomputed, for running many paths.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    model: ModelSpec,
    config: SchemeConfig,
    u0: Vec<f64>,
    coarse: Stepper,
    fine: Stepper,
    fine_plan: NoisePlan,
}

impl PathSimulator {
    pub fn new(model: &ModelSpec, config: &SchemeConfig) -> Result<Self> {
        config.validate(model)?;
        let fine_plan = NoisePlan::new(model.bc, config.horizon, config.reference_steps(), config.max_mode)?;
        Ok(PathSimulator {
            model: model.clone(),
            config: *config,
            u0: model.initial_modes(config.max_mode, config.grid)?.into_coeffs(),
            coarse: Stepper::new(model, config.max_mode, config.grid, config.delta())?,
            fine: Stepper::new(model, config.max_mode, config.grid, fine_plan.delta)?,
            fine_plan,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    /// Fine-step increments of one path.
    pub fn fine_noise(&self, seed: u64, path: u64) -> NoiseTensor {
        sample_increments(seed, path, &self.fine_plan)
    }

    fn run(&self, stepper: &Stepper, noise: &NoiseTensor) -> Result<ModeVector> {
        let mut coeffs = self.u0.clone();
        stepper.clone().run(&mut coeffs, noise)?;
        ModeVector::new(self.model.bc, coeffs)
    }

    /// Perturbed run driven by the aggregated fine noise.
    pub fn perturbed(&self, seed: u64, path: u64) -> Result<ModeVector> {
        let coarse = aggregate_to_coarse(&self.fine_noise(seed, path), self.config.reference_ratio())?;
        self.run(&self.coarse, &coarse)
    }

    /// Reference run at step `δ / 2^m`.
    pub fn reference(&self, seed: u64, path: u64) -> Result<ModeVector> {
        self.run(&self.fine, &self.fine_noise(seed, path))
    }

    /// Both runs of one path. With `independent = true` the reference draws
    /// its own noise from [`decoupled_seed`], which only serves
    /// variance-reduction comparisons.
    pub fn coupled(&self, seed: u64, path: u64, independent: bool) -> Result<CoupledTerminal> {
        let fine = self.fine_noise(seed, path);
        let coarse = aggregate_to_coarse(&fine, self.config.reference_ratio())?;
        let perturbed = self.run(&self.coarse, &coarse)?;
        let fine = if independent { self.fine_noise(decoupled_seed(seed), path) } else { fine };
        let reference = self.run(&self.fine, &fine)?;
        Ok(CoupledTerminal { perturbed, reference })
    }
}

/// Simulates the perturbed path and its reference, both from `(seed, path)`.
pub fn simulate_coupled(
    model: &ModelSpec,
    config: &SchemeConfig,
    seed: u64,
    path: u64,
    independent: bool,
) -> Result<CoupledTerminal> {
    PathSimulator::new(model, config)?.coupled(seed, path, independent)
}

/// Terminal modes of `u^δ(T, ·)` for one path.
///
/// The path is driven by the exact aggregation of the fine tensor that
/// [`simulate_reference_modes`] uses for the same `(seed, path)`.
pub fn simulate_path_modes(model: &ModelSpec, config: &SchemeConfig, seed: u64, path: u64) -> Result<ModeVector> {
    PathSimulator::new(model, config)?.perturbed(seed, path)
}

/// Terminal modes of the reference run at step `δ / 2^m`.
pub fn simulate_reference_modes(model: &ModelSpec, config: &SchemeConfig, seed: u64, path: u64) -> Result<ModeVector> {
    PathSimulator::new(model, config)?.reference(seed, path)
}

/// Terminal state `u^δ(T, ·)` on the collocation grid.
pub fn simulate_path(model: &ModelSpec, config: &SchemeConfig, seed: u64, path: u64) -> Result<GridFunction> {
    spectral::synthesize(&simulate_path_modes(model, config, seed, path)?, config.grid)
}

/// Terminal state of the reference run on the collocation grid.
pub fn simulate_reference(model: &ModelSpec, config: &SchemeConfig, seed: u64, path: u64) -> Result<GridFunction> {
    spectral::synthesize(&simulate_reference_modes(model, config, seed, path)?, config.grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLaw {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianLaw {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
            return Err(Error::domain(format!("invalid Gaussian law N({mean}, {variance})")));
        }
        Ok(GaussianLaw { mean, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn density(&self, z: f64) -> f64 {
        let d = z - self.mean;
        (-d * d / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }

    pub fn log_density(&self, z: f64) -> f64 {
        let d = z - self.mean;
        -d * d / (2.0 * self.variance) - 0.5 * (2.0 * PI * self.variance).ln()
    }
}

/// How the laws treat modes above `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTail {
    /// Only modes `≤ K`: the law of the Galerkin-truncated process.
    Truncated,
    /// Adds the stationary variance `σ² Σ_{k>K} e_k(x)²/(2λ_k)` of the
    /// omitted modes, using the closed form of the full series.
    Continuum,
}

/// `Σ_{k≥1} e_k(x)² / (2λ_k)` in closed form via `Σ cos(2πkx)/k² = π² B₂(x)`.
fn stationary_series(bc: BoundaryCondition, x: f64) -> f64 {
    let b2 = x * x - x + 1.0 / 6.0;
    match bc {
        BoundaryCondition::Neumann => 1.0 / 12.0 + b2 / 2.0,
        BoundaryCondition::Dirichlet => 1.0 / 12.0 - b2 / 2.0,
    }
}

fn continuum_tail(bc: BoundaryCondition, x: f64, max_mode: usize) -> f64 {
    let partial: f64 = (1..=max_mode).rev().map(|k| bc.eigenfunction(k, x).powi(2) / (2.0 * eigenvalue(k))).sum();
    (stationary_series(bc, x) - partial).max(0.0)
}

/// `(e^{rT} - 1)/r`, equal to `T` at `r = 0`.
fn growth_integral(r: f64, t: f64) -> f64 {
    let z = r * t;
    if z.abs() < 1e-8 {
        t * (1.0 + z / 2.0 + z * z / 6.0)
    } else {
        z.exp_m1() / r
    }
}

fn affine_parts(model: &ModelSpec) -> Result<(f64, f64)> {
    match model.drift {
        Drift::Affine { slope, offset } => Ok((slope, offset)),
        Drift::Named(ref n) => Err(Error::domain(format!("drift '{}' is not affine", n.tag))),
    }
}

/// Law of `u(T, x)` for `b(u) = b1 u + c`.
///
/// Each mode solves `da_k = ((b1 - λ_k) a_k + c w_k) dt + σ dβ_k` with
/// `w_k = ∫e_k`, hence mean `e^{r T} a_k(0) + c w_k (e^{rT} - 1)/r` and
/// variance `σ² (e^{2rT} - 1)/(2r)` where `r = b1 - λ_k`.
pub fn affine_exact_law(
    model: &ModelSpec,
    horizon: f64,
    x: f64,
    max_mode: usize,
    tail: ModeTail,
) -> Result<GaussianLaw> {
    let (b1, c) = affine_parts(model)?;
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::domain("horizon must be positive"));
    }
    let bc = model.bc;
    let a0 = model.initial_modes(max_mode, 2 * max_mode + 2)?;
    let first = bc.first_mode();
    let s2 = model.sigma * model.sigma;
    let (mut mean, mut var) = (0.0, 0.0);
    for (i, a) in a0.coeffs().iter().enumerate().rev() {
        let k = i + first;
        let r = b1 - eigenvalue(k);
        let e = bc.eigenfunction(k, x);
        let m = (r * horizon).exp() * a + c * bc.mode_mass(k) * growth_integral(r, horizon);
        let v = s2 * growth_integral(2.0 * r, horizon);
        mean += m * e;
        var += v * e * e;
    }
    if tail == ModeTail::Continuum {
        var += s2 * continuum_tail(bc, x, max_mode);
    }
    GaussianLaw::new(mean, var)
}

/// Law of `u^δ(T, x)` for `b(u) = b1 u + c`, from the deterministic per-mode
/// recursions of the scheme:
/// `μ_k ← e^{-λδ} μ_k + δφ(λδ)(b1 μ_k + c w_k)` and
/// `V_k ← (e^{-λδ} + δφ(λδ) b1)² V_k + σ² v_k(δ)`.
pub fn affine_perturbed_law(model: &ModelSpec, config: &SchemeConfig, x: f64, tail: ModeTail) -> Result<GaussianLaw> {
    let (b1, c) = affine_parts(model)?;
    let bc = model.bc;
    let delta = config.delta();
    let a0 = model.initial_modes(config.max_mode, config.grid.max(2 * config.max_mode + 2))?;
    let first = bc.first_mode();
    let s2 = model.sigma * model.sigma;
    let (mut mean, mut var) = (0.0, 0.0);
    for (i, a) in a0.coeffs().iter().enumerate().rev() {
        let k = i + first;
        let l = eigenvalue(k);
        let decay = (-l * delta).exp();
        let weight = delta * phi1(l * delta);
        let push = weight * c * bc.mode_mass(k);
        let gain = decay + weight * b1;
        let noise = s2 * mode_variance(l, delta);
        let (mut mu, mut v) = (*a, 0.0);
        for _ in 0..config.steps {
            mu = gain * mu + push;
            v = gain * gain * v + noise;
        }
        let e = bc.eigenfunction(k, x);
        mean += mu * e;
        var += v * e * e;
    }
    if tail == ModeTail::Continuum {
        var += s2 * continuum_tail(bc, x, config.max_mode);
    }
    GaussianLaw::new(mean, var)
}

/// Probe value `Σ_k a_k e_k(x)` of raw terminal coefficients.
pub fn probe(bc: BoundaryCondition, coeffs: &[f64], x: f64) -> f64 {
    evaluate_coeffs(bc, coeffs, x)
}
