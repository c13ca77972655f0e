//! Convergence-order studies and small-time asymptotics.
//!
//! Monte Carlo error estimators compare each perturbed path with its
//! coupled reference at step `δ/2^m`, so the per-path differences are small
//! and the estimators need far fewer paths than independent sampling.
//! Per-path values are collected in path order and reduced sequentially, so
//! every report is identical for any thread count.

pub mod fit;

pub use fit::{fit_order, FitPoint, FitStatus, OrderEstimate};

use crate::density::{
    self, bandwidth, covering_grid, gaussian_density, kde, DensityMetric, RefinedDistance, SampleSet,
};
use crate::error::{Error, Result};
use crate::kernels::{
    green_eval, green_eval_detailed, green_mass, green_sq_time_integral, image_sum, spectral_sum, BoundaryCondition,
    KernelParams, KernelPoint,
};
use crate::quad;
use crate::scheme::{
    affine_exact_law, affine_perturbed_law, step_perturbed, Drift, GaussianLaw, InitialDatum, ModeTail, ModelSpec,
    NamedDrift, PathSimulator, SchemeConfig,
};
use crate::stats::Moments;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Bounded smooth test functions `f` of the weak error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Tanh,
    Cos,
    /// `g_ζ(u - center)`.
    Mollifier {
        zeta: f64,
        center: f64,
    },
}

impl TestFunction {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            TestFunction::Tanh => u.tanh(),
            TestFunction::Cos => u.cos(),
            TestFunction::Mollifier { zeta, center } => {
                (-(u - center).powi(2) / (2.0 * zeta)).exp() / (2.0 * PI * zeta).sqrt()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TestFunction::Mollifier { zeta, center } = *self {
            if !(zeta > 0.0 && zeta.is_finite() && center.is_finite()) {
                return Err(Error::Config(format!("mollifier test function needs ζ > 0, got {zeta}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMetric {
    WeakError,
    SupDensity,
    Tv,
    StrongL2,
}

impl StudyMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyMetric::WeakError => "weak_error",
            StudyMetric::SupDensity => "sup_density",
            StudyMetric::Tv => "tv",
            StudyMetric::StrongL2 => "strong_l2",
        }
    }

    fn density(self) -> Option<DensityMetric> {
        match self {
            StudyMetric::SupDensity => Some(DensityMetric::SupDensity),
            StudyMetric::Tv => Some(DensityMetric::Tv),
            _ => None,
        }
    }
}

/// A Monte Carlo study over the step ladder `N ∈ steps`.
#[derive(Debug, Clone)]
pub struct LadderStudy {
    pub model: ModelSpec,
    pub horizon: f64,
    /// Probe coordinate.
    pub x: f64,
    /// Step counts, increasing; level `j` uses `δ = horizon / steps[j]`.
    pub steps: Vec<usize>,
    pub samples: usize,
    pub test_function: TestFunction,
    pub metric: StudyMetric,
    /// Level `j` draws its noise from `seed + j`.
    pub seed: u64,
    pub strict: bool,
    pub max_mode: usize,
    pub grid: usize,
    pub ref_refinement: u32,
    /// Drive the reference with independent noise (variance-reduction demos only).
    pub independent_noise: bool,
}

impl LadderStudy {
    pub fn validate(&self) -> Result<()> {
        if self.steps.len() < 4 {
            return Err(Error::Config(format!("a ladder needs at least 4 levels, got {}", self.steps.len())));
        }
        if self.steps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("ladder step counts must be strictly increasing".into()));
        }
        if self.samples < 2 {
            return Err(Error::Config("a study needs at least two samples per level".into()));
        }
        check_probe(self.x)?;
        self.test_function.validate()?;
        for &n in &self.steps {
            self.scheme_config(n).validate(&self.model)?;
        }
        Ok(())
    }

    pub fn scheme_config(&self, steps: usize) -> SchemeConfig {
        SchemeConfig {
            horizon: self.horizon,
            steps,
            max_mode: self.max_mode,
            grid: self.grid,
            ref_refinement: self.ref_refinement,
            strict: self.strict,
        }
    }

    pub fn level_seed(&self, level: usize) -> u64 {
        self.seed.wrapping_add(level as u64)
    }
}

fn check_probe(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("probe coordinate must lie in [0, 1], got {x}")))
    }
}

/// Probe values `u^δ(T, x)` and `u_ref(T, x)` of coupled paths, in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSamples {
    pub perturbed: Vec<f64>,
    pub reference: Vec<f64>,
}

impl CoupledSamples {
    pub fn len(&self) -> usize {
        self.perturbed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perturbed.is_empty()
    }
}

/// Simulates paths `0..samples` and records both terminal values at `x`.
pub fn coupled_samples(
    model: &ModelSpec,
    config: &SchemeConfig,
    x: f64,
    seed: u64,
    samples: usize,
    independent: bool,
) -> Result<CoupledSamples> {
    check_probe(x)?;
    let sim = PathSimulator::new(model, config)?;
    let pairs: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|p| {
            let c = sim.coupled(seed, p, independent)?;
            Ok((c.perturbed.evaluate_at(x), c.reference.evaluate_at(x)))
        })
        .collect::<Result<_>>()?;
    let (perturbed, reference) = pairs.into_iter().unzip();
    Ok(CoupledSamples { perturbed, reference })
}

/// Samples of one ladder level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSamples {
    pub level: usize,
    pub steps: usize,
    pub delta: f64,
    pub seed: u64,
    pub samples: CoupledSamples,
}

pub fn collect_ladder(study: &LadderStudy) -> Result<Vec<LevelSamples>> {
    study.validate()?;
    study
        .steps
        .iter()
        .enumerate()
        .map(|(level, &steps)| {
            let config = study.scheme_config(steps);
            let seed = study.level_seed(level);
            Ok(LevelSamples {
                level,
                steps,
                delta: config.delta(),
                seed,
                samples: coupled_samples(&study.model, &config, study.x, seed, study.samples, study.independent_noise)?,
            })
        })
        .collect()
}

/// `|mean(f(P) - f(R))|` and its standard error.
pub fn weak_error(samples: &CoupledSamples, f: &TestFunction) -> (f64, f64) {
    let diffs: Vec<f64> =
        samples.perturbed.iter().zip(&samples.reference).map(|(p, r)| f.eval(*p) - f.eval(*r)).collect();
    let m = Moments::of(&diffs);
    (m.mean.abs(), m.mean_stderr())
}

/// `E[(P - R)²]^{1/2}` and its delta-method standard error.
pub fn strong_error(samples: &CoupledSamples) -> (f64, f64) {
    let sq: Vec<f64> = samples.perturbed.iter().zip(&samples.reference).map(|(p, r)| (p - r).powi(2)).collect();
    let m = Moments::of(&sq);
    let rms = m.mean.sqrt();
    let se = if rms > 0.0 { m.mean_stderr() / (2.0 * rms) } else { 0.0 };
    (rms, se)
}

/// Values `∫ w(z) (g_ζ(z - P_i) - g_ζ(z - R_i)) dz` per path, with the
/// integral replaced by the weighted grid sum `Σ_j w_j (…)(z_j)`.
fn per_path_functional(samples: &CoupledSamples, zeta: f64, z: &[f64], weights: &[f64]) -> Vec<f64> {
    let reach = 9.0 * zeta.sqrt();
    let norm = 1.0 / (2.0 * PI * zeta).sqrt();
    let one = |x: f64| {
        let lo = z.partition_point(|&v| v < x - reach);
        let hi = z.partition_point(|&v| v <= x + reach);
        (lo..hi).map(|j| weights[j] * (-(z[j] - x).powi(2) / (2.0 * zeta)).exp()).sum::<f64>() * norm
    };
    samples.perturbed.par_iter().zip(&samples.reference).map(|(p, r)| one(*p) - one(*r)).collect()
}

/// Density distance between the kernel estimates of both marginals at the
/// bandwidth `ζ(n)`, with a standard error from the linearisation of the
/// distance around the observed difference.
pub fn density_distance(samples: &CoupledSamples, metric: DensityMetric) -> Result<(RefinedDistance, f64)> {
    let n = samples.len();
    let zeta = bandwidth(n);
    let mp = Moments::of(&samples.perturbed);
    let mr = Moments::of(&samples.reference);
    let z = covering_grid(
        &[(mp.mean, (mp.variance + zeta).sqrt()), (mr.mean, (mr.variance + zeta).sqrt())],
        8.0,
        density::DEFAULT_GRID_POINTS,
    )?;
    let a = kde(&SampleSet::new(samples.perturbed.clone(), 0, "")?, zeta, &z)?;
    let b = kde(&SampleSet::new(samples.reference.clone(), 0, "")?, zeta, &z)?;
    let dist = density::refined_distance(metric, &a, &b)?;
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let weights: Vec<f64> = match metric {
        DensityMetric::SupDensity => {
            let j = (0..diff.len()).max_by(|&i, &k| diff[i].abs().total_cmp(&diff[k].abs())).unwrap_or(0);
            let mut w = vec![0.0; diff.len()];
            w[j] = diff[j].signum();
            w
        }
        DensityMetric::Tv => {
            let h = |j: usize| {
                let left = if j > 0 { z[j] - z[j - 1] } else { 0.0 };
                let right = if j + 1 < z.len() { z[j + 1] - z[j] } else { 0.0 };
                0.5 * (left + right)
            };
            (0..diff.len()).map(|j| h(j) * diff[j].signum()).collect()
        }
    };
    let per_path = per_path_functional(samples, zeta, &z, &weights);
    Ok((dist, Moments::of(&per_path).mean_stderr()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Delta,
    Epsilon,
}

/// One row of a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub steps: usize,
    pub delta: f64,
    /// Drift scale of small-drift studies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub error: f64,
    pub stderr: f64,
    /// Density distances on the halved grid and their Richardson combination.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coarse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined: Option<f64>,
}

impl LevelResult {
    fn axis_value(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Delta => self.delta,
            Axis::Epsilon => self.epsilon.unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub metric: StudyMetric,
    pub axis: Axis,
    pub strict: bool,
    pub seed: u64,
    pub samples: usize,
    pub levels: Vec<LevelResult>,
    #[serde(flatten)]
    pub fit: OrderEstimate,
}

impl StudyReport {
    fn new(
        study: &str,
        metric: StudyMetric,
        axis: Axis,
        strict: bool,
        seed: u64,
        samples: usize,
        levels: Vec<LevelResult>,
    ) -> Self {
        let points: Vec<FitPoint> =
            levels.iter().map(|l| FitPoint::new(l.axis_value(axis), l.error, l.stderr)).collect();
        StudyReport { study: study.to_string(), metric, axis, strict, seed, samples, fit: fit_order(&points), levels }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.error).collect()
    }

    /// Long format `study,level,delta,metric,value,stderr`.
    pub fn write_long_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "study,level,delta,metric,value,stderr")?;
        }
        let name = self.metric.as_str();
        for l in &self.levels {
            let (s, j, d) = (&self.study, l.level, l.delta);
            if let Some(e) = l.epsilon {
                writeln!(out, "{s},{j},{d},epsilon,{e},0")?;
            }
            writeln!(out, "{s},{j},{d},{name},{},{}", l.error, l.stderr)?;
            if let (Some(c), Some(r)) = (l.coarse, l.refined) {
                writeln!(out, "{s},{j},{d},{name}_coarse,{c},")?;
                writeln!(out, "{s},{j},{d},{name}_refined,{r},")?;
            }
        }
        Ok(())
    }
}

/// Evaluates `metric` on already collected ladder samples.
pub fn ladder_report(
    study: &LadderStudy,
    levels: &[LevelSamples],
    metric: StudyMetric,
    name: &str,
) -> Result<StudyReport> {
    let rows = levels
        .iter()
        .map(|l| {
            let mut row = LevelResult {
                level: l.level,
                steps: l.steps,
                delta: l.delta,
                epsilon: None,
                seed: l.seed,
                error: 0.0,
                stderr: 0.0,
                coarse: None,
                refined: None,
            };
            match metric.density() {
                Some(dm) => {
                    let (d, se) = density_distance(&l.samples, dm)?;
                    row.error = d.raw;
                    row.stderr = se;
                    row.coarse = Some(d.coarse);
                    row.refined = Some(d.refined);
                }
                None => {
                    let (e, se) = match metric {
                        StudyMetric::StrongL2 => strong_error(&l.samples),
                        _ => weak_error(&l.samples, &study.test_function),
                    };
                    row.error = e;
                    row.stderr = se;
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport::new(name, metric, Axis::Delta, study.strict, study.seed, study.samples, rows))
}

/// Coupled weak error `|E f(u^δ(T,x)) - E f(u_ref(T,x))|` along the ladder.
pub fn weak_error_study(study: &LadderStudy) -> Result<StudyReport> {
    if study.metric != StudyMetric::WeakError {
        return Err(Error::domain("weak_error_study needs metric weak_error"));
    }
    ladder_report(study, &collect_ladder(study)?, StudyMetric::WeakError, "weak")
}

/// Sup-norm or total-variation distance of the kernel density estimates.
pub fn density_error_study(study: &LadderStudy) -> Result<StudyReport> {
    if study.metric.density().is_none() {
        return Err(Error::domain("density_error_study needs metric sup_density or tv"));
    }
    ladder_report(study, &collect_ladder(study)?, study.metric, "density")
}

/// Deterministic comparison of the exact and perturbed laws of `u(T, x)`.
#[derive(Debug, Clone)]
pub struct AffineStudy {
    pub model: ModelSpec,
    pub horizon: f64,
    pub x: f64,
    pub steps: Vec<usize>,
    pub max_mode: usize,
    pub tail: ModeTail,
    pub strict: bool,
}

impl AffineStudy {
    pub fn config(&self, steps: usize) -> SchemeConfig {
        SchemeConfig {
            horizon: self.horizon,
            steps,
            max_mode: self.max_mode,
            grid: 2 * self.max_mode + 2,
            ref_refinement: 1,
            strict: self.strict,
        }
    }

    /// Exact and perturbed laws per level.
    pub fn laws(&self) -> Result<(GaussianLaw, Vec<GaussianLaw>)> {
        check_probe(self.x)?;
        let exact = affine_exact_law(&self.model, self.horizon, self.x, self.max_mode, self.tail)?;
        let perturbed = self
            .steps
            .iter()
            .map(|&n| {
                let c = self.config(n);
                c.validate(&self.model)?;
                affine_perturbed_law(&self.model, &c, self.x, self.tail)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((exact, perturbed))
    }
}

/// Sup-norm or total-variation distance between `N(m1, σ1)` and
/// `N(m2, σ2)` on the default grid of both laws. No Monte Carlo.
pub fn affine_density_study(study: &AffineStudy, metric: StudyMetric) -> Result<StudyReport> {
    let dm = metric.density().ok_or_else(|| Error::domain("affine_density_study needs metric sup_density or tv"))?;
    let (exact, perturbed) = study.laws()?;
    let rows = perturbed
        .iter()
        .zip(&study.steps)
        .enumerate()
        .map(|(level, (law, &steps))| {
            let z = density::default_grid(&[(exact.mean, exact.std_dev()), (law.mean, law.std_dev())])?;
            let a = gaussian_density(&exact, &z)?;
            let b = gaussian_density(law, &z)?;
            let d = density::refined_distance(dm, &a, &b)?;
            Ok(LevelResult {
                level,
                steps,
                delta: study.horizon / steps as f64,
                epsilon: None,
                seed: 0,
                error: d.raw,
                stderr: 0.0,
                coarse: Some(d.coarse),
                refined: Some(d.refined),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport::new("affine", metric, Axis::Delta, study.strict, 0, 0, rows))
}

/// Weak error at fixed `δ` for drifts `ε · b̃` along an `ε` ladder.
#[derive(Debug, Clone)]
pub struct SmallDriftStudy {
    pub base: NamedDrift,
    pub epsilons: Vec<f64>,
    pub sigma: f64,
    pub u0: InitialDatum,
    pub bc: BoundaryCondition,
    pub horizon: f64,
    pub x: f64,
    pub steps: usize,
    pub samples: usize,
    pub test_function: TestFunction,
    /// Shared by every `ε`, so the levels see common random numbers.
    pub seed: u64,
    pub strict: bool,
    pub max_mode: usize,
    pub grid: usize,
    pub ref_refinement: u32,
}

impl SmallDriftStudy {
    pub fn model(&self, epsilon: f64) -> Result<ModelSpec> {
        let base = self.base.clone();
        let drift =
            NamedDrift::new(format!("{epsilon}*({})", base.tag()), epsilon.abs() * base.lipschitz(), move |u| {
                epsilon * base.eval(u)
            })?;
        ModelSpec::new(Drift::Named(drift), self.sigma, self.u0.clone(), self.bc)
    }

    pub fn config(&self) -> SchemeConfig {
        SchemeConfig {
            horizon: self.horizon,
            steps: self.steps,
            max_mode: self.max_mode,
            grid: self.grid,
            ref_refinement: self.ref_refinement,
            strict: self.strict,
        }
    }
}

pub fn small_drift_study(study: &SmallDriftStudy) -> Result<StudyReport> {
    if study.epsilons.is_empty() {
        return Err(Error::Config("small-drift study needs at least one ε".into()));
    }
    study.test_function.validate()?;
    let config = study.config();
    let rows = study
        .epsilons
        .iter()
        .enumerate()
        .map(|(level, &eps)| {
            let s = coupled_samples(&study.model(eps)?, &config, study.x, study.seed, study.samples, false)?;
            let (error, stderr) = weak_error(&s, &study.test_function);
            Ok(LevelResult {
                level,
                steps: study.steps,
                delta: config.delta(),
                epsilon: Some(eps),
                seed: study.seed,
                error,
                stderr,
                coarse: None,
                refined: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport::new(
        "small_drift",
        StudyMetric::WeakError,
        Axis::Epsilon,
        study.strict,
        study.seed,
        study.samples,
        rows,
    ))
}

/// Per-level variances of the weak-error summand `f(P) - f(R)` with coupled
/// and with independent reference noise.
pub fn coupling_variances(study: &LadderStudy, steps: usize) -> Result<(f64, f64)> {
    let config = study.scheme_config(steps);
    let var = |independent| -> Result<f64> {
        let s = coupled_samples(&study.model, &config, study.x, study.seed, study.samples, independent)?;
        let f = study.test_function;
        let d: Vec<f64> = s.perturbed.iter().zip(&s.reference).map(|(p, r)| f.eval(*p) - f.eval(*r)).collect();
        Ok(Moments::of(&d).variance)
    };
    Ok((var(false)?, var(true)?))
}

/// Modes used for the one-step mean of a non-constant initial datum.
const ONE_STEP_MODES: usize = 1023;

/// Law of `u^δ(δ, x)`: the Gaussian with mean
/// `∫G_δ(x,y)u0(y)dy + ∫_0^δ∫G_s(x,y) b(u0(y)) dy ds` and variance
/// `ν_δ = σ² ∫_0^δ ∫ G_s(x,y)² dy ds`.
pub fn one_step_law(model: &ModelSpec, delta: f64, x: f64, params: &KernelParams) -> Result<GaussianLaw> {
    check_probe(x)?;
    let variance = model.sigma * model.sigma * green_sq_time_integral(model.bc, delta, x, params)?;
    let grid = 2 * ONE_STEP_MODES + 2;
    let u0 = model.initial_modes(ONE_STEP_MODES, grid)?;
    let zeros = vec![0.0; u0.coeffs().len()];
    let mean = step_perturbed(&u0, model, delta, &zeros, grid)?.evaluate_at(x);
    GaussianLaw::new(mean, variance)
}

#[derive(Debug, Clone)]
pub struct AsymptoticsStudy {
    pub model: ModelSpec,
    pub x: f64,
    pub z_grid: Vec<f64>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticsRow {
    pub delta: f64,
    pub z: f64,
    /// `δ^{1/2} log q^δ_{δ,x}(z)`.
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticsLevel {
    pub delta: f64,
    /// Largest `|value - limit| / |limit|` over `z` with a nonzero limit.
    pub max_relative_deviation: f64,
    /// Largest `|value|` over `z` where the limit vanishes.
    pub max_abs_at_mode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub bc: BoundaryCondition,
    pub x: f64,
    pub sigma: f64,
    pub u0_at_x: f64,
    /// `c` in the limit `-c (z - u0(x))²`.
    pub limit_factor: f64,
    /// `-value / (z - u0(x))²` at the smallest `δ` and the `z` farthest from `u0(x)`.
    pub measured_factor: Option<f64>,
    pub levels: Vec<AsymptoticsLevel>,
    pub rows: Vec<AsymptoticsRow>,
}

/// `√(2π)/(4σ²) · (1 + sgn(x(1 - x)))`, doubled for Dirichlet interiors.
pub fn asymptotic_factor(bc: BoundaryCondition, x: f64, sigma: f64) -> Result<f64> {
    check_probe(x)?;
    let interior = x > 0.0 && x < 1.0;
    let base = (2.0 * PI).sqrt() / (4.0 * sigma * sigma);
    match (bc, interior) {
        (_, true) => Ok(2.0 * base),
        (BoundaryCondition::Neumann, false) => Ok(base),
        (BoundaryCondition::Dirichlet, false) => Err(Error::domain("the Dirichlet law at the boundary is degenerate")),
    }
}

pub fn asymptotics_study(study: &AsymptoticsStudy) -> Result<AsymptoticsReport> {
    check_probe(study.x)?;
    if study.deltas.is_empty() || study.z_grid.is_empty() {
        return Err(Error::Config("asymptotics needs at least one δ and one z".into()));
    }
    let model = &study.model;
    let factor = asymptotic_factor(model.bc, study.x, model.sigma)?;
    let u0x = model.u0.eval(study.x);
    let params = KernelParams::default();
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for &delta in &study.deltas {
        let law = one_step_law(model, delta, study.x, &params)?;
        let (mut rel, mut at_mode) = (0.0f64, 0.0f64);
        for &z in &study.z_grid {
            let value = delta.sqrt() * law.log_density(z);
            let limit = -factor * (z - u0x).powi(2);
            if limit == 0.0 {
                at_mode = at_mode.max(value.abs());
            } else {
                rel = rel.max(((value - limit) / limit).abs());
            }
            rows.push(AsymptoticsRow { delta, z, value, limit });
        }
        levels.push(AsymptoticsLevel { delta, max_relative_deviation: rel, max_abs_at_mode: at_mode });
    }
    let smallest = study.deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let measured_factor = rows
        .iter()
        .filter(|r| r.delta == smallest && r.z != u0x)
        .max_by(|a, b| (a.z - u0x).abs().total_cmp(&(b.z - u0x).abs()))
        .map(|r| -r.value / (r.z - u0x).powi(2));
    Ok(AsymptoticsReport {
        bc: model.bc,
        x: study.x,
        sigma: model.sigma,
        u0_at_x: u0x,
        limit_factor: factor,
        measured_factor,
        levels,
        rows,
    })
}

/// A named residual and its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Check { name: name.into(), residual, tolerance, pass: residual <= tolerance }
    }
}

/// Deterministic pseudo-random points for reproducible check grids.
pub(crate) fn check_points(n: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut s = seed;
    let mut next = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|_| {
            // t log-uniform on [1e-4, 4]
            let t = 1e-4 * (4e4f64).powf(next());
            (t, next(), next())
        })
        .collect()
}

/// Representation agreement, Neumann mass and the semigroup property.
pub fn kernel_checks(points: usize) -> Result<Vec<Check>> {
    let params = KernelParams::default();
    let mut out = Vec::new();
    for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
        let mut worst = 0.0f64;
        for (t, x, y) in check_points(points, 17) {
            let p = KernelPoint::new(t, x, y)?;
            let a = image_sum(bc, p, &params)?.value;
            let b = spectral_sum(bc, p, &params)?.value;
            worst = worst.max((a - b).abs());
        }
        out.push(Check::new(format!("representation_agreement_{}", bc.as_str()), worst, 1e-10));
    }
    let mut mass = 0.0f64;
    for (t, x, _) in check_points(points, 23) {
        mass = mass.max((green_mass(BoundaryCondition::Neumann, t, x, &params)? - 1.0).abs());
    }
    out.push(Check::new("neumann_mass", mass, 1e-12));
    for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
        let mut worst = 0.0f64;
        for &(t, s, x, z) in
            &[(0.01f64, 0.02f64, 0.3, 0.6), (0.05, 0.003, 0.1, 0.15), (0.2, 0.4, 0.9, 0.2), (0.004, 0.006, 0.5, 0.52)]
        {
            let g = |t: f64, a: f64, b: f64| green_eval(bc, KernelPoint { t, x: a, y: b }, &params);
            let mut breaks = quad::graded_breaks(x, t.sqrt() / 2.0);
            breaks.extend(quad::graded_breaks(z, s.sqrt() / 2.0));
            let mut err = None;
            let lhs = quad::composite(&breaks, 2, |y| match (g(t, x, y), g(s, y, z)) {
                (Ok(a), Ok(b)) => a * b,
                (Err(e), _) | (_, Err(e)) => {
                    err.get_or_insert(e);
                    0.0
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            worst = worst.max((lhs - g(t + s, x, z)?).abs());
        }
        out.push(Check::new(format!("semigroup_{}", bc.as_str()), worst, 1e-10));
    }
    let detailed = green_eval_detailed(BoundaryCondition::Neumann, KernelPoint::new(0.05, 0.4, 0.6)?, &params)?;
    out.push(Check::new("certified_tail_bound", detailed.tail_bound, params.abs_tol));
    Ok(out)
}
