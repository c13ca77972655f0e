//! Heat kernel on ℝ and Green functions of `∂_t - ∂_xx` on `[0, 1]`.
//!
//! Both boundary conditions are available in two representations:
//!
//! - the method of images
//!   `G_t(x,y) = (4πt)^{-1/2} Σ_n [e^{-(x-y-2n)²/4t} ± e^{-(x+y-2n)²/4t}]`
//!   (`+` Neumann, `-` Dirichlet), which converges fast for small `t`;
//! - the eigen-expansion `G_t(x,y) = Σ_k e^{-λ_k t} e_k(x) e_k(y)` with
//!   `λ_k = k²π²` and the orthonormal basis `e_0 = 1, e_k = √2 cos(kπx)`
//!   (Neumann) or `e_k = √2 sin(kπx)`, `k ≥ 1` (Dirichlet), which converges
//!   fast for large `t`.
//!
//! Every series is cut where an explicit geometric tail bound drops below
//! [`KernelParams::abs_tol`]; the bound is reported with the value.

use crate::error::{Error, Result};
use crate::quad;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Reflecting: `∂_x u(t,0) = ∂_x u(t,1) = 0`.
    Neumann,
    /// Absorbing: `u(t,0) = u(t,1) = 0`.
    Dirichlet,
}

/// `a + b` as a rounded sum and its exact rounding error.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `kπx` reduced to `[-π, π]`. The product `kx` is split exactly with an
/// fma, so the angle stays accurate to an ulp even for large `k`.
fn pi_multiple(k: usize, x: f64) -> f64 {
    let k = k as f64;
    let p = k * x;
    let lo = k.mul_add(x, -p);
    let r = p - 2.0 * (0.5 * p).round();
    PI * (r + lo)
}

impl BoundaryCondition {
    /// Smallest mode number of the eigenbasis.
    pub fn first_mode(self) -> usize {
        match self {
            BoundaryCondition::Neumann => 0,
            BoundaryCondition::Dirichlet => 1,
        }
    }

    /// Number of basis functions with mode number at most `max_mode`.
    pub fn mode_count(self, max_mode: usize) -> usize {
        match self {
            BoundaryCondition::Neumann => max_mode + 1,
            BoundaryCondition::Dirichlet => max_mode,
        }
    }

    /// Sign in front of the reflected images.
    fn image_sign(self) -> f64 {
        match self {
            BoundaryCondition::Neumann => 1.0,
            BoundaryCondition::Dirichlet => -1.0,
        }
    }

    /// Orthonormal eigenfunction `e_k(x)`.
    pub fn eigenfunction(self, k: usize, x: f64) -> f64 {
        match self {
            BoundaryCondition::Neumann if k == 0 => 1.0,
            BoundaryCondition::Neumann => SQRT_2 * pi_multiple(k, x).cos(),
            BoundaryCondition::Dirichlet => SQRT_2 * pi_multiple(k, x).sin(),
        }
    }

    /// `∫_0^1 e_k(y) dy`.
    pub fn mode_mass(self, k: usize) -> f64 {
        match self {
            BoundaryCondition::Neumann => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            BoundaryCondition::Dirichlet => {
                if k % 2 == 1 {
                    2.0 * SQRT_2 / (k as f64 * PI)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::Dirichlet => "dirichlet",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Eigenvalue `λ_k = k²π²` of `-∂_xx` for mode number `k`.
pub fn eigenvalue(k: usize) -> f64 {
    let k = k as f64;
    k * k * PI * PI
}

/// Truncation policy shared by all kernel evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Absolute bound on the omitted tail of every series.
    pub abs_tol: f64,
    /// Image sums are used for `t < switch_time`, eigen-expansions otherwise.
    pub switch_time: f64,
    /// Largest number of series terms an evaluation may use.
    pub max_terms: usize,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams { abs_tol: 1e-14, switch_time: 0.1, max_terms: 1_000_000 }
    }
}

impl KernelParams {
    pub fn new(abs_tol: f64, switch_time: f64, max_terms: usize) -> Result<Self> {
        let p = KernelParams { abs_tol, switch_time, max_terms };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tol(abs_tol: f64) -> Result<Self> {
        Self::new(abs_tol, Self::default().switch_time, Self::default().max_terms)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::domain(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if !(self.switch_time > 0.0 && self.switch_time.is_finite()) {
            return Err(Error::domain(format!("switch_time must be positive, got {}", self.switch_time)));
        }
        if self.max_terms == 0 {
            return Err(Error::domain("max_terms must be at least 1"));
        }
        Ok(())
    }

    fn representation_for(&self, t: f64) -> Representation {
        if t < self.switch_time {
            Representation::ImageSum
        } else {
            Representation::Spectral
        }
    }
}

/// Arguments `(t, x, y)` of `G_t(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl KernelPoint {
    pub fn new(t: f64, x: f64, y: f64) -> Result<Self> {
        check_time(t)?;
        check_coordinate(x)?;
        check_coordinate(y)?;
        Ok(KernelPoint { t, x, y })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("time must be positive and finite, got {t}")))
    }
}

fn check_coordinate(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("coordinate must lie in [0, 1], got {x}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    ImageSum,
    Spectral,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Representation::ImageSum => "image_sum",
            Representation::Spectral => "spectral",
        }
    }
}

/// A kernel value together with the certificate of its truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub representation: Representation,
    /// Number of series terms summed.
    pub terms: usize,
    /// Upper bound on the omitted tail.
    pub tail_bound: f64,
}

/// Heat kernel on ℝ, `P_t(x,y) = (4πt)^{-1/2} exp(-(x-y)²/4t)`.
pub fn heat_kernel_free(t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::domain("heat kernel arguments must be finite"));
    }
    let d = x - y;
    Ok((-d * d / (4.0 * t)).exp() / (4.0 * PI * t).sqrt())
}

/// Smallest cutoff `k1` such that `2 Σ_{k ≥ k1} e^{-k²π²t}` is certified
/// below `tol` by the geometric bound `2 e^{-k1²π²t} / (1 - e^{-(2k1+1)π²t})`.
fn spectral_cutoff(t: f64, tol: f64, max_terms: usize, first: usize) -> Result<(usize, f64)> {
    let bound = |k: usize| {
        let k = k as f64;
        2.0 * (-k * k * PI * PI * t).exp() / (1.0 - (-(2.0 * k + 1.0) * PI * PI * t).exp())
    };
    let guess = ((2.0 / tol).ln().max(0.0) / (PI * PI * t)).sqrt().ceil();
    if !guess.is_finite() || guess > (max_terms + first) as f64 + 1.0 {
        let k = max_terms + first;
        return Err(Error::Truncation { max_terms, achieved_bound: bound(k) });
    }
    let mut k = (guess as usize).max(first + 1);
    while k > first + 1 && bound(k - 1) <= tol {
        k -= 1;
    }
    while bound(k) > tol {
        k += 1;
    }
    if k - first > max_terms {
        return Err(Error::Truncation { max_terms, achieved_bound: bound(max_terms + first) });
    }
    Ok((k, bound(k)))
}

/// Smallest `n0 ≥ 1` such that `scale · e^{-n0²/w} / (1 - e^{-(2n0+1)/w})`
/// is below `tol`; `w` is the Gaussian width parameter of the image terms.
fn image_cutoff(w: f64, scale: f64, tol: f64, max_terms: usize) -> Result<(usize, f64)> {
    let bound = |n: usize| {
        let n = n as f64;
        scale * (-n * n / w).exp() / (1.0 - (-(2.0 * n + 1.0) / w).exp())
    };
    let guess = (w * (scale / tol).ln().max(0.0)).sqrt().ceil().max(1.0);
    if !guess.is_finite() || 2.0 * guess + 1.0 > max_terms as f64 + 2.0 {
        let n = max_terms / 2;
        return Err(Error::Truncation { max_terms, achieved_bound: bound(n.max(1)) });
    }
    let mut n = guess as usize;
    while n > 1 && bound(n - 1) <= tol {
        n -= 1;
    }
    while bound(n) > tol {
        n += 1;
    }
    if 2 * n + 1 > max_terms {
        return Err(Error::Truncation { max_terms, achieved_bound: bound((max_terms.saturating_sub(1) / 2).max(1)) });
    }
    Ok((n, bound(n)))
}

/// `G_t(x, y)` by the method of images.
pub fn image_sum(bc: BoundaryCondition, p: KernelPoint, params: &KernelParams) -> Result<KernelValue> {
    params.validate()?;
    let KernelPoint { t, x, y } = p;
    let norm = 1.0 / (4.0 * PI * t).sqrt();
    let (n0, tail_bound) = image_cutoff(t, 4.0 * norm, params.abs_tol, params.max_terms)?;
    let sign = bc.image_sign();
    let mut direct = 0.0;
    let mut reflected = 0.0;
    // Offsets near a boundary are small differences of O(1) numbers; carry
    // the rounding error of x ± y so they keep full relative precision.
    let (d_hi, d_lo) = two_sum(x, -y);
    let (r_hi, r_lo) = two_sum(x, y);
    for n in -(n0 as i64)..=(n0 as i64) {
        let s = 2.0 * n as f64;
        let a = (d_hi - s) + d_lo;
        let b = (r_hi - s) + r_lo;
        direct += (-a * a / (4.0 * t)).exp();
        reflected += (-b * b / (4.0 * t)).exp();
    }
    let mut value = norm * (direct + sign * reflected);
    if bc == BoundaryCondition::Dirichlet {
        value = value.max(0.0);
    }
    Ok(KernelValue { value, representation: Representation::ImageSum, terms: 2 * n0 + 1, tail_bound })
}

/// `G_t(x, y)` by the eigen-expansion.
pub fn spectral_sum(bc: BoundaryCondition, p: KernelPoint, params: &KernelParams) -> Result<KernelValue> {
    params.validate()?;
    let KernelPoint { t, x, y } = p;
    let first = bc.first_mode();
    let (cut, tail_bound) = spectral_cutoff(t, params.abs_tol, params.max_terms, first)?;
    // Compensated: at small t a few hundred O(1) terms are summed.
    let (mut value, mut carry) = (0.0, 0.0);
    for k in (first..cut).rev() {
        let (sum, err) = two_sum(value, (-eigenvalue(k) * t).exp() * bc.eigenfunction(k, x) * bc.eigenfunction(k, y));
        value = sum;
        carry += err;
    }
    value += carry;
    if bc == BoundaryCondition::Dirichlet {
        value = value.max(0.0);
    }
    Ok(KernelValue { value, representation: Representation::Spectral, terms: cut - first, tail_bound })
}

/// `G_t(x, y)` with the representation selected by `t` against
/// [`KernelParams::switch_time`].
pub fn green_eval_detailed(bc: BoundaryCondition, p: KernelPoint, params: &KernelParams) -> Result<KernelValue> {
    match params.representation_for(p.t) {
        Representation::ImageSum => image_sum(bc, p, params),
        Representation::Spectral => spectral_sum(bc, p, params),
    }
}

pub fn green_eval(bc: BoundaryCondition, p: KernelPoint, params: &KernelParams) -> Result<f64> {
    green_eval_detailed(bc, p, params).map(|v| v.value)
}

/// `∫_0^1 G_t(x, y) dy`, integrating the chosen series term by term.
pub fn green_mass(bc: BoundaryCondition, t: f64, x: f64, params: &KernelParams) -> Result<f64> {
    check_time(t)?;
    check_coordinate(x)?;
    params.validate()?;
    match params.representation_for(t) {
        Representation::ImageSum => {
            let (n0, _) = image_cutoff(t, 4.0 / (4.0 * PI * t).sqrt(), params.abs_tol, params.max_terms)?;
            let h = 2.0 * t.sqrt();
            let sign = bc.image_sign();
            let mut total = 0.0;
            for n in -(n0 as i64)..=(n0 as i64) {
                let s = 2.0 * n as f64;
                let direct = 0.5 * (erf((x - s) / h) - erf((x - 1.0 - s) / h));
                let reflected = 0.5 * (erf((x + 1.0 - s) / h) - erf((x - s) / h));
                total += direct + sign * reflected;
            }
            Ok(total)
        }
        Representation::Spectral => {
            let first = bc.first_mode();
            let (cut, _) = spectral_cutoff(t, params.abs_tol, params.max_terms, first)?;
            Ok((first..cut).rev().map(|k| (-eigenvalue(k) * t).exp() * bc.eigenfunction(k, x) * bc.mode_mass(k)).sum())
        }
    }
}

/// `∫_0^1 G_t(x, y) G_s(y, z) dy`, computed mode-wise as
/// `Σ_k e^{-λ_k t} e^{-λ_k s} e_k(x) e_k(z)`.
pub fn green_convolve(bc: BoundaryCondition, s: f64, t: f64, x: f64, z: f64, params: &KernelParams) -> Result<f64> {
    check_time(s)?;
    check_time(t)?;
    check_coordinate(x)?;
    check_coordinate(z)?;
    params.validate()?;
    let first = bc.first_mode();
    let (cut, _) = spectral_cutoff(s + t, params.abs_tol, params.max_terms, first)?;
    Ok((first..cut)
        .rev()
        .map(|k| {
            let l = eigenvalue(k);
            (-l * t).exp() * (-l * s).exp() * bc.eigenfunction(k, x) * bc.eigenfunction(k, z)
        })
        .sum())
}

/// `∫_0^1 G_t(x, y)² dy = Σ_k e^{-2λ_k t} e_k(x)²`, which is the diagonal
/// `G_{2t}(x, x)`. The mode sum is used once `2t` reaches the switch time;
/// below it the same diagonal is summed by images.
pub fn green_sq_integral(bc: BoundaryCondition, t: f64, x: f64, params: &KernelParams) -> Result<f64> {
    check_time(t)?;
    check_coordinate(x)?;
    green_eval(bc, KernelPoint { t: 2.0 * t, x, y: x }, params)
}

/// `I(c, δ) = ∫_0^δ s^{-1/2} e^{-c/s} ds`.
fn inverse_root_gaussian_integral(c: f64, delta: f64) -> f64 {
    if c == 0.0 {
        return 2.0 * delta.sqrt();
    }
    2.0 * delta.sqrt() * (-c / delta).exp() - 2.0 * (PI * c).sqrt() * erfc((c / delta).sqrt())
}

/// `∫_0^δ ∫_0^1 G_s(x, y)² dy ds`, the variance of the stochastic
/// convolution at `(δ, x)` per unit `σ²`.
///
/// Integrates the image-sum form of `G_{2s}(x, x)` in time term by term,
/// which handles the `s^{-1/2}` singularity at `s = 0` exactly.
pub fn green_sq_time_integral(bc: BoundaryCondition, delta: f64, x: f64, params: &KernelParams) -> Result<f64> {
    check_time(delta)?;
    check_coordinate(x)?;
    params.validate()?;
    let pref = 1.0 / (8.0 * PI).sqrt();
    let scale = pref * 8.0 * delta.sqrt();
    let (n0, _) = image_cutoff(2.0 * delta, scale, params.abs_tol, params.max_terms)?;
    let sign = bc.image_sign();
    let mut total = 0.0;
    for n in (-(n0 as i64) - 1)..=(n0 as i64 + 1) {
        let nf = n as f64;
        let a = 0.5 * nf * nf;
        let b = 0.5 * (x - nf) * (x - nf);
        total += inverse_root_gaussian_integral(a, delta) + sign * inverse_root_gaussian_integral(b, delta);
    }
    Ok(pref * total)
}

/// Lower bound for
/// `max(sup_y ∫|G_t(x,y) - G_s(x,y)| dx, sup_x ∫|G_t(x,y) - G_s(x,y)| dy)`.
///
/// The supremum is taken over `n_quad` equally spaced values of the free
/// variable in `[0, 1]`. By the symmetry `G_t(x,y) = G_t(y,x)` both
/// integrals coincide at equal free values, so one is computed. The inner
/// integral uses Gauss–Legendre panels graded around the diagonal.
pub fn green_l1_time_diff(bc: BoundaryCondition, s: f64, t: f64, params: &KernelParams, n_quad: usize) -> Result<f64> {
    check_time(s)?;
    check_time(t)?;
    if s >= t {
        return Err(Error::domain(format!("need s < t, got s = {s}, t = {t}")));
    }
    if n_quad < 2 {
        return Err(Error::domain("n_quad must be at least 2"));
    }
    params.validate()?;
    let mut sup: f64 = 0.0;
    for i in 0..n_quad {
        let x = i as f64 / (n_quad - 1) as f64;
        let breaks = quad::graded_breaks(x, 0.25 * s.sqrt());
        let mut failure = None;
        let v = quad::composite(&breaks, 2, |y| {
            let gt = green_eval(bc, KernelPoint { t, x, y }, params);
            let gs = green_eval(bc, KernelPoint { t: s, x, y }, params);
            match (gt, gs) {
                (Ok(a), Ok(b)) => (a - b).abs(),
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        sup = sup.max(v);
    }
    Ok(sup)
}

/// One line of a kernel diagnostic table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRow {
    pub bc: BoundaryCondition,
    pub point: KernelPoint,
    pub value: KernelValue,
}

/// Writes kernel rows as CSV with header `t,x,y,bc,repr,value`.
pub fn write_kernel_table<W: Write>(mut out: W, rows: &[KernelRow]) -> std::io::Result<()> {
    writeln!(out, "t,x,y,bc,repr,value")?;
    for r in rows {
        writeln!(
            out,
            "{:e},{},{},{},{},{:.17e}",
            r.point.t,
            r.point.x,
            r.point.y,
            r.bc,
            r.value.representation.as_str(),
            r.value.value
        )?;
    }
    Ok(())
}
