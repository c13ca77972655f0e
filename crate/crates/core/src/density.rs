//! Gaussian mollifier, kernel density estimates and density distances.
//!
//! The estimator at `z` is the sample mean of `g_ζ(z - X_i)`, i.e. the Monte
//! Carlo estimate of `E[g_ζ(z - F)]`, which targets the density of `F`
//! smoothed by a Gaussian of variance `ζ`.

use crate::error::{Error, Result};
use crate::scheme::GaussianLaw;
use crate::stats::CompensatedSum;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

/// Default number of points of a density grid.
pub const DEFAULT_GRID_POINTS: usize = 1025;
/// Default half-width of a density grid, in standard deviations.
pub const DEFAULT_GRID_WIDTH: f64 = 6.0;
/// Largest tail mass outside the grid accepted by [`tv_distance`].
pub const TV_TAIL_TOLERANCE: f64 = 1e-4;

/// Kernel evaluations are skipped beyond this many `√ζ` from a sample.
const KDE_WINDOW: f64 = 9.0;
/// Samples per accumulation chunk; fixed so results do not depend on threads.
const KDE_CHUNK: usize = 4096;

/// Bandwidth at `10^6` samples; fixes the constant of the `n^{-2/5}` schedule.
pub const BANDWIDTH_AT_MILLION: f64 = 0.005;

/// `g_ζ(y) = e^{-y²/(2ζ)} / √(2πζ)`.
pub fn mollifier(zeta: f64, y: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::domain(format!("mollifier variance must be positive, got {zeta}")));
    }
    Ok(gauss(zeta, y))
}

fn gauss(zeta: f64, y: f64) -> f64 {
    (-y * y / (2.0 * zeta)).exp() / (2.0 * PI * zeta).sqrt()
}

/// `P(N(mean, var) ∉ [lo, hi])`.
fn gaussian_outside(mean: f64, var: f64, lo: f64, hi: f64) -> f64 {
    let s = (2.0 * var).sqrt();
    0.5 * erfc((mean - lo) / s) + 0.5 * erfc((hi - mean) / s)
}

/// Bandwidth `ζ(n) = c · n^{-2/5}` with `ζ(10^6) = 0.005`.
pub fn bandwidth(n_samples: usize) -> f64 {
    BANDWIDTH_AT_MILLION * (n_samples as f64 / 1e6).powf(-0.4)
}

/// Uniform grid of `points` points covering `mean ± width·std` of every law.
pub fn covering_grid(laws: &[(f64, f64)], width: f64, points: usize) -> Result<Vec<f64>> {
    if laws.is_empty() || points < 3 {
        return Err(Error::domain("a covering grid needs at least one law and three points"));
    }
    let lo = laws.iter().map(|(m, s)| m - width * s).fold(f64::INFINITY, f64::min);
    let hi = laws.iter().map(|(m, s)| m + width * s).fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain("degenerate grid span"));
    }
    let h = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + i as f64 * h).collect())
}

/// 1025 points over `mean ± 6 std` of the widest law.
pub fn default_grid(laws: &[(f64, f64)]) -> Result<Vec<f64>> {
    covering_grid(laws, DEFAULT_GRID_WIDTH, DEFAULT_GRID_POINTS)
}

fn check_grid(z: &[f64]) -> Result<()> {
    if z.len() < 2 {
        return Err(Error::domain("a density grid needs at least two points"));
    }
    if z.iter().any(|v| !v.is_finite()) || z.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("density grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Scalar Monte Carlo samples with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, seed: u64, config_hash: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("a sample set must not be empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("sample {i} is not finite")));
        }
        Ok(SampleSet { values, seed, config_hash: config_hash.into() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    z_grid: Vec<f64>,
    values: Vec<f64>,
    /// Mollifier variance; zero for exact laws.
    zeta: f64,
    /// Probability mass of the estimated law outside the grid.
    tail_mass: f64,
    n_samples: usize,
}

impl DensityEstimate {
    pub fn z_grid(&self) -> &[f64] {
        &self.z_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.z_grid, &self.values)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Every other grid point, for grid-halving refinement.
    pub fn coarsened(&self) -> DensityEstimate {
        DensityEstimate {
            z_grid: self.z_grid.iter().step_by(2).copied().collect(),
            values: self.values.iter().step_by(2).copied().collect(),
            ..*self
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "z,value")?;
        for (z, v) in self.z_grid.iter().zip(&self.values) {
            writeln!(out, "{z:e},{v:e}")?;
        }
        Ok(())
    }

    /// JSON sidecar `{zeta, n_samples, seed, config_hash}`.
    pub fn sidecar(&self, seed: u64, config_hash: &str) -> DensitySidecar {
        DensitySidecar { zeta: self.zeta, n_samples: self.n_samples, seed, config_hash: config_hash.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySidecar {
    pub zeta: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub config_hash: String,
}

fn trapezoid(z: &[f64], v: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    for (zw, vw) in z.windows(2).zip(v.windows(2)) {
        s.add(0.5 * (zw[1] - zw[0]) * (vw[0] + vw[1]));
    }
    s.value()
}

/// Kernel density estimate `z ↦ (1/n) Σ_i g_ζ(z - X_i)` on `z_grid`.
pub fn kde(samples: &SampleSet, zeta: f64, z_grid: &[f64]) -> Result<DensityEstimate> {
    mollifier(zeta, 0.0)?;
    check_grid(z_grid)?;
    let xs = samples.values();
    if xs.is_empty() {
        return Err(Error::domain("kde of an empty sample set"));
    }
    let reach = KDE_WINDOW * zeta.sqrt();
    let g = z_grid.len();
    let partials: Vec<Vec<CompensatedSum>> = xs
        .par_chunks(KDE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![CompensatedSum::new(); g];
            for &x in chunk {
                let lo = z_grid.partition_point(|&z| z < x - reach);
                let hi = z_grid.partition_point(|&z| z <= x + reach);
                for (a, &z) in acc[lo..hi].iter_mut().zip(&z_grid[lo..hi]) {
                    a.add(gauss(zeta, z - x));
                }
            }
            acc
        })
        .collect();
    let mut total = vec![CompensatedSum::new(); g];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let n = xs.len() as f64;
    let (lo, hi) = (z_grid[0], z_grid[g - 1]);
    let mut tail = CompensatedSum::new();
    for &x in xs {
        tail.add(gaussian_outside(x, zeta, lo, hi));
    }
    Ok(DensityEstimate {
        z_grid: z_grid.to_vec(),
        values: total.iter().map(|s| s.value() / n).collect(),
        zeta,
        tail_mass: tail.value() / n,
        n_samples: xs.len(),
    })
}

/// Exact normal density of `law` on `z_grid`.
pub fn gaussian_density(law: &GaussianLaw, z_grid: &[f64]) -> Result<DensityEstimate> {
    check_grid(z_grid)?;
    Ok(DensityEstimate {
        z_grid: z_grid.to_vec(),
        values: z_grid.iter().map(|&z| gauss(law.variance, z - law.mean)).collect(),
        zeta: 0.0,
        tail_mass: gaussian_outside(law.mean, law.variance, z_grid[0], z_grid[z_grid.len() - 1]),
        n_samples: 0,
    })
}

fn check_same_grid(a: &DensityEstimate, b: &DensityEstimate) -> Result<()> {
    if a.z_grid != b.z_grid {
        return Err(Error::domain("density estimates live on different grids"));
    }
    Ok(())
}

/// `max_j |a(z_j) - b(z_j)|`, a lower bound of the true sup-norm distance.
pub fn sup_distance(a: &DensityEstimate, b: &DensityEstimate) -> Result<f64> {
    check_same_grid(a, b)?;
    Ok(a.values.iter().zip(&b.values).fold(0.0, |s, (x, y)| s.max((x - y).abs())))
}

/// Trapezoid integral of `|a - b|`, the total-variation distance under the
/// factor-2 convention (L¹ distance of the densities).
pub fn tv_distance(a: &DensityEstimate, b: &DensityEstimate) -> Result<f64> {
    check_same_grid(a, b)?;
    for (name, d) in [("first", a), ("second", b)] {
        if d.tail_mass > TV_TAIL_TOLERANCE {
            return Err(Error::domain(format!(
                "grid too narrow for total variation: {name} density leaves mass {:e} outside",
                d.tail_mass
            )));
        }
    }
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    Ok(trapezoid(&a.z_grid, &diff))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMetric {
    SupDensity,
    Tv,
}

impl DensityMetric {
    pub fn distance(self, a: &DensityEstimate, b: &DensityEstimate) -> Result<f64> {
        match self {
            DensityMetric::SupDensity => sup_distance(a, b),
            DensityMetric::Tv => tv_distance(a, b),
        }
    }
}

/// A distance on the full grid, on the halved grid, and their Richardson
/// combination `raw + (raw - coarse)/3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedDistance {
    pub raw: f64,
    pub coarse: f64,
    pub refined: f64,
}

pub fn refined_distance(metric: DensityMetric, a: &DensityEstimate, b: &DensityEstimate) -> Result<RefinedDistance> {
    let raw = metric.distance(a, b)?;
    let coarse = metric.distance(&a.coarsened(), &b.coarsened())?;
    Ok(RefinedDistance { raw, coarse, refined: raw + (raw - coarse) / 3.0 })
}

/// Standard normal CDF, used by tests and reports.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}
