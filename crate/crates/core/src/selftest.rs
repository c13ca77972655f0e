//! Fast invariant suite behind `shelab selftest`.

use crate::density;
use crate::error::Result;
use crate::experiments::{fit_order, kernel_checks, Check, FitPoint};
use crate::kernels::{eigenvalue, BoundaryCondition};
use crate::noise::{aggregate_to_coarse, mode_variance, sample_increments, NoisePlan};
use crate::quad;
use crate::scheme::{
    affine_exact_law, affine_perturbed_law, Drift, InitialDatum, ModeTail, ModelSpec, PathSimulator, SchemeConfig,
};
use rayon::prelude::*;
use std::fmt::Write;

/// Deliberate faults for checking that the suite notices them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Faults {
    /// Scale every `v_k` by `1 + 1e-6` inside the isometry check.
    pub isometry: bool,
}

pub fn run(faults: Faults) -> Result<Vec<Check>> {
    let mut checks = kernel_checks(50)?;

    let mut iso = 0.0f64;
    for k in [0usize, 1, 3, 10, 60] {
        for delta in [1e-4, 0.01, 0.3] {
            let l = eigenvalue(k);
            let q = quad::composite(&quad::geometric_breaks(delta), 1, |s| (-2.0 * l * s).exp());
            let mut v = mode_variance(l, delta);
            if faults.isometry {
                v *= 1.0 + 1e-6;
            }
            iso = iso.max((v - q).abs());
        }
    }
    checks.push(Check::new("noise_isometry", iso, 1e-13));

    let plan = NoisePlan::new(BoundaryCondition::Neumann, 1.0, 8, 15)?;
    let tensors = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map(|pool| {
            pool.install(|| (0..16u64).into_par_iter().map(|p| sample_increments(3, p, &plan)).collect::<Vec<_>>())
        })
    };
    let same = match (tensors(1), tensors(3)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    checks.push(Check::new("noise_determinism", if same { 0.0 } else { 1.0 }, 0.0));

    let (df, r, l) = (0.001, 10usize, eigenvalue(5));
    let geometric: f64 = (0..r).map(|j| (-2.0 * l * j as f64 * df).exp() * mode_variance(l, df)).sum();
    checks.push(Check::new("aggregation_variance", (geometric - mode_variance(l, r as f64 * df)).abs(), 1e-15));

    let fine = sample_increments(1, 0, &NoisePlan::new(BoundaryCondition::Neumann, 1.0, 12, 5)?);
    let coarse = aggregate_to_coarse(&fine, 4)?;
    let plain: f64 = (0..4).map(|j| fine.get(j, 0)).sum();
    checks.push(Check::new("aggregation_constant_mode", (coarse.get(0, 0) - plain).abs(), 1e-15));

    let model = ModelSpec::new(Drift::zero(), 1.0, InitialDatum::cosine(1.0, 1), BoundaryCondition::Neumann)?;
    let cfg = SchemeConfig { horizon: 1.0, steps: 16, max_mode: 31, grid: 64, ref_refinement: 3, strict: true };
    let sim = PathSimulator::new(&model, &cfg)?;
    let mut coupling = 0.0f64;
    for path in 0..20 {
        let c = sim.coupled(9, path, false)?;
        for x in crate::spectral::grid_points(cfg.grid) {
            coupling = coupling.max((c.perturbed.evaluate_at(x) - c.reference.evaluate_at(x)).abs());
        }
    }
    checks.push(Check::new("zero_drift_coupling", coupling, 1e-10));

    let exact = affine_exact_law(&model, 1.0, 0.4, 64, ModeTail::Truncated)?;
    let scheme =
        affine_perturbed_law(&model, &SchemeConfig { max_mode: 64, grid: 130, ..cfg }, 0.4, ModeTail::Truncated)?;
    let law_gap = (exact.mean - scheme.mean).abs().max((exact.variance - scheme.variance).abs());
    checks.push(Check::new("zero_drift_laws", law_gap, 1e-10));

    let pts: Vec<FitPoint> =
        [0.1, 0.05, 0.025, 0.0125].iter().map(|&d: &f64| FitPoint::new(d, 0.3 * d.sqrt(), 0.0)).collect();
    let slope = fit_order(&pts).slope.unwrap_or(f64::NAN);
    checks.push(Check::new("fit_fixture", (slope - 0.5).abs(), 1e-12));

    let mass = quad::composite(&[-3.0, -1.0, 0.0, 1.0, 3.0], 8, |y| density::mollifier(0.04, y).unwrap_or(f64::NAN));
    checks.push(Check::new("mollifier_mass", (mass - 1.0).abs(), 1e-10));

    Ok(checks)
}

/// One line per check and a summary line starting with `label`.
pub fn render(label: &str, checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{tag} {:<36} residual={:.3e} tol={:.1e}", c.name, c.residual, c.tolerance);
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    let _ = writeln!(out, "{label}: {passed}/{} checks passed", checks.len());
    out
}
