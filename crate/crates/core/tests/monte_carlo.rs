//! Monte Carlo oracles for the reference run and the coupled estimators.

use rayon::prelude::*;
use shelab::experiments::{
    coupling_variances, fit_order, weak_error_study, FitPoint, LadderStudy, StudyMetric, TestFunction,
};
use shelab::noise::{aggregate_to_coarse, sample_increments, NoisePlan};
use shelab::scheme::{affine_exact_law, probe, ModeTail, NamedDrift, PathSimulator, Stepper};
use shelab::stats::Moments;
use shelab::{spectral, BoundaryCondition, Drift, InitialDatum, ModelSpec, SchemeConfig};

fn sine_model() -> ModelSpec {
    ModelSpec::new(Drift::Named(NamedDrift::sine(1.0)), 1.0, InitialDatum::constant(1.0), BoundaryCondition::Neumann)
        .unwrap()
}

fn sine_ladder(samples: usize, seed: u64) -> LadderStudy {
    LadderStudy {
        model: sine_model(),
        horizon: 1.0,
        x: 0.5,
        steps: vec![8, 16, 32, 64],
        samples,
        test_function: TestFunction::Tanh,
        metric: StudyMetric::WeakError,
        seed,
        strict: false,
        max_mode: 15,
        grid: 32,
        ref_refinement: 3,
        independent_noise: false,
    }
}

#[test]
fn reference_moments_match_the_exact_affine_law() {
    let model = ModelSpec::new(
        Drift::Affine { slope: 0.5, offset: 0.2 },
        1.0,
        InitialDatum::constant(1.0),
        BoundaryCondition::Neumann,
    )
    .unwrap();
    let config = SchemeConfig { horizon: 1.0, steps: 4, max_mode: 15, grid: 32, ref_refinement: 6, strict: false };
    let x = 0.5;
    let sim = PathSimulator::new(&model, &config).unwrap();
    let values: Vec<f64> =
        (0..100_000u64).into_par_iter().map(|p| sim.reference(77, p).unwrap().evaluate_at(x)).collect();
    let m = Moments::of(&values);
    let law = affine_exact_law(&model, 1.0, x, 15, ModeTail::Truncated).unwrap();
    assert!((m.mean - law.mean).abs() <= 4.0 * m.mean_stderr(), "mean {} vs {}", m.mean, law.mean);
    assert!(
        (m.variance - law.variance).abs() <= 4.0 * m.variance_stderr(),
        "variance {} vs {}",
        m.variance,
        law.variance
    );
}

/// Refining the reference from `2^m` to `2^{m+1}` substeps moves it by
/// `O((δ/2^m)^ν)` with `ν ≥ 0.7`, measured in L² at the probe.
#[test]
fn reference_self_convergence_in_refinement() {
    let model = sine_model();
    let (k, grid, steps, finest) = (15usize, 32usize, 8usize, 5u32);
    let plan = NoisePlan::new(model.bc, 1.0, steps << finest, k).unwrap();
    let a0 = model.initial_modes(k, grid).unwrap().into_coeffs();
    let steppers: Vec<Stepper> =
        (1..=finest).map(|m| Stepper::new(&model, k, grid, 1.0 / (steps << m) as f64).unwrap()).collect();
    let paths = 10_000u64;
    // Per path: probe values of the references at m = 1..=finest.
    let probes: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let fine = sample_increments(5, p, &plan);
            (1..=finest)
                .map(|m| {
                    let noise = aggregate_to_coarse(&fine, 1 << (finest - m)).unwrap();
                    let mut a = a0.clone();
                    steppers[m as usize - 1].clone().run(&mut a, &noise).unwrap();
                    probe(model.bc, &a, 0.5)
                })
                .collect()
        })
        .collect();
    let points: Vec<FitPoint> = (0..finest as usize - 1)
        .map(|j| {
            let sq: Vec<f64> = probes.iter().map(|v| (v[j] - v[j + 1]).powi(2)).collect();
            let m = Moments::of(&sq);
            let l2 = m.mean.sqrt();
            FitPoint::new(1.0 / (steps << (j + 1)) as f64, l2, m.mean_stderr() / (2.0 * l2))
        })
        .collect();
    let fit = fit_order(&points);
    let slope = fit.slope.expect("conclusive self-convergence fit");
    assert!(slope >= 0.7, "self-convergence exponent {slope}: {points:?}");
}

#[test]
fn shared_noise_reduces_weak_error_variance() {
    let study = sine_ladder(2000, 11);
    let (coupled, independent) = coupling_variances(&study, 32).unwrap();
    assert!(independent >= 5.0 * coupled, "independent {independent} vs coupled {coupled}");
}

#[test]
fn named_drift_paths_stay_bounded() {
    let model = ModelSpec::new(
        Drift::Named(NamedDrift::sine(3.0)),
        1.0,
        InitialDatum::constant(1.0),
        BoundaryCondition::Dirichlet,
    )
    .unwrap();
    let config = SchemeConfig { horizon: 1.0, steps: 16, max_mode: 31, grid: 64, ref_refinement: 1, strict: false };
    let sim = PathSimulator::new(&model, &config).unwrap();
    let sups: Vec<f64> = (0..1000u64)
        .into_par_iter()
        .map(|p| {
            let g = spectral::synthesize(&sim.perturbed(3, p).unwrap(), config.grid).unwrap();
            g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .collect();
    assert!(sups.iter().all(|s| s.is_finite()));
    let m = Moments::of(&sups);
    let worst = sups.iter().copied().fold(0.0, f64::max);
    assert!(m.excess_kurtosis.is_finite());
    assert!(worst <= m.mean + 8.0 * m.variance.sqrt(), "max {worst}, mean {}, var {}", m.mean, m.variance);
}

#[test]
fn weak_slope_is_stable_across_seeds() {
    let slopes: Vec<f64> = (0..5u64)
        .map(|s| {
            let r = weak_error_study(&sine_ladder(10_000, 1000 + 100 * s)).unwrap();
            r.fit.slope.expect("conclusive fit")
        })
        .collect();
    let m = Moments::of(&slopes);
    assert!(m.variance.sqrt() <= 0.1, "slopes {slopes:?}");
}
