//! Property-based checks of the structural invariants, through the public API.

use proptest::prelude::*;
use shelab::density::{self, SampleSet};
use shelab::kernels::{self, green_convolve, green_eval, green_mass, heat_kernel_free, image_sum, spectral_sum};
use shelab::noise::{aggregate_to_coarse, sample_increments, NoisePlan};
use shelab::scheme::{affine_exact_law, affine_perturbed_law, phi1, ModeTail, Stepper};
use shelab::spectral::{analyze, synthesize};
use shelab::{BoundaryCondition, Drift, InitialDatum, KernelParams, KernelPoint, ModeVector, ModelSpec, SchemeConfig};
use std::sync::OnceLock;

fn bc_strategy() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![Just(BoundaryCondition::Neumann), Just(BoundaryCondition::Dirichlet)]
}

/// `t` log-uniform on `[lo, hi]`.
fn log_time(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (0.0f64..=1.0).prop_map(move |u| lo * (hi / lo).powf(u))
}

fn g(bc: BoundaryCondition, t: f64, x: f64, y: f64) -> f64 {
    green_eval(bc, KernelPoint::new(t, x, y).unwrap(), &KernelParams::default()).unwrap()
}

/// Deterministic grid used to fit the comparison constants.
fn fit_grid() -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::new();
    for i in 0..8 {
        let t = 1e-3 * 1000f64.powf(i as f64 / 7.0);
        for j in 0..5 {
            let s = t * 10f64.powf(-(j as f64) * 0.5);
            for x in [0.0, 0.1, 0.35, 0.5, 0.9, 1.0] {
                for y in [0.0, 0.05, 0.3, 0.5, 0.8, 1.0] {
                    out.push((s, t, x, y));
                }
            }
        }
    }
    out
}

/// `G_s / (√(t/s) G_t)` for `s ≤ t`, Neumann.
fn scaled_ratio(s: f64, t: f64, x: f64, y: f64) -> f64 {
    let bc = BoundaryCondition::Neumann;
    g(bc, s, x, y) / ((t / s).sqrt() * g(bc, t, x, y))
}

/// `G_t² √t / G_{t/2}`.
fn squared_ratio(bc: BoundaryCondition, t: f64, x: f64, y: f64) -> f64 {
    let half = g(bc, t / 2.0, x, y);
    if half == 0.0 {
        return 0.0;
    }
    g(bc, t, x, y).powi(2) * t.sqrt() / half
}

/// `G_t / P_t`, Neumann.
fn sandwich_ratio(t: f64, x: f64, y: f64) -> f64 {
    g(BoundaryCondition::Neumann, t, x, y) / heat_kernel_free(t, x, y).unwrap()
}

/// Grid maxima of the scaled, squared and sandwich ratios.
fn fitted_constants() -> &'static (f64, f64, f64) {
    static CELL: OnceLock<(f64, f64, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = fit_grid();
        let scaled = grid.iter().map(|&(s, t, x, y)| scaled_ratio(s, t, x, y)).fold(0.0, f64::max);
        let squared = grid
            .iter()
            .filter(|&&(_, _, x, y)| x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)
            .map(|&(_, t, x, y)| squared_ratio(BoundaryCondition::Neumann, t, x, y))
            .fold(0.0, f64::max);
        let sandwich = grid.iter().map(|&(_, t, x, y)| sandwich_ratio(t, x, y)).fold(0.0, f64::max);
        (scaled, squared, sandwich)
    })
}

fn model(drift: Drift, bc: BoundaryCondition) -> ModelSpec {
    ModelSpec::new(drift, 1.0, InitialDatum::new("1+cos(πx)/2", |x| 1.0 + 0.5 * (std::f64::consts::PI * x).cos()), bc)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn representations_agree(bc in bc_strategy(), t in log_time(1e-4, 4.0), x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let params = KernelParams::default();
        let p = KernelPoint::new(t, x, y).unwrap();
        let a = image_sum(bc, p, &params).unwrap().value;
        let b = spectral_sum(bc, p, &params).unwrap().value;
        prop_assert!((a - b).abs() <= 2.0 * params.abs_tol, "{a} vs {b}");
    }

    #[test]
    fn kernel_is_symmetric(bc in bc_strategy(), t in log_time(1e-4, 4.0), x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        prop_assert!((g(bc, t, x, y) - g(bc, t, y, x)).abs() <= 1e-14);
    }

    #[test]
    fn neumann_kernel_dominates_free_kernel(t in log_time(1e-4, 1.0), x in 0.001f64..0.999, y in 0.001f64..0.999) {
        // Far off the diagonal both kernels underflow at small t.
        prop_assume!(heat_kernel_free(t, x, y).unwrap() > 1e-300);
        prop_assert!(g(BoundaryCondition::Neumann, t, x, y) > 0.0);
        let ratio = sandwich_ratio(t, x, y);
        prop_assert!(ratio >= 1.0 - 1e-12);
        prop_assert!(ratio <= 2.0 * fitted_constants().2);
    }

    #[test]
    fn mass_bounds(t in log_time(1e-2, 4.0), x in 0.05f64..0.95) {
        let params = KernelParams::default();
        let n = green_mass(BoundaryCondition::Neumann, t, x, &params).unwrap();
        let d = green_mass(BoundaryCondition::Dirichlet, t, x, &params).unwrap();
        prop_assert!((n - 1.0).abs() <= 1e-12);
        prop_assert!(d > 0.0 && d < 1.0, "{d}");
    }

    #[test]
    fn semigroup_in_modes(bc in bc_strategy(), s in log_time(1e-3, 1.0), t in log_time(1e-3, 1.0), x in 0.0f64..=1.0, z in 0.0f64..=1.0) {
        let params = KernelParams::default();
        let lhs = green_convolve(bc, s, t, x, z, &params).unwrap();
        prop_assert!((lhs - g(bc, s + t, x, z)).abs() <= 1e-10);
    }

    #[test]
    fn comparison_ratios_stay_below_twice_the_fitted_constant(
        t in log_time(1e-3, 1.0),
        shrink in 0.0f64..=2.0,
        x in 0.001f64..0.999,
        y in 0.001f64..0.999,
    ) {
        let (scaled, squared, _) = *fitted_constants();
        let s = t * 10f64.powf(-shrink);
        prop_assert!(scaled_ratio(s, t, x, y) <= 2.0 * scaled);
        prop_assert!(squared_ratio(BoundaryCondition::Neumann, t, x, y) <= 2.0 * squared);
    }

    #[test]
    fn synthesis_round_trip(bc in bc_strategy(), coeffs in prop::collection::vec(-2.0f64..2.0, 16)) {
        let k = match bc {
            BoundaryCondition::Neumann => 15,
            BoundaryCondition::Dirichlet => 16,
        };
        let m = ModeVector::new(bc, coeffs).unwrap();
        let back = analyze(&synthesize(&m, 2 * k + 2).unwrap(), k).unwrap();
        for (a, b) in m.coeffs().iter().zip(back.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn noise_replay_and_aggregation(seed in any::<u64>(), path in 0u64..1_000_000, ratio in 1usize..5) {
        let plan = NoisePlan::new(BoundaryCondition::Neumann, 1.0, 4 * ratio, 7).unwrap();
        let a = sample_increments(seed, path, &plan);
        prop_assert_eq!(&a, &sample_increments(seed, path, &plan));
        let coarse = aggregate_to_coarse(&a, ratio).unwrap();
        for i in 0..4 {
            let direct: f64 = (0..ratio).map(|j| a.get(i * ratio + j, 0)).sum();
            prop_assert!((coarse.get(i, 0) - direct).abs() <= 1e-12);
        }
    }

    /// Without drift, stepping the fine tensor and stepping its aggregate
    /// land on the same state.
    #[test]
    fn zero_drift_aggregation_consistency(bc in bc_strategy(), seed in any::<u64>(), ratio in 1usize..5) {
        let m = model(Drift::zero(), bc);
        let (k, grid, steps) = (15, 32, 4);
        let plan = NoisePlan::new(bc, 1.0, steps * ratio, k).unwrap();
        let fine = sample_increments(seed, 0, &plan);
        let coarse = aggregate_to_coarse(&fine, ratio).unwrap();
        let a0 = m.initial_modes(k, grid).unwrap().into_coeffs();
        let (mut a, mut b) = (a0.clone(), a0);
        Stepper::new(&m, k, grid, 1.0 / (steps * ratio) as f64).unwrap().run(&mut a, &fine).unwrap();
        Stepper::new(&m, k, grid, 1.0 / steps as f64).unwrap().run(&mut b, &coarse).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn phi_is_a_decreasing_fraction(z in 0.0f64..50.0, dz in 1e-3f64..1.0) {
        let (a, b) = (phi1(z), phi1(z + dz));
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b < a);
    }

    #[test]
    fn driftless_laws_coincide(bc in bc_strategy(), x in 0.05f64..0.95, steps in 12usize..200) {
        let m = model(Drift::zero(), bc);
        let cfg = SchemeConfig { horizon: 1.0, steps, max_mode: 40, grid: 82, ref_refinement: 1, strict: true };
        let exact = affine_exact_law(&m, 1.0, x, 40, ModeTail::Truncated).unwrap();
        let scheme = affine_perturbed_law(&m, &cfg, x, ModeTail::Truncated).unwrap();
        prop_assert!((exact.mean - scheme.mean).abs() <= 1e-10);
        prop_assert!((exact.variance - scheme.variance).abs() <= 1e-10);
    }

    #[test]
    fn kde_is_linear_in_the_empirical_measure(
        a in prop::collection::vec(-1.0f64..1.0, 1..40),
        b in prop::collection::vec(-1.0f64..1.0, 1..40),
    ) {
        let z: Vec<f64> = (0..161).map(|i| -2.0 + 0.025 * i as f64).collect();
        let zeta = 0.02;
        let est = |v: &[f64]| density::kde(&SampleSet::new(v.to_vec(), 0, "").unwrap(), zeta, &z).unwrap();
        let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
        let (ea, eb, ej) = (est(&a), est(&b), est(&joined));
        let (na, nb) = (a.len() as f64, b.len() as f64);
        for ((p, q), r) in ea.values().iter().zip(eb.values()).zip(ej.values()) {
            prop_assert!(((na * p + nb * q) / (na + nb) - r).abs() <= 1e-12);
        }
    }
}

#[test]
fn free_kernel_closed_form() {
    let direct = kernels::heat_kernel_free(0.25, 0.1, 0.3).unwrap();
    assert!((direct - (-(0.2f64).powi(2)).exp() / std::f64::consts::PI.sqrt()).abs() < 1e-15);
}
