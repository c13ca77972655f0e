//! Eigen-coefficients and their values on the midpoint collocation grid.
//!
//! The grid of size `M` is `x_j = (j + 1/2)/M`. Analysis is the midpoint
//! rule `a_k = (1/M) Σ_j g(x_j) e_k(x_j)`, which is exact for trigonometric
//! polynomials of degree below `M` in the chosen basis.

use crate::error::{Error, Result};
use crate::kernels::BoundaryCondition;

/// Coefficients of a function in the orthonormal eigenbasis.
///
/// Neumann vectors hold modes `0..=K`, Dirichlet vectors modes `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    bc: BoundaryCondition,
    coeffs: Vec<f64>,
}

impl ModeVector {
    pub fn new(bc: BoundaryCondition, coeffs: Vec<f64>) -> Result<Self> {
        if bc == BoundaryCondition::Dirichlet && coeffs.is_empty() {
            return Err(Error::domain("a Dirichlet mode vector needs at least one mode"));
        }
        if coeffs.is_empty() {
            return Err(Error::domain("a mode vector needs at least one mode"));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::domain(format!("coefficient {i} is not finite")));
        }
        Ok(ModeVector { bc, coeffs })
    }

    pub fn zeros(bc: BoundaryCondition, max_mode: usize) -> Self {
        ModeVector { bc, coeffs: vec![0.0; bc.mode_count(max_mode).max(1)] }
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Highest mode number `K`.
    pub fn max_mode(&self) -> usize {
        self.coeffs.len() - 1 + self.bc.first_mode()
    }

    /// Mode number stored at position `i`.
    pub fn mode_number(&self, i: usize) -> usize {
        i + self.bc.first_mode()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `Σ_k a_k e_k(x)` at an arbitrary point.
    pub fn evaluate_at(&self, x: f64) -> f64 {
        evaluate_coeffs(self.bc, &self.coeffs, x)
    }
}

/// `Σ_k a_k e_k(x)` for raw coefficients in storage order.
pub fn evaluate_coeffs(bc: BoundaryCondition, coeffs: &[f64], x: f64) -> f64 {
    let first = bc.first_mode();
    coeffs.iter().enumerate().rev().map(|(i, a)| a * bc.eigenfunction(i + first, x)).sum()
}

/// Values on the midpoint grid `x_j = (j + 1/2)/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    bc: BoundaryCondition,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(bc: BoundaryCondition, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain("a grid function needs at least two points"));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("grid value {j} is not finite")));
        }
        Ok(GridFunction { bc, values })
    }

    /// Samples a pointwise map on the midpoint grid of size `m`.
    pub fn sample(bc: BoundaryCondition, m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(bc, grid_points(m).into_iter().map(f).collect())
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> Vec<f64> {
        grid_points(self.values.len())
    }
}

/// Midpoint collocation grid of size `m`.
pub fn grid_points(m: usize) -> Vec<f64> {
    (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect()
}

fn check_margin(bc: BoundaryCondition, max_mode: usize, grid: usize) -> Result<()> {
    let required = 2 * max_mode + 2;
    if grid < required {
        return Err(Error::Aliasing { grid, modes: bc.mode_count(max_mode), required });
    }
    Ok(())
}

/// Precomputed table `e_k(x_j)` for repeated transforms.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    bc: BoundaryCondition,
    max_mode: usize,
    grid: usize,
    /// Row `i` holds mode `i + first_mode` at all grid points.
    table: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(bc: BoundaryCondition, max_mode: usize, grid: usize) -> Result<Self> {
        if bc == BoundaryCondition::Dirichlet && max_mode == 0 {
            return Err(Error::domain("Dirichlet bases need K ≥ 1"));
        }
        check_margin(bc, max_mode, grid)?;
        let pts = grid_points(grid);
        let first = bc.first_mode();
        let n = bc.mode_count(max_mode);
        let mut table = Vec::with_capacity(n * grid);
        for i in 0..n {
            table.extend(pts.iter().map(|&x| bc.eigenfunction(i + first, x)));
        }
        Ok(SpectralBasis { bc, max_mode, grid, table })
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn mode_count(&self) -> usize {
        self.bc.mode_count(self.max_mode)
    }

    /// Grid values of `Σ_k a_k e_k` into `out`.
    pub fn synthesize_into(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.mode_count());
        debug_assert_eq!(out.len(), self.grid);
        out.fill(0.0);
        for (a, row) in coeffs.iter().zip(self.table.chunks_exact(self.grid)) {
            if *a == 0.0 {
                continue;
            }
            for (o, e) in out.iter_mut().zip(row) {
                *o += a * e;
            }
        }
    }

    /// Midpoint-rule inner products `(1/M) Σ_j g_j e_k(x_j)` into `out`.
    pub fn analyze_into(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.grid);
        debug_assert_eq!(out.len(), self.mode_count());
        let inv = 1.0 / self.grid as f64;
        for (o, row) in out.iter_mut().zip(self.table.chunks_exact(self.grid)) {
            *o = row.iter().zip(values).map(|(e, g)| e * g).sum::<f64>() * inv;
        }
    }
}

/// Grid values of a mode vector on a midpoint grid of size `grid`.
pub fn synthesize(m: &ModeVector, grid: usize) -> Result<GridFunction> {
    let basis = SpectralBasis::new(m.bc, m.max_mode(), grid)?;
    let mut out = vec![0.0; grid];
    basis.synthesize_into(&m.coeffs, &mut out);
    GridFunction::new(m.bc, out)
}

/// Modes `≤ max_mode` of a grid function.
pub fn analyze(g: &GridFunction, max_mode: usize) -> Result<ModeVector> {
    let basis = SpectralBasis::new(g.bc, max_mode, g.len())?;
    let mut out = vec![0.0; basis.mode_count()];
    basis.analyze_into(&g.values, &mut out);
    ModeVector::new(g.bc, out)
}

/// Modes of `x ↦ b(u(x))` where `u` is given by `state`, computed as
/// `analyze(b ∘ synthesize(state, grid))` with no de-aliasing.
pub fn project_drift(b: impl Fn(f64) -> f64, state: &ModeVector, grid: usize) -> Result<ModeVector> {
    let basis = SpectralBasis::new(state.bc, state.max_mode(), grid)?;
    let mut values = vec![0.0; grid];
    basis.synthesize_into(&state.coeffs, &mut values);
    apply_pointwise(&b, &mut values)?;
    let mut out = vec![0.0; basis.mode_count()];
    basis.analyze_into(&values, &mut out);
    ModeVector::new(state.bc, out)
}

/// Replaces each grid value `v` by `b(v)`, failing on the first non-finite result.
pub(crate) fn apply_pointwise(b: &impl Fn(f64) -> f64, values: &mut [f64]) -> Result<()> {
    let m = values.len();
    for (j, v) in values.iter_mut().enumerate() {
        let w = b(*v);
        if !w.is_finite() {
            return Err(Error::Evaluation { at: format!("grid point x = {}", (j as f64 + 0.5) / m as f64), value: w });
        }
        *v = w;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};
    use BoundaryCondition::*;

    fn random_modes(bc: BoundaryCondition, k: usize, seed: u64) -> ModeVector {
        let mut s = seed;
        let coeffs = (0..bc.mode_count(k))
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        ModeVector::new(bc, coeffs).unwrap()
    }

    #[test]
    fn constant_mode_synthesizes_constant() {
        let mut c = vec![0.0; 9];
        c[0] = 2.5;
        let g = synthesize(&ModeVector::new(Neumann, c).unwrap(), 32).unwrap();
        assert!(g.values().iter().all(|v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn single_mode_synthesizes_cosine() {
        let mut c = vec![0.0; 9];
        c[1] = 1.0;
        let g = synthesize(&ModeVector::new(Neumann, c).unwrap(), 32).unwrap();
        for (v, x) in g.values().iter().zip(g.points()) {
            assert!((v - SQRT_2 * (PI * x).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn aliasing_margin_is_enforced() {
        let m = ModeVector::zeros(Neumann, 10);
        match synthesize(&m, 21) {
            Err(Error::Aliasing { required, .. }) => assert_eq!(required, 22),
            other => panic!("{other:?}"),
        }
        assert!(synthesize(&m, 22).is_ok());
    }

    #[test]
    fn analyze_constant_and_single_mode() {
        let g = GridFunction::sample(Neumann, 64, |_| 1.75).unwrap();
        let a = analyze(&g, 8).unwrap();
        assert!((a.coeffs()[0] - 1.75).abs() < 1e-14);
        assert!(a.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));

        let g = GridFunction::sample(Neumann, 64, |x| SQRT_2 * (3.0 * PI * x).cos()).unwrap();
        let a = analyze(&g, 8).unwrap();
        for (i, c) in a.coeffs().iter().enumerate() {
            let want = if i == 3 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_band_limited() {
        for bc in [Neumann, Dirichlet] {
            let m = random_modes(bc, 32, 7);
            let back = analyze(&synthesize(&m, 128).unwrap(), 32).unwrap();
            for (a, b) in m.coeffs().iter().zip(back.coeffs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_on_midpoint_grid() {
        for bc in [Neumann, Dirichlet] {
            let m = random_modes(bc, 20, 3);
            let g = synthesize(&m, 64).unwrap();
            let energy_modes: f64 = m.coeffs().iter().map(|a| a * a).sum();
            let energy_grid: f64 = g.values().iter().map(|v| v * v).sum::<f64>() / 64.0;
            assert!((energy_modes - energy_grid).abs() < 1e-10);
        }
    }

    #[test]
    fn drift_projection_cases() {
        let m = random_modes(Neumann, 16, 11);
        let zero = project_drift(|_| 0.0, &m, 64).unwrap();
        assert!(zero.coeffs().iter().all(|&c| c == 0.0));

        let same = project_drift(|u| u, &m, 64).unwrap();
        for (a, b) in m.coeffs().iter().zip(same.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }

        let mut c = vec![0.0; 17];
        c[0] = 0.8;
        let s = project_drift(f64::sin, &ModeVector::new(Neumann, c).unwrap(), 64).unwrap();
        assert!((s.coeffs()[0] - 0.8f64.sin()).abs() < 1e-12);
        assert!(s.coeffs()[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn drift_projection_reports_non_finite_point() {
        let m = random_modes(Neumann, 4, 1);
        match project_drift(|u| if u > 0.0 { f64::NAN } else { u }, &m, 16) {
            Err(Error::Evaluation { at, .. }) => assert!(at.starts_with("grid point x = 0.")),
            Ok(_) => {
                // All grid values nonpositive; force the failure instead.
                let e = project_drift(|_| f64::INFINITY, &m, 16).unwrap_err();
                assert!(matches!(e, Error::Evaluation { .. }));
            }
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn evaluate_at_agrees_with_grid() {
        let m = random_modes(Dirichlet, 12, 5);
        let g = synthesize(&m, 32).unwrap();
        for (v, x) in g.values().iter().zip(g.points()) {
            assert!((v - m.evaluate_at(x)).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn transforms_are_linear(seed_a in 0u64..1000, seed_b in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            for bc in [Neumann, Dirichlet] {
                let a = random_modes(bc, 15, seed_a);
                let b = random_modes(bc, 15, seed_b);
                let combo: Vec<f64> = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| alpha * x + beta * y).collect();
                let ga = synthesize(&a, 40).unwrap();
                let gb = synthesize(&b, 40).unwrap();
                let gc = synthesize(&ModeVector::new(bc, combo.clone()).unwrap(), 40).unwrap();
                for j in 0..40 {
                    let lin = alpha * ga.values()[j] + beta * gb.values()[j];
                    prop_assert!((gc.values()[j] - lin).abs() < 1e-12);
                }
                let back = analyze(&gc, 15).unwrap();
                for (x, y) in back.coeffs().iter().zip(&combo) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn sup_norm_is_bounded_by_coefficient_sum(seed in 0u64..5000) {
            for bc in [Neumann, Dirichlet] {
                let m = random_modes(bc, 10, seed);
                let g = synthesize(&m, 24).unwrap();
                let first = bc.first_mode();
                let bound: f64 = m.coeffs().iter().enumerate()
                    .map(|(i, a)| a.abs() * if i + first == 0 { 1.0 } else { SQRT_2 })
                    .sum();
                let sup = g.values().iter().fold(0.0f64, |s, v| s.max(v.abs()));
                prop_assert!(sup <= bound);
            }
        }
    }
}
