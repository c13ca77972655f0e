//! Composite Gauss–Legendre quadrature on user-supplied breakpoints.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

/// Nodes per panel used by [`composite`].
pub const PANEL_ORDER: usize = 20;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).unwrap()))
}

/// Integrates `f` over `[a, b]` with a single Gauss–Legendre panel of
/// [`PANEL_ORDER`] nodes.
pub fn panel<F: FnMut(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    if b == a {
        return 0.0;
    }
    rule().integrate(a, b, f)
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, one panel per interval,
/// each interval split into `subdivisions` equal pieces.
///
/// Breakpoints are sorted and deduplicated first, so callers may pass
/// clipped refinement points that coincide with the interval ends.
pub fn composite<F: FnMut(f64) -> f64>(breaks: &[f64], subdivisions: usize, mut f: F) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|v| v.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let subdivisions = subdivisions.max(1);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let h = (w[1] - w[0]) / subdivisions as f64;
        for s in 0..subdivisions {
            let a = w[0] + s as f64 * h;
            total += panel(a, a + h, &mut f);
        }
    }
    total
}

/// Breakpoints on `[0, 1]` graded geometrically around `centre` with
/// innermost width `scale`, plus the endpoints.
pub fn graded_breaks(centre: f64, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0, 1.0, centre.clamp(0.0, 1.0)];
    let mut w = scale;
    while w < 2.0 {
        for p in [centre - w, centre + w] {
            if p > 0.0 && p < 1.0 {
                out.push(p);
            }
        }
        w *= 2.0;
    }
    out
}

/// Breakpoints `0, end·2^{-60}, …, end/2, end` for integrands that vary on
/// many scales near zero.
pub fn geometric_breaks(end: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend((0..=60).rev().map(|j| end * 0.5f64.powi(j)));
    out
}
