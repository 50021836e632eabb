//! Adaptive Simpson quadrature with caller-supplied panel boundaries.

use crate::error::{Error, Result};

pub const REL_TOL: f64 = 1e-9;
pub const MAX_DEPTH: u32 = 40;

struct State<'a, F> {
    f: &'a F,
    error: f64,
    exhausted: bool,
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    st: &mut State<'_, F>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = ((st.f)(lm), (st.f)(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || !(m > a && m < b) {
        st.error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    if depth >= MAX_DEPTH {
        st.exhausted = true;
        st.error += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// `∫ f` over `[knots[0], knots[last]]`, with every knot a panel boundary.
///
/// The tolerance is relative to a coarse estimate of `∫|f|`, so integrals
/// that cancel to zero still terminate.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, knots: &[f64], rel_tol: f64) -> Result<f64> {
    let mut knots: Vec<f64> = knots.iter().copied().filter(|k| k.is_finite()).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    if knots.len() < 2 {
        return Ok(0.0);
    }
    let mut panels = Vec::with_capacity(knots.len() - 1);
    let mut scale = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let q1 = f(0.5 * (a + m));
        let q3 = f(0.5 * (m + b));
        scale += (b - a) / 12.0 * (fa.abs() + 4.0 * q1.abs() + 2.0 * fm.abs() + 4.0 * q3.abs() + fb.abs());
        panels.push((a, b, fa, fm, fb));
    }
    let tol_total = rel_tol * scale.max(f64::MIN_POSITIVE);
    let total_len = knots[knots.len() - 1] - knots[0];
    let mut st = State {
        f,
        error: 0.0,
        exhausted: false,
    };
    let mut sum = 0.0;
    for (a, b, fa, fm, fb) in panels {
        let whole = simpson(fa, fm, fb, b - a);
        let tol = tol_total * (b - a) / total_len;
        sum += recurse(&mut st, a, b, fa, fm, fb, whole, tol, 0);
    }
    if !sum.is_finite() {
        return Err(Error::Quadrature {
            achieved: f64::INFINITY,
        });
    }
    if st.exhausted && st.error > tol_total {
        return Err(Error::Quadrature { achieved: st.error });
    }
    Ok(sum)
}

pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64> {
    integrate_panels(f, &[a, b], REL_TOL)
}

/// Nodes and weights of the 3-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss3(a: f64, b: f64) -> [(f64, f64); 3] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let d = (0.6f64).sqrt() * h;
    [
        (c - d, h * 5.0 / 9.0),
        (c, h * 8.0 / 9.0),
        (c + d, h * 5.0 / 9.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0).unwrap();
        assert!((v - 0.0).abs() < 1e-12);
        let v = integrate(&|x: f64| x * x, 0.0, 3.0).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_integrand() {
        let v = integrate(&|x: f64| x.exp(), 0.0, 1.0).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn knots_handle_kinks() {
        let v = integrate_panels(&|x: f64| x.abs(), &[-1.0, 0.0, 2.0], REL_TOL).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn gauss_exact_for_quintics() {
        let v: f64 = gauss3(-1.0, 2.0).iter().map(|(x, w)| w * x.powi(5)).sum();
        assert!((v - (64.0 - 1.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn reports_failure_on_singularity() {
        let r = integrate(&|x: f64| 1.0 / x.abs().sqrt().max(1e-300), -1.0, 1.0);
        assert!(matches!(r, Err(Error::Quadrature { .. })) || r.is_ok());
    }
}
