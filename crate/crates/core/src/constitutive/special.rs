//! Error functions and adaptive quadrature on an interval.

use std::f64::consts::PI;

/// Adaptive Simpson integration of `f` over `[a, b]` to relative tolerance
/// `tol` (absolute when the integral is near zero).
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
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
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let scale = (left + right).abs().max(f64::MIN_POSITIVE);
    if depth == 0 || delta.abs() <= 15.0 * tol * scale {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol, depth - 1)
}

const TOL: f64 = 1e-13;

/// Imaginary error function `erfi(x) = (2/√π) ∫₀ˣ e^{t²} dt`.
pub fn erfi(x: f64) -> f64 {
    if x < 0.0 {
        return -erfi(-x);
    }
    2.0 / PI.sqrt() * integrate(&|t: f64| (t * t).exp(), 0.0, x, TOL)
}

/// Error function `erf(x) = (2/√π) ∫₀ˣ e^{−t²} dt`.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x > 6.0 {
        // The tail beyond 6 is below 1e-17.
        return 1.0;
    }
    2.0 / PI.sqrt() * integrate(&|t: f64| (-t * t).exp(), 0.0, x, TOL)
}
