//! Quadrature references for the special functions.
//!
//! Nothing here calls into [`crate::specfun`]: normalising constants are
//! themselves integrated numerically, so agreement with the continued
//! fraction code is a genuine cross-check.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`, with Richardson correction on accepted panels.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
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
    let floor = 4.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) || m <= a || m >= b {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson on `panels` equal pieces, so that narrow features are
/// never skipped by the first coarse estimate.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == panels { b } else { lo + h };
            adaptive_simpson(f, lo, hi, tol / panels as f64)
        })
        .sum()
}

const TOL: f64 = 1e-15;

/// `c ln t` with the convention `0 ln 0 = 0`.
fn xlny(c: f64, t: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * t.ln()
    }
}
const PANELS: usize = 16;

/// `I_x(a, b)` by quadrature of the beta integrand.
///
/// The integral is split at 1/2. A factor `t^{a-1}` with `a < 1` is removed
/// near 0 by `u = t^a`, and `(1-t)^{b-1}` with `b < 1` near 1 by
/// `v = (1-t)^b`; both leave bounded integrands.
pub fn inc_beta_quadrature(x: f64, a: f64, b: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x) && a > 0.0 && b > 0.0);
    let h = 0.5;
    let mode = if a > 1.0 && b > 1.0 {
        (a - 1.0) / (a + b - 2.0)
    } else {
        0.5
    };
    let mode = mode.clamp(0.05, 0.95);
    let log_scale = xlny(a - 1.0, mode) + xlny(b - 1.0, 1.0 - mode);
    let dens = |t: f64| (xlny(a - 1.0, t) + xlny(b - 1.0, 1.0 - t) - log_scale).exp();

    // ∫_0^s, s <= 1/2
    let left = |s: f64| -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if a < 1.0 {
            let g = |u: f64| (xlny(b - 1.0, 1.0 - u.powf(1.0 / a)) - log_scale).exp() / a;
            integrate(&g, 0.0, s.powf(a), TOL, PANELS)
        } else {
            integrate(&dens, 0.0, s, TOL, PANELS)
        }
    };
    // ∫_s^1, s >= 1/2
    let right = |s: f64| -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        if b < 1.0 {
            let g = |v: f64| (xlny(a - 1.0, 1.0 - v.powf(1.0 / b)) - log_scale).exp() / b;
            integrate(&g, 0.0, (1.0 - s).powf(b), TOL, PANELS)
        } else {
            integrate(&dens, s, 1.0, TOL, PANELS)
        }
    };
    let lo = left(h);
    let hi = right(h);
    let total = lo + hi;
    if x <= h {
        left(x) / total
    } else {
        1.0 - right(x) / total
    }
}

/// `P(a, x)` by quadrature of the gamma integrand; `Γ(a)` is integrated too.
pub fn inc_gamma_quadrature(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    let peak = (a - 1.0).max(1.0);
    let log_scale = if a > 1.0 { (a - 1.0) * peak.ln() - peak } else { 0.0 };
    let dens = |t: f64| (xlny(a - 1.0, t) - t - log_scale).exp();
    let head = |s: f64| -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if a < 1.0 {
            let g = |u: f64| (-u.powf(1.0 / a) - log_scale).exp() / a;
            integrate(&g, 0.0, s.powf(a), TOL, PANELS)
        } else {
            integrate(&dens, 0.0, s, TOL, PANELS)
        }
    };
    let upper = a + 40.0 * a.sqrt() + 40.0;
    let tail = |s: f64| -> f64 {
        if s >= upper {
            0.0
        } else {
            integrate(&dens, s, upper, TOL, 4 * PANELS)
        }
    };
    let split = 1.0;
    let total = head(split) + tail(split);
    if x <= split {
        head(x) / total
    } else {
        1.0 - tail(x) / total
    }
}
