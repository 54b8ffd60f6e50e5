//! Independent reference computations for the integration and acceptance
//! tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use aitsahalia::ModelParams;

/// Positive root of `y^2 - b y - c` (c > 0) by plain bisection.
pub fn quadratic_root_bisect(b: f64, c: f64) -> f64 {
    let q = |y: f64| y * (y - b) - c;
    let (mut lo, mut hi) = (0.0_f64, b.abs() + c.sqrt() + 1.0);
    assert!(q(hi) > 0.0);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return if q(lo).abs() <= q(hi).abs() { lo } else { hi };
        }
        if q(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// The backward Euler residual, written out from the model drift.
pub fn implicit_residual(p: &ModelParams, y_prev: f64, h: f64, dw: f64, dn: u32, jump_scale: f64, y: f64) -> f64 {
    let drift = p.alpha_m1 / y - p.alpha0 + p.alpha1 * y - p.alpha2 * y.powf(p.r);
    let shock = p.sigma * y_prev.powf(p.rho) * dw + jump_scale * y_prev * dn as f64;
    y - y_prev - drift * h - shock
}

/// Root of the backward Euler residual by bisection: geometric while the
/// bracket spans more than a factor 4, arithmetic afterwards.
pub fn implicit_root_bisect(p: &ModelParams, y_prev: f64, h: f64, dw: f64, dn: u32, jump_scale: f64) -> f64 {
    let g = |y: f64| implicit_residual(p, y_prev, h, dw, dn, jump_scale, y);
    let (mut lo, mut hi) = (1e-30_f64, 1e30_f64);
    assert!(g(lo) < 0.0 && g(hi) > 0.0);
    loop {
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            return if g(lo).abs() <= g(hi).abs() { lo } else { hi };
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Tamed coefficients `(f_h, g_h)` from their definition.
pub fn tamed(p: &ModelParams, h: f64, x: f64) -> (f64, f64) {
    let d = 1.0 + h.sqrt() * x.abs().powf(p.r);
    (-p.alpha2 * x.abs().powf(p.r) / d, p.sigma * x.abs().powf(p.rho) / d)
}

/// Projected coefficients `(f_h, g_h)` from their definition.
pub fn projected(p: &ModelParams, h: f64, kappa: f64, x: f64) -> (f64, f64) {
    let t = h.powf(-kappa);
    let px = if x.abs() > t { t * x.signum() } else { x };
    (-p.alpha2 * px.abs().powf(p.r), p.sigma * px.abs().powf(p.rho))
}

/// One explicit step from first principles, root by bisection.
pub fn explicit_step_oracle(p: &ModelParams, fg: (f64, f64), y: f64, h: f64, dw: f64, dn: u32, jump_scale: f64) -> f64 {
    let b = y + (-p.alpha0 + p.alpha1 * y + fg.0) * h + fg.1 * dw + jump_scale * y * dn as f64;
    quadratic_root_bisect(b, p.alpha_m1 * h)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Ordinary least squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
