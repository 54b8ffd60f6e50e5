use crate::corrections::Correction;
use crate::error::{Error, Result};
use crate::model::JumpCoefficient;

use super::StepInputs;

/// Result of one explicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitStep {
    pub value: f64,
    /// `b = Y_n + theta_n h + S_n`, the linear coefficient of the quadratic.
    pub b: f64,
    /// `|Y^2 - bY - a h| / max(Y^2, |b| Y, a h)`.
    pub residual: f64,
}

/// Positive root of `Y^2 - b Y - c = 0` for `c > 0`.
///
/// Uses `2c / (sqrt(b^2 + 4c) - b)` when `b < 0` so that large negative
/// `b` does not cancel.
#[inline]
pub fn positive_root(b: f64, c: f64) -> f64 {
    let disc = b.hypot(2.0 * c.sqrt());
    if b >= 0.0 {
        0.5 * (b + disc)
    } else {
        2.0 * c / (disc - b)
    }
}

/// Relative residual of the defining quadratic at `y`.
#[inline]
pub fn quadratic_residual(y: f64, b: f64, c: f64) -> f64 {
    let scale = (y * y).max(b.abs() * y).max(c);
    (y * y - b * y - c).abs() / scale
}

/// One step of the semi-implicit scheme: only `alpha_m1 / Y_{n+1}` is
/// implicit, so `Y_{n+1}` is the positive root of
/// `Y^2 - (Y_n + theta_n h + S_n) Y - alpha_m1 h = 0` with
/// `theta_n = -alpha0 + alpha1 Y_n + f_h(Y_n)` and
/// `S_n = g_h(Y_n) dW + nu(Y_n) dN`.
pub fn explicit_step(s: &StepInputs, c: &Correction, j: &JumpCoefficient) -> Result<ExplicitStep> {
    let p = c.params();
    let y = s.y_prev;
    let (fh, gh) = c.eval(y);
    let theta = -p.alpha0 + p.alpha1 * y + fh;
    let noise = gh * s.dw + j.nu(y) * s.dn as f64;
    let b = y + theta * s.h + noise;
    let ch = p.alpha_m1 * s.h;
    let value = positive_root(b, ch);
    if !value.is_finite() || !b.is_finite() {
        return Err(Error::NumericOverflow {
            step: 0,
            detail: format!("explicit step from Y_n = {y:e} produced b = {b:e}, Y = {value:e}"),
        });
    }
    Ok(ExplicitStep {
        value,
        b,
        residual: quadratic_residual(value, b, ch),
    })
}
