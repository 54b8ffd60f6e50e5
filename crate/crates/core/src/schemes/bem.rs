//! Drift-implicit (backward) Euler-Maruyama step.
//!
//! Solves, for `y > 0`,
//!
//! ```text
//! G(y) = y - Y_n - (alpha_m1/y - alpha0 + alpha1 y - alpha2 y^r) h
//!          - sigma Y_n^rho dW - nu(Y_n) dN = 0
//! ```
//!
//! with Newton's method, falling back to bisection on a maintained bracket
//! whenever a Newton iterate leaves the bracket or fails to reduce `|G|`.

use crate::error::{Error, Result};
use crate::model::{pow_pos, JumpCoefficient, ModelParams};

use super::StepInputs;

pub const MAX_ITERATIONS: usize = 200;
pub const BRACKET_LO: f64 = 1e-30;
pub const BRACKET_HI: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BemStep {
    pub value: f64,
    /// `|G(value)|`.
    pub residual: f64,
    pub iterations: usize,
}

/// The implicit residual `G` for one step.
#[derive(Debug, Clone, Copy)]
pub struct ImplicitResidual<'a> {
    p: &'a ModelParams,
    h: f64,
    y_prev: f64,
    explicit_part: f64,
}

impl<'a> ImplicitResidual<'a> {
    pub fn new(s: &StepInputs, p: &'a ModelParams, j: &JumpCoefficient) -> Self {
        let y = s.y_prev;
        ImplicitResidual {
            p,
            h: s.h,
            y_prev: y,
            explicit_part: p.g_pos(y) * s.dw + j.nu(y) * s.dn as f64,
        }
    }

    #[inline]
    fn eval_with_power(&self, y: f64) -> (f64, f64) {
        let p = self.p;
        let yr = pow_pos(y, p.r);
        let drift = p.alpha_m1 / y - p.alpha0 + p.alpha1 * y - p.alpha2 * yr;
        (y - self.y_prev - drift * self.h - self.explicit_part, yr)
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        self.eval_with_power(y).0
    }

    #[inline]
    fn derivative(&self, y: f64, yr: f64) -> f64 {
        let p = self.p;
        1.0 + (p.alpha_m1 / (y * y) - p.alpha1 + p.alpha2 * p.r * yr / y) * self.h
    }
}

struct Bracket {
    lo: f64,
    hi: f64,
    lo_checked: bool,
    hi_checked: bool,
}

impl Bracket {
    fn update(&mut self, y: f64, g: f64) {
        if g < 0.0 {
            if y > self.lo {
                self.lo = y;
            }
            self.lo_checked = true;
        } else {
            if y < self.hi {
                self.hi = y;
            }
            self.hi_checked = true;
        }
    }

    fn ensure(&mut self, g: &ImplicitResidual<'_>) -> Result<()> {
        let fail = || Error::BracketFailure {
            lo: BRACKET_LO,
            hi: BRACKET_HI,
        };
        if !self.lo_checked {
            if !(g.eval(self.lo) < 0.0) {
                return Err(fail());
            }
            self.lo_checked = true;
        }
        if !self.hi_checked {
            // +inf from an overflowing power still has the right sign
            if !(g.eval(self.hi) >= 0.0) {
                return Err(fail());
            }
            self.hi_checked = true;
        }
        Ok(())
    }

    fn midpoint(&self) -> f64 {
        if self.hi > 4.0 * self.lo {
            self.lo.sqrt() * self.hi.sqrt()
        } else {
            0.5 * (self.lo + self.hi)
        }
    }

    fn collapsed(&self) -> bool {
        self.lo_checked && self.hi_checked && self.hi - self.lo <= 4.0 * f64::EPSILON * self.hi
    }
}

/// Absolute tolerance on `|G|` for a step starting at `y_prev`.
pub fn tolerance(y_prev: f64) -> f64 {
    1e-12 * (1.0 + y_prev.abs())
}

pub fn bem_step(s: &StepInputs, p: &ModelParams, j: &JumpCoefficient) -> Result<BemStep> {
    let g = ImplicitResidual::new(s, p, j);
    let tol = tolerance(s.y_prev);
    let mut bracket = Bracket {
        lo: BRACKET_LO,
        hi: BRACKET_HI,
        lo_checked: false,
        hi_checked: false,
    };
    let nan = |y: f64| Error::NumericOverflow {
        step: 0,
        detail: format!("implicit residual is NaN at y = {y:e} (Y_n = {:e})", s.y_prev),
    };

    let mut y = s.y_prev.clamp(BRACKET_LO, BRACKET_HI);
    let (mut gy, mut yr) = g.eval_with_power(y);
    if gy.is_nan() || !g.explicit_part.is_finite() {
        return Err(nan(y));
    }
    bracket.update(y, gy);

    for it in 0..MAX_ITERATIONS {
        if gy.abs() <= tol {
            return Ok(BemStep {
                value: y,
                residual: gy.abs(),
                iterations: it,
            });
        }
        let mut cand = y - gy / g.derivative(y, yr);
        let newton = cand.is_finite() && cand > bracket.lo && cand < bracket.hi;
        if !newton {
            bracket.ensure(&g)?;
            cand = bracket.midpoint();
        }
        let (gc, cr) = g.eval_with_power(cand);
        if gc.is_nan() {
            return Err(nan(cand));
        }
        bracket.update(cand, gc);
        if newton && gc.abs() >= gy.abs() {
            bracket.ensure(&g)?;
            let m = bracket.midpoint();
            let (gm, mr) = g.eval_with_power(m);
            if gm.is_nan() {
                return Err(nan(m));
            }
            bracket.update(m, gm);
            (y, gy, yr) = (m, gm, mr);
        } else {
            (y, gy, yr) = (cand, gc, cr);
        }
        if bracket.collapsed() {
            // machine precision reached; keep the better endpoint
            let (glo, ghi) = (g.eval(bracket.lo).abs(), g.eval(bracket.hi).abs());
            let (best, gbest) = if glo <= ghi {
                (bracket.lo, glo)
            } else {
                (bracket.hi, ghi)
            };
            let (value, residual) = if gy.abs() <= gbest { (y, gy.abs()) } else { (best, gbest) };
            return Ok(BemStep {
                value,
                residual,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: gy.abs(),
    })
}
