//! Ait-Sahalia short-rate model with Poisson jumps.
//!
//! ```text
//! dX = (a_{-1}/X - a_0 + a_1 X - a_2 X^r) dt + sigma X^rho dW + nu(X-) dN
//! ```
//!
//! The state lives on the positive half-line. `f(x) = -a_2 x^r` and
//! `g(x) = sigma x^rho` are the superlinear parts that the correction
//! functions in [`crate::corrections`] modify.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative tolerance used to decide that `r + 1 == 2 rho`.
const CRITICAL_TOL: f64 = 1e-12;

/// Power of a non-negative base, `exp(p ln x)` with `0^p = 0`.
#[inline]
pub(crate) fn pow_pos(x: f64, p: f64) -> f64 {
    x.powf(p)
}

fn pow_signed(op: &'static str, x: f64, p: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(pow_pos(x, p))
    } else if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        Ok(x.powi(p as i32))
    } else {
        Err(Error::Domain { op, x })
    }
}

/// Model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Coefficient of the `x^{-1}` drift term.
    pub alpha_m1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Diffusion scale.
    pub sigma: f64,
    /// Drift power, `r > 1`.
    pub r: f64,
    /// Diffusion power, `rho > 1`.
    pub rho: f64,
    /// Poisson jump intensity.
    pub lambda: f64,
    /// Initial state.
    pub x0: f64,
}

/// Jump intensity used when a configuration does not state one.
pub const DEFAULT_LAMBDA: f64 = 1.0;

impl ModelParams {
    /// Non-critical parameter set (`r = 5`, `rho = 2`).
    pub fn example1() -> Self {
        ModelParams {
            alpha_m1: 1.5,
            alpha0: 2.0,
            alpha1: 1.0,
            alpha2: 3.0,
            sigma: 1.0,
            r: 5.0,
            rho: 2.0,
            lambda: DEFAULT_LAMBDA,
            x0: 1.0,
        }
    }

    /// Critical parameter set (`r = 3`, `rho = 2`).
    pub fn example2() -> Self {
        ModelParams {
            r: 3.0,
            ..Self::example1()
        }
    }

    /// Checks every positivity and power constraint.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_m1", self.alpha_m1),
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("sigma", self.sigma),
            ("lambda", self.lambda),
            ("x0", self.x0),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.r.is_finite() && self.r > 1.0) {
            return Err(Error::invalid("r", format!("must be > 1, got {}", self.r)));
        }
        if !(self.rho.is_finite() && self.rho > 1.0) {
            return Err(Error::invalid("rho", format!("must be > 1, got {}", self.rho)));
        }
        if self.r + 1.0 < 2.0 * self.rho && !self.is_critical() {
            return Err(Error::invalid(
                "rho",
                format!("need r + 1 >= 2 rho, got r = {}, rho = {}", self.r, self.rho),
            ));
        }
        Ok(())
    }

    fn is_critical(&self) -> bool {
        let lhs = self.r + 1.0;
        let rhs = 2.0 * self.rho;
        (lhs - rhs).abs() <= CRITICAL_TOL * lhs.abs().max(rhs.abs())
    }

    /// `f(x) = -alpha2 x^r`.
    pub fn f(&self, x: f64) -> Result<f64> {
        Ok(-self.alpha2 * pow_signed("f", x, self.r)?)
    }

    /// `g(x) = sigma x^rho`.
    pub fn g(&self, x: f64) -> Result<f64> {
        Ok(self.sigma * pow_signed("g", x, self.rho)?)
    }

    #[inline]
    pub(crate) fn f_pos(&self, x: f64) -> f64 {
        -self.alpha2 * pow_pos(x, self.r)
    }

    #[inline]
    pub(crate) fn g_pos(&self, x: f64) -> f64 {
        self.sigma * pow_pos(x, self.rho)
    }

    /// Full drift `alpha_m1/x - alpha0 + alpha1 x - alpha2 x^r`.
    pub fn drift_full(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain { op: "drift_full", x });
        }
        Ok(self.alpha_m1 / x - self.alpha0 + self.alpha1 * x - self.alpha2 * pow_pos(x, self.r))
    }

    /// Short stable description used for hashing and run manifests.
    pub fn canonical_string(&self) -> String {
        format!(
            "alpha_m1={:?};alpha0={:?};alpha1={:?};alpha2={:?};sigma={:?};r={:?};rho={:?};lambda={:?};x0={:?}",
            self.alpha_m1,
            self.alpha0,
            self.alpha1,
            self.alpha2,
            self.sigma,
            self.r,
            self.rho,
            self.lambda,
            self.x0
        )
    }
}

/// Parameter regime with respect to the order-1/2 convergence result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeTag {
    /// `r + 1 > 2 rho`.
    NonCritical,
    /// `r + 1 = 2 rho` and `alpha2 / sigma^2 >= 2r - 1/2`.
    CriticalSupported,
    /// `r + 1 = 2 rho` but `alpha2 / sigma^2 < 2r - 1/2`. Simulation still runs.
    CriticalUnsupported,
    Invalid,
}

impl RegimeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeTag::NonCritical => "NonCritical",
            RegimeTag::CriticalSupported => "CriticalSupported",
            RegimeTag::CriticalUnsupported => "CriticalUnsupported",
            RegimeTag::Invalid => "Invalid",
        }
    }
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub tag: RegimeTag,
    pub details: String,
}

impl Regime {
    pub fn is_warning(&self) -> bool {
        self.tag == RegimeTag::CriticalUnsupported
    }
}

pub fn classify_regime(p: &ModelParams) -> Regime {
    if let Err(e) = p.validate() {
        return Regime {
            tag: RegimeTag::Invalid,
            details: e.to_string(),
        };
    }
    if !p.is_critical() {
        return Regime {
            tag: RegimeTag::NonCritical,
            details: format!("r + 1 = {} > 2 rho = {}", p.r + 1.0, 2.0 * p.rho),
        };
    }
    let ratio = p.alpha2 / (p.sigma * p.sigma);
    let bound = 2.0 * p.r - 0.5;
    if ratio >= bound {
        Regime {
            tag: RegimeTag::CriticalSupported,
            details: format!("critical: alpha2/sigma^2 = {ratio} >= 2r - 1/2 = {bound}"),
        }
    } else {
        Regime {
            tag: RegimeTag::CriticalUnsupported,
            details: format!(
                "critical: alpha2/sigma^2 = {ratio} < 2r - 1/2 = {bound}; order-1/2 rate is not guaranteed"
            ),
        }
    }
}

/// Jump amplitude function `nu`.
#[derive(Clone)]
pub enum JumpKind {
    /// `nu(x) = c x`.
    LinearScale(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for JumpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpKind::LinearScale(c) => f.debug_tuple("LinearScale").field(c).finish(),
            JumpKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Jump coefficient together with its Lipschitz constant `M` and lower
/// bound constant `m` (`x + nu(x) > m min{1, x}`).
#[derive(Debug, Clone)]
pub struct JumpCoefficient {
    pub kind: JumpKind,
    pub lipschitz_m: f64,
    pub lower_m: f64,
}

/// Number of log-spaced sample points used by [`JumpCoefficient::validate`].
pub const JUMP_VALIDATION_POINTS: usize = 10_000;

impl JumpCoefficient {
    /// `nu(x) = c x`, requires `c > -1` so that jumps keep the state positive.
    pub fn linear(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > -1.0) {
            return Err(Error::invalid("jump.scale", format!("need c > -1, got {c}")));
        }
        Ok(JumpCoefficient {
            kind: JumpKind::LinearScale(c),
            lipschitz_m: c.abs(),
            lower_m: 0.5 * (1.0 + c),
        })
    }

    /// The jump coefficient `nu(x) = 0.5 x`.
    pub fn half() -> Self {
        Self::linear(0.5).expect("0.5 > -1")
    }

    pub fn custom(
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz_m: f64,
        lower_m: f64,
    ) -> Result<Self> {
        let j = JumpCoefficient {
            kind: JumpKind::Custom(Arc::new(func)),
            lipschitz_m,
            lower_m,
        };
        j.validate()?;
        Ok(j)
    }

    #[inline]
    pub fn nu(&self, x: f64) -> f64 {
        match &self.kind {
            JumpKind::LinearScale(c) => c * x,
            JumpKind::Custom(func) => func(x),
        }
    }

    /// Samples the Lipschitz and lower-bound conditions on a log grid over
    /// `[1e-3, 1e3]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz_m.is_finite() && self.lipschitz_m >= 0.0) {
            return Err(Error::invalid("jump.lipschitz_m", "must be finite and >= 0"));
        }
        if !(self.lower_m.is_finite() && self.lower_m > 0.0) {
            return Err(Error::invalid("jump.lower_m", "must be finite and > 0"));
        }
        let grid = log_grid(1e-3, 1e3, JUMP_VALIDATION_POINTS);
        let values: Vec<f64> = grid.iter().map(|&x| self.nu(x)).collect();
        for (&x, &v) in grid.iter().zip(&values) {
            if !(x + v > self.lower_m * x.min(1.0)) {
                return Err(Error::invalid(
                    "jump",
                    format!("x + nu(x) > m min(1, x) fails at x = {x}"),
                ));
            }
        }
        // adjacent pairs plus every point against both endpoints
        let n = grid.len();
        let check = |i: usize, k: usize| -> Result<()> {
            let dx = (grid[i] - grid[k]).abs();
            let dv = (values[i] - values[k]).abs();
            if dv > self.lipschitz_m * dx * (1.0 + 1e-12) + f64::EPSILON * dv {
                return Err(Error::invalid(
                    "jump",
                    format!("Lipschitz bound M = {} fails at ({}, {})", self.lipschitz_m, grid[i], grid[k]),
                ));
            }
            Ok(())
        };
        for i in 1..n {
            check(i - 1, i)?;
            check(0, i)?;
            check(i, n - 1)?;
        }
        Ok(())
    }
}

/// `n` log-spaced points spanning `[lo, hi]` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}
