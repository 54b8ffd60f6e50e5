//! Single-step integrators and full-path simulation.

mod bem;
mod explicit;

use std::fmt;
use std::str::FromStr;

pub use bem::{
    bem_step, tolerance as bem_tolerance, BemStep, ImplicitResidual, BRACKET_HI, BRACKET_LO,
    MAX_ITERATIONS as BEM_MAX_ITERATIONS,
};
pub use explicit::{explicit_step, positive_root, quadratic_residual, ExplicitStep};

use crate::corrections::{default_kappa, Correction, CorrectionKind};
use crate::error::{Error, Result};
use crate::model::{JumpCoefficient, ModelParams};
use crate::noise::NoisePath;

/// Inputs of one step: state `Y_n`, step `h`, and the increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    pub y_prev: f64,
    pub h: f64,
    pub dw: f64,
    pub dn: u32,
}

impl StepInputs {
    pub fn new(y_prev: f64, h: f64, dw: f64, dn: u32) -> Result<Self> {
        if !(y_prev > 0.0 && y_prev.is_finite()) {
            return Err(Error::invalid("y_prev", format!("must be finite and > 0, got {y_prev}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("h", format!("must be finite and > 0, got {h}")));
        }
        Ok(StepInputs { y_prev, h, dw, dn })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeTag {
    /// Explicit scheme with tamed coefficients.
    Tem,
    /// Explicit scheme with projected coefficients.
    Pem,
    /// Drift-implicit backward Euler-Maruyama.
    Bem,
    /// Explicit scheme with unmodified `f`, `g`.
    ExplicitIdentity,
    /// Plain Euler-Maruyama. Demonstration only: it is not positivity preserving.
    PlainEm,
}

impl SchemeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Tem => "TEM",
            SchemeTag::Pem => "PEM",
            SchemeTag::Bem => "BEM",
            SchemeTag::ExplicitIdentity => "EXPLICIT-IDENTITY",
            SchemeTag::PlainEm => "PLAIN-EM",
        }
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, SchemeTag::Tem | SchemeTag::Pem | SchemeTag::ExplicitIdentity)
    }

    pub fn is_demonstration(self) -> bool {
        self == SchemeTag::PlainEm
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tem" => Ok(SchemeTag::Tem),
            "pem" => Ok(SchemeTag::Pem),
            "bem" => Ok(SchemeTag::Bem),
            "explicit-identity" | "identity" => Ok(SchemeTag::ExplicitIdentity),
            "plain-em" | "em" => Ok(SchemeTag::PlainEm),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Method {
    Explicit(Correction),
    Backward,
    PlainEuler,
}

/// A scheme bound to a step size, model, and jump coefficient.
#[derive(Debug, Clone)]
pub struct Integrator {
    method: Method,
    tag: SchemeTag,
    h: f64,
    params: ModelParams,
    jump: JumpCoefficient,
}

impl Integrator {
    /// Explicit scheme driven by `correction`. The tag follows the correction kind.
    pub fn explicit(correction: Correction, jump: &JumpCoefficient) -> Self {
        let tag = match correction.kind() {
            CorrectionKind::Identity => SchemeTag::ExplicitIdentity,
            CorrectionKind::Tamed => SchemeTag::Tem,
            CorrectionKind::Projected { .. } => SchemeTag::Pem,
        };
        Integrator {
            method: Method::Explicit(correction),
            tag,
            h: correction.h(),
            params: *correction.params(),
            jump: jump.clone(),
        }
    }

    /// Builds the integrator for `tag`. `kappa` defaults to `1/(2r - 2)` for PEM.
    pub fn new(
        tag: SchemeTag,
        h: f64,
        params: &ModelParams,
        jump: &JumpCoefficient,
        kappa: Option<f64>,
    ) -> Result<Self> {
        let plain = |method| -> Result<Self> {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::invalid("h", format!("step size must be > 0, got {h}")));
            }
            Ok(Integrator {
                method,
                tag,
                h,
                params: *params,
                jump: jump.clone(),
            })
        };
        match tag {
            SchemeTag::Tem => Ok(Self::explicit(Correction::tamed(h, params)?, jump)),
            SchemeTag::Pem => {
                let kappa = kappa.unwrap_or_else(|| default_kappa(params.r));
                Ok(Self::explicit(Correction::projected(h, kappa, params)?, jump))
            }
            SchemeTag::ExplicitIdentity => Ok(Self::explicit(Correction::identity(h, params)?, jump)),
            SchemeTag::Bem => {
                if h * params.alpha1 >= 1.0 {
                    log::warn!(
                        "BEM with h = {h} >= 1/alpha1 = {}: the implicit equation may have several roots",
                        1.0 / params.alpha1
                    );
                }
                plain(Method::Backward)
            }
            SchemeTag::PlainEm => plain(Method::PlainEuler),
        }
    }

    pub fn tag(&self) -> SchemeTag {
        self.tag
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// One step; returns the new state and the step's residual diagnostic.
    #[inline]
    pub fn step(&self, s: &StepInputs) -> Result<(f64, f64)> {
        match &self.method {
            Method::Explicit(c) => explicit_step(s, c, &self.jump).map(|o| (o.value, o.residual)),
            Method::Backward => bem_step(s, &self.params, &self.jump).map(|o| (o.value, o.residual)),
            Method::PlainEuler => {
                let p = &self.params;
                let y = s.y_prev;
                let next = y
                    + p.drift_full(y)? * s.h
                    + p.g_pos(y) * s.dw
                    + self.jump.nu(y) * s.dn as f64;
                if next.is_nan() || next.is_infinite() {
                    return Err(Error::NumericOverflow {
                        step: 0,
                        detail: format!("plain Euler step from {y:e} produced {next:e}"),
                    });
                }
                Ok((next, 0.0))
            }
        }
    }

    /// Simulates from `x0` into `out` (cleared first), returning the largest
    /// step residual. Plain Euler stops at the first non-positive iterate,
    /// which is kept as the last value.
    pub fn simulate_into(&self, noise: &NoisePath, x0: f64, out: &mut Vec<f64>) -> Result<f64> {
        if (noise.h - self.h).abs() > 1e-12 * self.h {
            return Err(Error::invalid(
                "noise",
                format!("grid step {} does not match integrator step {}", noise.h, self.h),
            ));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::invalid("x0", format!("must be finite and > 0, got {x0}")));
        }
        out.clear();
        out.reserve(noise.len() + 1);
        out.push(x0);
        let mut y = x0;
        let mut max_residual = 0.0_f64;
        for (n, (&dw, &dn)) in noise.dw.iter().zip(&noise.dn).enumerate() {
            let s = StepInputs {
                y_prev: y,
                h: self.h,
                dw,
                dn,
            };
            let (next, residual) = self.step(&s).map_err(|e| match e {
                Error::NumericOverflow { detail, .. } => Error::NumericOverflow { step: n, detail },
                other => Error::Step {
                    step: n,
                    source: Box::new(other),
                },
            })?;
            out.push(next);
            max_residual = max_residual.max(residual);
            if !(next > 0.0) {
                if self.tag.is_demonstration() {
                    break;
                }
                return Err(Error::NumericOverflow {
                    step: n,
                    detail: format!("{} produced non-positive iterate {next:e}", self.tag),
                });
            }
            y = next;
        }
        Ok(max_residual)
    }

    pub fn simulate(&self, noise: &NoisePath, x0: f64) -> Result<Trajectory> {
        let mut values = Vec::new();
        let max_residual = self.simulate_into(noise, x0, &mut values)?;
        Ok(Trajectory {
            times: (0..values.len()).map(|n| n as f64 * self.h).collect(),
            values,
            max_residual,
            scheme: self.tag,
            h: self.h,
        })
    }
}

/// Scheme iterates on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest relative quadratic residual (explicit schemes) or `|G|` (BEM).
    pub max_residual: f64,
    pub scheme: SchemeTag,
    pub h: f64,
}

impl Trajectory {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("trajectory holds x0")
    }

    pub fn all_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// CSV with a comment header carrying scheme, parameter hash and seed.
    pub fn to_csv(&self, params_hash: &str, seed: u64, path_index: u64) -> String {
        let mut s = format!(
            "# scheme={} params_hash={} seed={} path={} h={:?}\nt,y\n",
            self.scheme, params_hash, seed, path_index, self.h
        );
        for (t, y) in self.times.iter().zip(&self.values) {
            s.push_str(&format!("{t:?},{y:?}\n"));
        }
        s
    }
}

/// Convenience wrapper: builds the integrator for `correction` (or BEM /
/// plain Euler when `tag` says so) and simulates one path.
pub fn simulate_path(
    tag: SchemeTag,
    noise: &NoisePath,
    correction: Option<&Correction>,
    params: &ModelParams,
    jump: &JumpCoefficient,
) -> Result<Trajectory> {
    let integrator = match (tag, correction) {
        (SchemeTag::Bem | SchemeTag::PlainEm, _) => Integrator::new(tag, noise.h, params, jump, None)?,
        (_, Some(c)) => {
            let i = Integrator::explicit(*c, jump);
            if i.tag() != tag {
                return Err(Error::Config(format!(
                    "correction {} does not belong to scheme {tag}",
                    c.kind().name()
                )));
            }
            i
        }
        (_, None) => Integrator::new(tag, noise.h, params, jump, None)?,
    };
    integrator.simulate(noise, params.x0)
}
