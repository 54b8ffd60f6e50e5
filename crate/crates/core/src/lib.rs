//! Monte Carlo simulation of the Ait-Sahalia interest-rate model with
//! Poisson jumps.
//!
//! The central scheme treats only the `alpha_m1 / x` drift term implicitly,
//! so each step is the positive root of a quadratic: explicit in cost and
//! positive for every step size. The superlinear coefficients enter through
//! a tamed or projected correction ([`corrections`]). A drift-implicit
//! backward Euler scheme serves as the reference solver, and
//! [`experiment`] measures mean-square errors and fits convergence rates.
//!
//! ```
//! use aitsahalia::{ModelParams, JumpCoefficient, NoisePath, SchemeTag, Integrator};
//!
//! let p = ModelParams::example1();
//! let noise = NoisePath::generate(1, 0, 1024, 1.0 / 1024.0, p.lambda).unwrap();
//! let tem = Integrator::new(SchemeTag::Tem, 1.0 / 1024.0, &p, &JumpCoefficient::half(), None).unwrap();
//! let path = tem.simulate(&noise, p.x0).unwrap();
//! assert!(path.all_positive());
//! ```

pub mod cli;
pub mod corrections;
pub mod error;
pub mod experiment;
pub mod model;
pub mod noise;
pub mod schemes;

pub use corrections::{check_assumption, AssumptionReport, CheckOptions, Correction, CorrectionKind, SampleGrid};
pub use error::{Error, Result};
pub use experiment::{
    benchmark, fit_rate, mean_square_error, positivity_stress, run_convergence, ConvergenceReport,
    ExperimentConfig, RateFit,
};
pub use model::{classify_regime, JumpCoefficient, ModelParams, Regime, RegimeTag};
pub use noise::NoisePath;
pub use schemes::{bem_step, explicit_step, simulate_path, Integrator, SchemeTag, StepInputs, Trajectory};
