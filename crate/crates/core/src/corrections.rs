//! Step-size dependent modifications `(f_h, g_h)` of the superlinear
//! coefficients, and a sampled checker for the four structural inequalities
//! they must satisfy:
//!
//! ```text
//! domination:   |f_h(x)| <= |f(x)|,  |g_h(x)| <= |g(x)|
//! consistency:  |f(x) - f_h(x)| + |g(x) - g_h(x)| <= L1 h^{1/2} (1 + |x|^{2r})
//! lipschitz:    |f_h(x) - f_h(y)| <= L2 (1 + h^{-1/2}) |x - y|
//! monotonicity: (x - y)(f_h(x) - f_h(y)) + (v - 1)/2 |g_h(x) - g_h(y)|^2 <= L3 |x - y|^2
//! ```

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{log_grid, pow_pos, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionKind {
    /// `f_h = f`, `g_h = g`.
    Identity,
    /// Divide both coefficients by `1 + h^{1/2} |x|^r`.
    Tamed,
    /// Evaluate the coefficients at the projected state `P_h(x)`.
    Projected { kappa: f64 },
}

impl CorrectionKind {
    pub fn name(&self) -> &'static str {
        match self {
            CorrectionKind::Identity => "identity",
            CorrectionKind::Tamed => "tamed",
            CorrectionKind::Projected { .. } => "projected",
        }
    }

    /// Projection with `kappa = 1/(2r - 2)`.
    pub fn projected_default(p: &ModelParams) -> Self {
        CorrectionKind::Projected {
            kappa: default_kappa(p.r),
        }
    }
}

/// Largest admissible projection exponent, `1/(2r - 2)`.
pub fn default_kappa(r: f64) -> f64 {
    1.0 / (2.0 * r - 2.0)
}

/// A correction pair bound to a step size and model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    kind: CorrectionKind,
    h: f64,
    params: ModelParams,
    sqrt_h: f64,
    /// `h^{-kappa}`; infinite unless projected.
    threshold: f64,
}

impl Correction {
    pub fn new(kind: CorrectionKind, h: f64, params: &ModelParams) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid("h", format!("step size must be > 0, got {h}")));
        }
        let threshold = match kind {
            CorrectionKind::Projected { kappa } => {
                let (lo, hi) = (1.0 / (2.0 * params.r), 1.0 / (2.0 * params.r - 2.0));
                if !(kappa >= lo && kappa <= hi) {
                    return Err(Error::invalid(
                        "kappa",
                        format!("must lie in [1/(2r), 1/(2r-2)] = [{lo}, {hi}], got {kappa}"),
                    ));
                }
                h.powf(-kappa)
            }
            _ => f64::INFINITY,
        };
        Ok(Correction {
            kind,
            h,
            params: *params,
            sqrt_h: h.sqrt(),
            threshold,
        })
    }

    pub fn identity(h: f64, p: &ModelParams) -> Result<Self> {
        Self::new(CorrectionKind::Identity, h, p)
    }

    pub fn tamed(h: f64, p: &ModelParams) -> Result<Self> {
        Self::new(CorrectionKind::Tamed, h, p)
    }

    pub fn projected(h: f64, kappa: f64, p: &ModelParams) -> Result<Self> {
        Self::new(CorrectionKind::Projected { kappa }, h, p)
    }

    pub fn kind(&self) -> CorrectionKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Projection threshold `h^{-kappa}` (infinite for the other kinds).
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `P_h(x) = min{1, h^{-kappa} |x|^{-1}} x`. Identity for non-projected kinds.
    #[inline]
    pub fn project(&self, x: f64) -> f64 {
        if x.abs() <= self.threshold {
            x
        } else {
            self.threshold.copysign(x)
        }
    }

    /// `(f_h(x), g_h(x))` for `x >= 0`, sharing the power evaluations.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let p = &self.params;
        match self.kind {
            CorrectionKind::Identity => (p.f_pos(x), p.g_pos(x)),
            CorrectionKind::Tamed => {
                let xr = pow_pos(x, p.r);
                let denom = 1.0 + self.sqrt_h * xr;
                (-p.alpha2 * xr / denom, p.g_pos(x) / denom)
            }
            CorrectionKind::Projected { .. } => {
                let y = self.project(x);
                (p.f_pos(y), p.g_pos(y))
            }
        }
    }

    #[inline]
    pub fn f_h(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    #[inline]
    pub fn g_h(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// Constants from the worked examples, `(L1, L2)` for the given horizon.
    ///
    /// Taming: `L1 = max{alpha2, sigma}`, `L2 = alpha2 r`.
    /// Projection: `L1 = max{2 alpha2 r, 2 sigma rho}`,
    /// `L2 = alpha2 r T^{(1 - kappa(2r - 2))/2}`.
    pub fn closed_form_constants(&self, horizon: f64) -> Option<(f64, f64)> {
        let p = &self.params;
        match self.kind {
            CorrectionKind::Identity => None,
            CorrectionKind::Tamed => Some((p.alpha2.max(p.sigma), p.alpha2 * p.r)),
            CorrectionKind::Projected { kappa } => Some((
                (2.0 * p.alpha2 * p.r).max(2.0 * p.sigma * p.rho),
                p.alpha2 * p.r * horizon.powf(0.5 * (1.0 - kappa * (2.0 * p.r - 2.0))),
            )),
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            CorrectionKind::Projected { kappa } => write!(f, "projected(kappa={kappa}, h={})", self.h),
            k => write!(f, "{}(h={})", k.name(), self.h),
        }
    }
}

/// Sample points for [`check_assumption`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub lo: f64,
    pub hi: f64,
    /// Log-spaced points; adjacent points also form pairs.
    pub points: usize,
    /// Extra pairs drawn log-uniformly from `[lo, hi]`.
    pub pairs: usize,
    pub seed: u64,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid {
            lo: 1e-3,
            hi: 1e3,
            points: 200,
            pairs: 1000,
            seed: 0,
        }
    }
}

impl SampleGrid {
    fn points(&self) -> Vec<f64> {
        log_grid(self.lo, self.hi, self.points)
    }

    fn pairs(&self, points: &[f64]) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = points.windows(2).map(|w| (w[0], w[1])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (a, b) = (self.lo.ln(), self.hi.ln());
        for _ in 0..self.pairs {
            let x = rng.random_range(a..=b).exp();
            let y = rng.random_range(a..=b).exp();
            if x != y {
                out.push((x, y));
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        format!(
            "{} log-spaced points in [{:e}, {:e}] + {} random pairs (seed {})",
            self.points, self.lo, self.hi, self.pairs, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub grid: SampleGrid,
    /// The `v > 2` in the monotonicity inequality.
    pub v: f64,
    /// Horizon `T` entering the projection `L2`.
    pub horizon: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            grid: SampleGrid::default(),
            v: 3.0,
            horizon: 1.0,
        }
    }
}

/// Worst sampled point for a failed family.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub family: &'static str,
    pub x: f64,
    pub y: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub kind: CorrectionKind,
    pub h: f64,
    /// Largest `|f_h|/|f|` observed.
    pub max_ratio_f: f64,
    pub max_ratio_g: f64,
    /// Largest observed quotient of each inequality, before the margin.
    pub observed_l1: f64,
    pub observed_l2: f64,
    pub observed_l3: f64,
    pub estimated_l1: f64,
    pub estimated_l2: f64,
    pub estimated_l3: f64,
    pub closed_form_l1: Option<f64>,
    pub closed_form_l2: Option<f64>,
    pub v_used: f64,
    pub grid: String,
    pub passed: bool,
    pub violation: Option<Violation>,
}

/// Margin applied to observed quotients.
pub const ESTIMATE_MARGIN: f64 = 1.01;
/// Slack for rounding when comparing against closed-form constants.
const ROUNDING_SLACK: f64 = 1e-12;

impl AssumptionReport {
    pub const CSV_HEADER: &'static str =
        "kind,kappa,h,max_ratio_f,max_ratio_g,L1,L2,L3,L1_closed_form,L2_closed_form,v,passed";

    pub fn csv_row(&self) -> String {
        let kappa = match self.kind {
            CorrectionKind::Projected { kappa } => format!("{kappa:?}"),
            _ => String::new(),
        };
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        format!(
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{:?},{}",
            self.kind.name(),
            kappa,
            self.h,
            self.max_ratio_f,
            self.max_ratio_g,
            self.estimated_l1,
            self.estimated_l2,
            self.estimated_l3,
            opt(self.closed_form_l1),
            opt(self.closed_form_l2),
            self.v_used,
            self.passed
        )
    }
}

/// Checks the four inequalities on the sample grid. Never fails: problems
/// are reported through `passed` and `violation`.
pub fn check_assumption(c: &Correction, opts: &CheckOptions) -> AssumptionReport {
    let p = c.params();
    let h = c.h();
    let sqrt_h = h.sqrt();
    let points = opts.grid.points();
    let pairs = opts.grid.pairs(&points);
    let closed = c.closed_form_constants(opts.horizon);

    let mut violation: Option<(f64, Violation)> = None;
    let mut record = |severity: f64, v: Violation| {
        if violation.as_ref().is_none_or(|(s, _)| severity > *s) {
            violation = Some((severity, v));
        }
    };

    let (mut ratio_f, mut ratio_g) = (0.0_f64, 0.0_f64);
    let mut obs_l1 = 0.0_f64;
    let mut worst_l1 = (0.0, f64::NAN);
    for &x in &points {
        let (f, g) = (p.f_pos(x), p.g_pos(x));
        let (fh, gh) = c.eval(x);
        let rf = fh.abs() / f.abs();
        let rg = gh.abs() / g.abs();
        ratio_f = ratio_f.max(rf);
        ratio_g = ratio_g.max(rg);
        if !(fh.abs() <= f.abs() && gh.abs() <= g.abs()) {
            record(
                rf.max(rg),
                Violation {
                    family: "domination",
                    x,
                    y: None,
                    detail: format!("|f_h|/|f| = {rf}, |g_h|/|g| = {rg}"),
                },
            );
        }
        let q = ((f - fh).abs() + (g - gh).abs()) / (sqrt_h * (1.0 + pow_pos(x, 2.0 * p.r)));
        if q > obs_l1 || q.is_nan() {
            obs_l1 = q;
            worst_l1 = (q, x);
        }
    }

    let lip = 1.0 + 1.0 / sqrt_h;
    let half_v = 0.5 * (opts.v - 1.0);
    let (mut obs_l2, mut obs_l3) = (0.0_f64, f64::NEG_INFINITY);
    let mut worst_l2 = (0.0, f64::NAN, f64::NAN);
    for &(x, y) in &pairs {
        let (fx, gx) = c.eval(x);
        let (fy, gy) = c.eval(y);
        let dx = x - y;
        let q2 = (fx - fy).abs() / (lip * dx.abs());
        if q2 > obs_l2 || q2.is_nan() {
            obs_l2 = q2;
            worst_l2 = (q2, x, y);
        }
        let q3 = (dx * (fx - fy) + half_v * (gx - gy).powi(2)) / (dx * dx);
        if q3 > obs_l3 || q3.is_nan() {
            obs_l3 = q3;
        }
    }
    if pairs.is_empty() {
        obs_l3 = 0.0;
    }

    for (name, v) in [("consistency", obs_l1), ("lipschitz", obs_l2), ("monotonicity", obs_l3)] {
        if !v.is_finite() {
            record(
                f64::INFINITY,
                Violation {
                    family: name,
                    x: f64::NAN,
                    y: None,
                    detail: format!("non-finite quotient {v}"),
                },
            );
        }
    }

    if let Some((l1, l2)) = closed {
        if worst_l1.0 > l1 * (1.0 + ROUNDING_SLACK) {
            record(
                worst_l1.0 / l1,
                Violation {
                    family: "consistency",
                    x: worst_l1.1,
                    y: None,
                    detail: format!("quotient {} exceeds closed-form L1 = {l1}", worst_l1.0),
                },
            );
        }
        if worst_l2.0 > l2 * (1.0 + ROUNDING_SLACK) {
            record(
                worst_l2.0 / l2,
                Violation {
                    family: "lipschitz",
                    x: worst_l2.1,
                    y: Some(worst_l2.2),
                    detail: format!("quotient {} exceeds closed-form L2 = {l2}", worst_l2.0),
                },
            );
        }
    }

    let violation = violation.map(|(_, v)| v);
    AssumptionReport {
        kind: c.kind(),
        h,
        max_ratio_f: ratio_f,
        max_ratio_g: ratio_g,
        observed_l1: obs_l1,
        observed_l2: obs_l2,
        observed_l3: obs_l3,
        estimated_l1: obs_l1 * ESTIMATE_MARGIN,
        estimated_l2: obs_l2 * ESTIMATE_MARGIN,
        estimated_l3: (obs_l3 * ESTIMATE_MARGIN).max(f64::MIN_POSITIVE),
        closed_form_l1: closed.map(|c| c.0),
        closed_form_l2: closed.map(|c| c.1),
        v_used: opts.v,
        grid: opts.grid.describe(),
        passed: violation.is_none(),
        violation,
    }
}
