//! Strong-error estimation against a fine-grid reference solution.
//!
//! For every path the fine noise is generated once, the reference scheme
//! runs on it at `h_exact`, and each scheme under test runs on the
//! aggregated increments at every coarse `h`. Squared errors are summed per
//! coarse grid point inside fixed-size path blocks; blocks are reduced in
//! index order so results do not depend on the number of worker threads.
//!
//! `e_h = sqrt( max_n mean_paths |X(t_n) - Y_n|^2 )`.

mod fit;
pub mod output;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

pub use fit::{fit_rate, RateFit};

use crate::error::{Error, Result};
use crate::model::{JumpCoefficient, ModelParams};
use crate::noise::{substream, NoisePath};
use crate::schemes::{Integrator, SchemeTag, StepInputs};

/// Number of bootstrap resamples behind each standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Upper bound on the number of path blocks.
pub const MAX_BLOCKS: usize = 512;
const TAG_BOOTSTRAP: u64 = 0x424f_4f54;
const STEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub jump: JumpCoefficient,
    /// Horizon `T`.
    pub horizon: f64,
    pub h_list: Vec<f64>,
    pub h_exact: f64,
    pub n_paths: usize,
    pub reference: SchemeTag,
    pub schemes: Vec<SchemeTag>,
    pub seed: u64,
    /// Projection exponent for PEM; `None` means `1/(2r - 2)`.
    pub kappa: Option<f64>,
}

impl ExperimentConfig {
    /// `T = 1`, `h = 2^-5..2^-10`, `h_exact = 2^-14`, `10^4` paths, BEM
    /// reference, TEM/PEM/BEM under test, `nu(x) = x/2`.
    pub fn standard(params: ModelParams) -> Self {
        ExperimentConfig {
            params,
            jump: JumpCoefficient::half(),
            horizon: 1.0,
            h_list: (5..=10).map(|i| 2f64.powi(-i)).collect(),
            h_exact: 2f64.powi(-14),
            n_paths: 10_000,
            reference: SchemeTag::Bem,
            schemes: vec![SchemeTag::Tem, SchemeTag::Pem, SchemeTag::Bem],
            seed: 2025,
            kappa: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.jump.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("T", format!("must be > 0, got {}", self.horizon)));
        }
        if !(self.h_exact.is_finite() && self.h_exact > 0.0) {
            return Err(Error::invalid("h_exact", format!("must be > 0, got {}", self.h_exact)));
        }
        integer_ratio(self.horizon, self.h_exact).ok_or_else(|| {
            Error::invalid(
                "h_exact",
                format!("T / h_exact = {} is not an integer", self.horizon / self.h_exact),
            )
        })?;
        if self.h_list.is_empty() {
            return Err(Error::invalid("h_list", "must not be empty"));
        }
        for &h in &self.h_list {
            self.factor(h)?;
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be >= 1"));
        }
        for &s in self.schemes.iter().chain([&self.reference]) {
            if s.is_demonstration() {
                return Err(Error::invalid("schemes", format!("{s} is demonstration-only")));
            }
        }
        Ok(())
    }

    pub fn n_fine(&self) -> usize {
        integer_ratio(self.horizon, self.h_exact).unwrap_or(0)
    }

    /// `h / h_exact`, required to be a positive integer with `h <= T`.
    pub fn factor(&self, h: f64) -> Result<usize> {
        if !(h.is_finite() && h > 0.0 && h <= self.horizon * (1.0 + STEP_TOL)) {
            return Err(Error::invalid("h_list", format!("step {h} must lie in (0, T]")));
        }
        integer_ratio(h, self.h_exact).ok_or_else(|| {
            Error::invalid(
                "h_list",
                format!("step {h} is not an integer multiple of h_exact = {}", self.h_exact),
            )
        })
    }
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let q = a / b;
    let k = q.round();
    (k >= 1.0 && (q - k).abs() <= STEP_TOL * k).then_some(k as usize)
}

/// `e_h` and its bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub h: f64,
    pub e_h: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: SchemeTag,
    pub errors: Vec<ErrorEstimate>,
    /// `None` when the errors cannot be fitted (e.g. an exact zero).
    pub fit: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub reference: SchemeTag,
    pub h_exact: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeResult>,
    /// Summed per-scheme simulation time across workers.
    pub wall_times: Vec<(SchemeTag, f64)>,
    pub reference_seconds: f64,
    pub positivity_failures: u64,
}

impl ConvergenceReport {
    pub fn scheme(&self, tag: SchemeTag) -> Option<&SchemeResult> {
        self.schemes.iter().find(|s| s.scheme == tag)
    }

    /// The report with timing fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        ConvergenceReport {
            wall_times: self.wall_times.iter().map(|(s, _)| (*s, 0.0)).collect(),
            reference_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Everything one path needs, built once per run.
struct Plan {
    reference: Integrator,
    levels: Vec<Level>,
    /// Flat offsets into the per-block accumulator: `[scheme][level]`.
    offsets: Vec<Vec<usize>>,
    width: usize,
    n_fine: usize,
}

struct Level {
    h: f64,
    factor: usize,
    steps: usize,
    integrators: Vec<Integrator>,
}

impl Plan {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let n_fine = cfg.n_fine();
        let reference = Integrator::new(cfg.reference, cfg.h_exact, &cfg.params, &cfg.jump, cfg.kappa)?;
        let mut levels = Vec::with_capacity(cfg.h_list.len());
        for &h in &cfg.h_list {
            let factor = cfg.factor(h)?;
            let steps = n_fine / factor;
            // a step that does not divide T covers the largest whole prefix of [0, T]
            let h = factor as f64 * cfg.h_exact;
            let integrators = cfg
                .schemes
                .iter()
                .map(|&s| Integrator::new(s, h, &cfg.params, &cfg.jump, cfg.kappa))
                .collect::<Result<Vec<_>>>()?;
            levels.push(Level {
                h,
                factor,
                steps,
                integrators,
            });
        }
        let mut width = 0;
        let offsets = (0..cfg.schemes.len())
            .map(|_| {
                levels
                    .iter()
                    .map(|l| {
                        let o = width;
                        width += l.steps + 1;
                        o
                    })
                    .collect()
            })
            .collect();
        Ok(Plan {
            reference,
            levels,
            offsets,
            width,
            n_fine,
        })
    }
}

/// Per-block partial results.
struct BlockSums {
    sums: Vec<f64>,
    paths: usize,
    scheme_time: Vec<Duration>,
    reference_time: Duration,
    positivity_failures: u64,
}

struct Scratch {
    reference: Vec<f64>,
    values: Vec<f64>,
}

/// Runs one path and feeds `(scheme, level, n, squared error)` to `sink`.
#[allow(clippy::too_many_arguments)]
fn run_path(
    cfg: &ExperimentConfig,
    plan: &Plan,
    path: u64,
    scratch: &mut Scratch,
    times: &mut [Duration],
    reference_time: &mut Duration,
    failures: &mut u64,
    mut sink: impl FnMut(usize, usize, usize, f64),
) -> Result<()> {
    let annotate = |e: Error| Error::Path {
        path,
        source: Box::new(e),
    };
    let fine = NoisePath::generate(cfg.seed, path, plan.n_fine, cfg.h_exact, cfg.params.lambda)?;
    let t0 = Instant::now();
    plan.reference
        .simulate_into(&fine, cfg.params.x0, &mut scratch.reference)
        .map_err(annotate)?;
    *reference_time += t0.elapsed();
    *failures += scratch.reference.iter().filter(|&&v| !(v > 0.0)).count() as u64;

    for (li, level) in plan.levels.iter().enumerate() {
        let coarse = fine.coarsen_prefix(level.factor, level.steps);
        if coarse.fine_checksum != fine.fine_checksum {
            return Err(annotate(Error::Config("coarse noise is not derived from the reference path".into())));
        }
        for (si, integrator) in level.integrators.iter().enumerate() {
            let t0 = Instant::now();
            integrator
                .simulate_into(&coarse, cfg.params.x0, &mut scratch.values)
                .map_err(annotate)?;
            times[si] += t0.elapsed();
            for (n, &y) in scratch.values.iter().enumerate() {
                if !(y > 0.0) {
                    *failures += 1;
                }
                let d = scratch.reference[n * level.factor] - y;
                sink(si, li, n, d * d);
            }
        }
    }
    Ok(())
}

fn block_layout(n_paths: usize) -> (usize, usize) {
    let size = n_paths.div_ceil(MAX_BLOCKS).max(1);
    (size, n_paths.div_ceil(size))
}

fn run_block(cfg: &ExperimentConfig, plan: &Plan, block: usize, block_size: usize) -> Result<BlockSums> {
    let start = block * block_size;
    let end = (start + block_size).min(cfg.n_paths);
    let mut out = BlockSums {
        sums: vec![0.0; plan.width],
        paths: end - start,
        scheme_time: vec![Duration::ZERO; cfg.schemes.len()],
        reference_time: Duration::ZERO,
        positivity_failures: 0,
    };
    let mut scratch = Scratch {
        reference: Vec::with_capacity(plan.n_fine + 1),
        values: Vec::new(),
    };
    for path in start..end {
        let sums = &mut out.sums;
        run_path(
            cfg,
            plan,
            path as u64,
            &mut scratch,
            &mut out.scheme_time,
            &mut out.reference_time,
            &mut out.positivity_failures,
            |si, li, n, sq| sums[plan.offsets[si][li] + n] += sq,
        )?;
    }
    Ok(out)
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn sup_rms(sums: &[f64], paths: f64) -> f64 {
    sums.iter().fold(0.0_f64, |m, &s| m.max(s / paths)).sqrt()
}

/// Runs the full error study. `workers = 0` uses the global rayon pool.
pub fn run_convergence(cfg: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport> {
    let plan = Plan::new(cfg)?;
    let (block_size, n_blocks) = block_layout(cfg.n_paths);
    let blocks: Vec<BlockSums> = in_pool(workers, || {
        (0..n_blocks)
            .into_par_iter()
            .map(|b| run_block(cfg, &plan, b, block_size))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut total = vec![0.0; plan.width];
    let mut scheme_time = vec![Duration::ZERO; cfg.schemes.len()];
    let mut reference_time = Duration::ZERO;
    let mut failures = 0;
    for b in &blocks {
        for (t, s) in total.iter_mut().zip(&b.sums) {
            *t += s;
        }
        for (t, s) in scheme_time.iter_mut().zip(&b.scheme_time) {
            *t += *s;
        }
        reference_time += b.reference_time;
        failures += b.positivity_failures;
    }

    let boot = bootstrap(cfg, &plan, &blocks);
    let n = cfg.n_paths as f64;
    let schemes = cfg
        .schemes
        .iter()
        .enumerate()
        .map(|(si, &scheme)| {
            let errors: Vec<ErrorEstimate> = plan
                .levels
                .iter()
                .enumerate()
                .map(|(li, level)| {
                    let o = plan.offsets[si][li];
                    ErrorEstimate {
                        h: level.h,
                        e_h: sup_rms(&total[o..o + level.steps + 1], n),
                        stderr: boot[si][li],
                    }
                })
                .collect();
            let pts: Vec<(f64, f64)> = errors.iter().map(|e| (e.h, e.e_h)).collect();
            SchemeResult {
                scheme,
                fit: fit_rate(&pts).ok(),
                errors,
            }
        })
        .collect();

    Ok(ConvergenceReport {
        reference: cfg.reference,
        h_exact: cfg.h_exact,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        schemes,
        wall_times: cfg
            .schemes
            .iter()
            .zip(&scheme_time)
            .map(|(&s, t)| (s, t.as_secs_f64()))
            .collect(),
        reference_seconds: reference_time.as_secs_f64(),
        positivity_failures: failures,
    })
}

/// Bootstrap standard errors over path blocks, `[scheme][level]`.
fn bootstrap(cfg: &ExperimentConfig, plan: &Plan, blocks: &[BlockSums]) -> Vec<Vec<f64>> {
    let nb = blocks.len();
    let mut rng = substream(cfg.seed, u64::MAX, TAG_BOOTSTRAP);
    let mut samples = vec![vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); plan.levels.len()]; cfg.schemes.len()];
    let mut acc = vec![0.0; plan.width];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut paths = 0usize;
        for _ in 0..nb {
            let b = &blocks[rng.random_range(0..nb)];
            paths += b.paths;
            for (a, s) in acc.iter_mut().zip(&b.sums) {
                *a += s;
            }
        }
        for (si, per_scheme) in samples.iter_mut().enumerate() {
            for (li, level) in plan.levels.iter().enumerate() {
                let o = plan.offsets[si][li];
                per_scheme[li].push(sup_rms(&acc[o..o + level.steps + 1], paths as f64));
            }
        }
    }
    samples
        .into_iter()
        .map(|levels| {
            levels
                .into_iter()
                .map(|s| {
                    let m = s.iter().sum::<f64>() / s.len() as f64;
                    (s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s.len() - 1).max(1) as f64).sqrt()
                })
                .collect()
        })
        .collect()
}

/// `e_h` for a single scheme and step size from `cfg.h_list`.
pub fn mean_square_error(cfg: &ExperimentConfig, scheme: SchemeTag, h: f64, workers: usize) -> Result<f64> {
    if !cfg.h_list.iter().any(|&x| (x - h).abs() <= STEP_TOL * h) {
        return Err(Error::invalid("h", format!("{h} is not in h_list")));
    }
    let single = ExperimentConfig {
        h_list: vec![h],
        schemes: vec![scheme],
        ..cfg.clone()
    };
    let report = run_convergence(&single, workers)?;
    Ok(report.schemes[0].errors[0].e_h)
}

/// Squared errors of one path, `[scheme][level][n]`, computed through the
/// same code path as [`run_convergence`].
pub fn path_squared_errors(cfg: &ExperimentConfig, path: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    let plan = Plan::new(cfg)?;
    let mut out: Vec<Vec<Vec<f64>>> = (0..cfg.schemes.len())
        .map(|_| plan.levels.iter().map(|l| vec![0.0; l.steps + 1]).collect())
        .collect();
    let mut scratch = Scratch {
        reference: Vec::new(),
        values: Vec::new(),
    };
    let mut times = vec![Duration::ZERO; cfg.schemes.len()];
    let (mut rt, mut fails) = (Duration::ZERO, 0);
    run_path(cfg, &plan, path, &mut scratch, &mut times, &mut rt, &mut fails, |si, li, n, sq| {
        out[si][li][n] = sq;
    })?;
    Ok(out)
}

/// Short runs at (possibly very large) step sizes; counts non-positive or
/// failed iterates. Each failing path stops at its first failure.
pub fn positivity_stress(
    scheme: SchemeTag,
    cfg: &ExperimentConfig,
    h_large: &[f64],
    steps: usize,
) -> Result<u64> {
    let mut failures = 0;
    for &h in h_large {
        let integrator = Integrator::new(scheme, h, &cfg.params, &cfg.jump, cfg.kappa)?;
        for path in 0..cfg.n_paths as u64 {
            let noise = NoisePath::generate(cfg.seed, path, steps, h, cfg.params.lambda)?;
            let mut y = cfg.params.x0;
            for (&dw, &dn) in noise.dw.iter().zip(&noise.dn) {
                let s = StepInputs { y_prev: y, h, dw, dn };
                match integrator.step(&s) {
                    Ok((next, _)) if next > 0.0 && next.is_finite() => y = next,
                    _ => {
                        failures += 1;
                        break;
                    }
                }
            }
        }
    }
    Ok(failures)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timings {
    /// One worker, identical pre-generated noise for every scheme.
    pub single: Vec<(SchemeTag, f64)>,
    /// Each scheme as its own parallel pass (noise generation included).
    pub parallel: Vec<(SchemeTag, f64)>,
    pub parallel_workers: usize,
}

/// Wall-clock cost of simulating `cfg.n_paths` paths at every `h` in
/// `cfg.h_list`, per scheme. The reference solution is not timed.
pub fn benchmark(cfg: &ExperimentConfig, schemes: &[SchemeTag], parallel_workers: usize) -> Result<Timings> {
    if schemes.is_empty() {
        return Ok(Timings {
            single: Vec::new(),
            parallel: Vec::new(),
            parallel_workers,
        });
    }
    let bench_cfg = ExperimentConfig {
        schemes: schemes.to_vec(),
        ..cfg.clone()
    };
    let plan = Plan::new(&bench_cfg)?;
    let mut single = vec![Duration::ZERO; schemes.len()];
    let mut values = Vec::new();
    let mut coarse = Vec::with_capacity(plan.levels.len());
    for path in 0..cfg.n_paths as u64 {
        let fine = NoisePath::generate(cfg.seed, path, plan.n_fine, cfg.h_exact, cfg.params.lambda)?;
        coarse.clear();
        for level in &plan.levels {
            coarse.push(fine.coarsen_prefix(level.factor, level.steps));
        }
        for (si, t) in single.iter_mut().enumerate() {
            let t0 = Instant::now();
            for (level, noise) in plan.levels.iter().zip(&coarse) {
                level.integrators[si].simulate_into(noise, cfg.params.x0, &mut values)?;
            }
            *t += t0.elapsed();
        }
    }

    let mut parallel = Vec::new();
    if parallel_workers > 1 {
        for (si, &s) in schemes.iter().enumerate() {
            let t0 = Instant::now();
            in_pool(parallel_workers, || {
                (0..cfg.n_paths as u64).into_par_iter().try_for_each(|path| -> Result<()> {
                    let fine = NoisePath::generate(cfg.seed, path, plan.n_fine, cfg.h_exact, cfg.params.lambda)?;
                    let mut values = Vec::new();
                    for level in &plan.levels {
                        let noise = fine.coarsen_prefix(level.factor, level.steps);
                        level.integrators[si].simulate_into(&noise, cfg.params.x0, &mut values)?;
                    }
                    Ok(())
                })
            })??;
            parallel.push((s, t0.elapsed().as_secs_f64()));
        }
    }

    Ok(Timings {
        single: schemes
            .iter()
            .zip(&single)
            .map(|(&s, t)| (s, t.as_secs_f64()))
            .collect(),
        parallel,
        parallel_workers,
    })
}
