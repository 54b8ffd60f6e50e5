//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 I/O, 2 configuration, 3 numeric overflow,
//! 4 simulation failure, 5 assumption check failure.

pub mod config;
mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::corrections::{check_assumption, AssumptionReport, Correction};
use crate::experiment::{self, output, run_convergence};
use crate::model::classify_regime;
use crate::noise::NoisePath;
use crate::schemes::{Integrator, SchemeTag};
use crate::Error;

pub use config::{ConfigError, Preset, RunConfig};
pub use manifest::{params_hash, timestamp, Manifest};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_SIMULATION: u8 = 4;
pub const EXIT_ASSUMPTION: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "aitsahalia", version, about = "Positivity-preserving simulation of the Ait-Sahalia model with jumps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories and write one CSV per scheme and path.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Step size, e.g. 0.001 or 2^-10.
        #[arg(long)]
        h: Option<String>,
        /// Also write each path's noise as a binary dump.
        #[arg(long)]
        dump_noise: bool,
    },
    /// Run the mean-square error study and fit convergence rates.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Check the correction-function inequalities on a sample grid.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Time the schemes on identical noise.
    Bench {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in parameter set: example1 or example2.
    #[arg(long)]
    pub preset: Option<String>,
    /// RNG seed for the noise paths.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Scheme to run (repeatable): tem, pem, bem.
    #[arg(long = "scheme")]
    pub schemes: Vec<String>,
}

/// A failed command: exit code plus the message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Failure::new(EXIT_CONFIG, message)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.to_string())
    }
}

/// Exit code for a library error raised while simulating.
fn simulation_failure(e: Error) -> Failure {
    let code = match e.root() {
        Error::InvalidParam { .. } | Error::Divisibility { .. } | Error::Config(_) => EXIT_CONFIG,
        Error::NumericOverflow { .. } => EXIT_NUMERIC,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_SIMULATION,
    };
    Failure::new(code, e.to_string())
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { common, h, dump_noise } => simulate(&common, h.as_deref(), dump_noise),
        Command::Convergence { common } => convergence(&common),
        Command::Check { common } => check(&common),
        Command::Bench { common } => bench(&common),
    }
}

/// Preset and config file, then command-line overrides.
pub fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    let preset = common
        .preset
        .as_deref()
        .map(|name| Preset::parse(name).ok_or_else(|| Failure::config(format!("unknown preset `{name}` (expected example1 or example2)"))))
        .transpose()?;
    let mut cfg = match (&common.config, preset) {
        (Some(path), base) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text, &path.display().to_string(), base)?
        }
        (None, Some(p)) => RunConfig::from_preset(p),
        (None, None) => return Err(Failure::config("no configuration given: pass --config PATH or --preset NAME")),
    };
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(paths) = common.paths {
        if paths == 0 {
            return Err(Failure::config("--paths must be >= 1"));
        }
        cfg.experiment.n_paths = paths;
        cfg.simulate_paths = paths;
    }
    if !common.schemes.is_empty() {
        let tags = common
            .schemes
            .iter()
            .map(|s| s.parse::<SchemeTag>().map_err(|e| Failure::config(format!("--scheme: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        cfg.experiment.schemes = tags.clone();
        cfg.simulate_schemes = tags;
    }
    Ok(cfg)
}

fn regime_lines(cfg: &RunConfig, m: &mut Manifest) {
    let regime = classify_regime(cfg.params());
    if regime.is_warning() {
        eprintln!("warning: regime {}: {}", regime.tag.as_str(), regime.details);
    }
    m.set("regime", regime.tag.as_str());
    m.set("regime_details", &regime.details);
}

/// Output files written so far; removed again unless the command succeeds.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    keep: bool,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            keep: false,
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn finish(mut self, mut manifest: Manifest) -> Result<(), Failure> {
        for (i, p) in self.written.iter().enumerate() {
            manifest.set(&format!("output.{i}"), &p.display().to_string());
        }
        manifest.set("finished_at", &timestamp());
        let path = self.dir.join("manifest.txt");
        write_atomic(&path, manifest.render().as_bytes())
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
        self.keep = true;
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

/// Writes to a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn start(command: &str, cfg: &RunConfig, common: &Common) -> Result<(Manifest, Outputs), Failure> {
    let mut m = Manifest::new(command, cfg);
    m.set("workers", &common.workers.to_string());
    regime_lines(cfg, &mut m);
    let mut out = Outputs::new(&common.out)?;
    out.write("resolved_config.toml", cfg.to_toml().as_bytes())?;
    Ok((m, out))
}

fn simulate(common: &Common, h: Option<&str>, dump_noise: bool) -> Result<(), Failure> {
    let mut cfg = resolve(common)?;
    if let Some(expr) = h {
        cfg.simulate_h = config::parse_step(expr)
            .filter(|h| *h > 0.0)
            .ok_or_else(|| Failure::config(format!("--h: cannot use `{expr}` as a step size")))?;
    }
    let h = cfg.simulate_h;
    let horizon = cfg.experiment.horizon;
    let ratio = horizon / h;
    let steps = ratio.round();
    if !(steps >= 1.0 && (ratio - steps).abs() <= 1e-9 * steps) {
        return Err(Failure::config(format!("simulate.h = {h} does not divide T = {horizon}")));
    }
    let steps = steps as usize;
    let (m, mut out) = start("simulate", &cfg, common)?;
    let p = *cfg.params();
    let integrators = cfg
        .simulate_schemes
        .iter()
        .map(|&tag| Integrator::new(tag, h, &p, &cfg.experiment.jump, cfg.experiment.kappa))
        .collect::<Result<Vec<_>, _>>()
        .map_err(simulation_failure)?;
    let hash = params_hash(&p);
    for path in 0..cfg.simulate_paths as u64 {
        let noise = NoisePath::generate(cfg.experiment.seed, path, steps, h, p.lambda).map_err(simulation_failure)?;
        if dump_noise {
            let mut bytes = Vec::new();
            noise
                .write_to(&mut bytes)
                .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
            out.write(&format!("noise_path{path}.bin"), &bytes)?;
        }
        for integ in &integrators {
            if integ.tag().is_demonstration() {
                eprintln!("warning: {} is a demonstration scheme and may leave the positive half-line", integ.tag());
            }
            let traj = integ
                .simulate(&noise, p.x0)
                .map_err(|e| simulation_failure(Error::Path { path, source: Box::new(e) }))?;
            let name = format!("trajectory_{}_path{path}.csv", integ.tag().as_str().to_ascii_lowercase());
            out.write(&name, traj.to_csv(&hash, cfg.experiment.seed, path).as_bytes())?;
            println!(
                "{} path {path}: {} steps, terminal value {:.6}",
                integ.tag(),
                traj.values.len() - 1,
                traj.terminal()
            );
        }
    }
    out.finish(m.with("steps", &steps.to_string()))
}

/// Fixed-width summary of a convergence report.
pub fn summary_table(report: &experiment::ConvergenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:>12} {:>14} {:>12}", "scheme", "h", "e_h", "stderr");
    for r in &report.schemes {
        for e in &r.errors {
            let _ = writeln!(s, "{:<8} {:>12.6e} {:>14.6e} {:>12.3e}", r.scheme.as_str(), e.h, e.e_h, e.stderr);
        }
    }
    let _ = writeln!(s, "\n{:<8} {:>8} {:>10}", "scheme", "q", "resid");
    for r in &report.schemes {
        match r.fit {
            Some(f) => {
                let _ = writeln!(s, "{:<8} {:>8.4} {:>10.4}", r.scheme.as_str(), f.q, f.resid);
            }
            None => {
                let _ = writeln!(s, "{:<8} {:>8} {:>10}", r.scheme.as_str(), "-", "-");
            }
        }
    }
    s
}

fn convergence(common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    cfg.experiment.validate().map_err(|e| Failure::config(e.to_string()))?;
    let (m, mut out) = start("convergence", &cfg, common)?;
    let t0 = Instant::now();
    let report = run_convergence(&cfg.experiment, common.workers).map_err(simulation_failure)?;
    let elapsed = t0.elapsed().as_secs_f64();
    if report.positivity_failures > 0 {
        return Err(Failure::new(
            EXIT_SIMULATION,
            format!("{} non-positive iterates", report.positivity_failures),
        ));
    }
    out.write("errors.csv", output::errors_csv(&report).as_bytes())?;
    out.write("rates.csv", output::rates_csv(&report).as_bytes())?;
    out.write(
        "timings.csv",
        output::convergence_timings_csv(&report, common.workers).as_bytes(),
    )?;
    out.write("plot.csv", output::plot_csv(&report).as_bytes())?;
    print!("{}", summary_table(&report));
    println!("\n{} paths in {elapsed:.2} s", report.n_paths);
    out.finish(m.with("elapsed_seconds", &format!("{elapsed:.3}")))
}

fn check(common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    let (m, mut out) = start("check", &cfg, common)?;
    let mut reports: Vec<AssumptionReport> = Vec::new();
    for kind in &cfg.check_corrections {
        for &h in &cfg.check_h_list {
            let c = Correction::new(*kind, h, cfg.params()).map_err(|e| Failure::config(e.to_string()))?;
            reports.push(check_assumption(&c, &cfg.check));
        }
    }
    let mut csv = format!("{}\n", AssumptionReport::CSV_HEADER);
    for r in &reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    out.write("assumption.csv", csv.as_bytes())?;
    let mut failed = 0;
    for r in &reports {
        let status = if r.passed { "passed" } else { "FAILED" };
        println!(
            "{:<10} h = {:<12.6e} max f ratio {:.4}  max g ratio {:.4}  {status}",
            r.kind.name(),
            r.h,
            r.max_ratio_f,
            r.max_ratio_g
        );
        if !r.passed {
            failed += 1;
        }
    }
    out.finish(m)?;
    if failed == 0 {
        return Ok(());
    }
    let worst = reports.iter().filter(|r| !r.passed).max_by(|a, b| {
        a.max_ratio_f
            .max(a.max_ratio_g)
            .total_cmp(&b.max_ratio_f.max(b.max_ratio_g))
    });
    let mut msg = format!("{failed} of {} assumption checks failed", reports.len());
    if let Some(r) = worst {
        let _ = write!(msg, "; worst: {} at h = {:e}", r.kind.name(), r.h);
        if let Some(v) = &r.violation {
            let _ = write!(msg, ", inequality {} at x = {:e}", v.family, v.x);
            if let Some(y) = v.y {
                let _ = write!(msg, ", y = {y:e}");
            }
            let _ = write!(msg, " ({})", v.detail);
        }
    }
    Err(Failure::new(EXIT_ASSUMPTION, msg))
}

fn bench(common: &Common) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    cfg.experiment.validate().map_err(|e| Failure::config(e.to_string()))?;
    let (m, mut out) = start("bench", &cfg, common)?;
    let workers = if common.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        common.workers
    };
    let timings =
        experiment::benchmark(&cfg.experiment, &cfg.experiment.schemes, workers).map_err(simulation_failure)?;
    out.write("timings.csv", output::timings_csv(&timings.single, Some(&timings)).as_bytes())?;
    println!("{:<8} {:>12}", "scheme", "seconds");
    for (s, t) in &timings.single {
        println!("{:<8} {:>12.3}", s.as_str(), t);
    }
    out.finish(m)
}
