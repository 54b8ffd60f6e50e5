//! CSV renderings of experiment results.

use super::{ConvergenceReport, Timings};

pub const ERRORS_HEADER: &str = "scheme,h,e_h,stderr";
pub const RATES_HEADER: &str = "scheme,q,resid";
pub const TIMINGS_HEADER: &str = "scheme,mode,workers,seconds";
pub const PLOT_HEADER: &str = "log2h,log2e,scheme";

pub fn errors_csv(report: &ConvergenceReport) -> String {
    let mut s = format!("{ERRORS_HEADER}\n");
    for r in &report.schemes {
        for e in &r.errors {
            s.push_str(&format!("{},{:?},{:?},{:?}\n", r.scheme, e.h, e.e_h, e.stderr));
        }
    }
    s
}

/// One row per scheme; schemes without a fit get empty fields.
pub fn rates_csv(report: &ConvergenceReport) -> String {
    let mut s = format!("{RATES_HEADER}\n");
    for r in &report.schemes {
        match r.fit {
            Some(f) => s.push_str(&format!("{},{:?},{:?}\n", r.scheme, f.q, f.resid)),
            None => s.push_str(&format!("{},,\n", r.scheme)),
        }
    }
    s
}

pub fn timings_csv(single: &[(impl std::fmt::Display, f64)], timings: Option<&Timings>) -> String {
    let mut s = format!("{TIMINGS_HEADER}\n");
    for (scheme, secs) in single {
        s.push_str(&format!("{scheme},single,1,{secs:?}\n"));
    }
    if let Some(t) = timings {
        for (scheme, secs) in &t.parallel {
            s.push_str(&format!("{scheme},parallel,{},{secs:?}\n", t.parallel_workers));
        }
    }
    s
}

/// Long-format log-log data; zero errors are skipped.
pub fn plot_csv(report: &ConvergenceReport) -> String {
    let mut s = format!("{PLOT_HEADER}\n");
    for r in &report.schemes {
        for e in r.errors.iter().filter(|e| e.e_h > 0.0) {
            s.push_str(&format!("{:?},{:?},{}\n", e.h.log2(), e.e_h.log2(), r.scheme));
        }
    }
    s
}

/// Per-scheme compute time of a convergence run, summed over workers,
/// plus the reference solver.
pub fn convergence_timings_csv(report: &ConvergenceReport, workers: usize) -> String {
    let mut s = format!("{TIMINGS_HEADER}\n");
    for (scheme, secs) in &report.wall_times {
        s.push_str(&format!("{scheme},summed,{workers},{secs:?}\n"));
    }
    s.push_str(&format!("{},reference,{workers},{:?}\n", report.reference, report.reference_seconds));
    s
}
