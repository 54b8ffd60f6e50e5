//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the full protocol (10^4 paths, h_exact = 2^-14). Set
//! `ACCEPTANCE_DESK=1` for the desk-scale variant (2000 paths, rate bands
//! widened by 0.05) and `ACCEPTANCE_STRICT=1` to exit non-zero on any FAIL.

mod common;

use std::time::Instant;

use aitsahalia::noise::sample_poisson;
use aitsahalia::{
    bem_step, benchmark, check_assumption, explicit_step, fit_rate, run_convergence, CheckOptions, Correction,
    ExperimentConfig, JumpCoefficient, ModelParams, NoisePath, SchemeTag, StepInputs,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn desk() -> bool {
    std::env::var("ACCEPTANCE_DESK").is_ok_and(|v| v == "1")
}

fn rates(params: ModelParams, bands: [(SchemeTag, f64, f64); 3]) -> Outcome {
    let mut cfg = ExperimentConfig::standard(params);
    let widen = if desk() {
        cfg.n_paths = 2000;
        0.05
    } else {
        0.0
    };
    let report = match run_convergence(&cfg, 0) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let mut ok = report.positivity_failures == 0;
    let mut parts = vec![format!("{} paths", cfg.n_paths)];
    for (tag, lo, hi) in bands {
        let (lo, hi) = (lo - widen, hi + widen);
        match report.scheme(tag).and_then(|s| s.fit) {
            Some(f) => {
                let inside = (lo..=hi).contains(&f.q);
                ok &= inside;
                parts.push(format!(
                    "{tag} q={:.4} in [{lo:.2}, {hi:.2}] {}",
                    f.q,
                    if inside { "yes" } else { "NO" }
                ));
            }
            None => {
                ok = false;
                parts.push(format!("{tag} no fit"));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn positivity() -> Outcome {
    let steps_per_h = 200_000;
    let hs = [2f64.powi(-10), 0.25, 1.0, 4.0, 64.0];
    let jump = JumpCoefficient::half();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut bad, mut worst_res, mut total) = (0u64, 0.0_f64, 0u64);
    for &h in &hs {
        for k in 0..steps_per_h {
            let p = if k % 2 == 0 { ModelParams::example1() } else { ModelParams::example2() };
            let c = if (k / 2) % 2 == 0 {
                Correction::tamed(h, &p)
            } else {
                Correction::projected(h, 1.0 / (2.0 * p.r - 2.0), &p)
            }
            .unwrap();
            let y = 10f64.powf(rng.random_range(-6.0..3.0));
            let z: f64 = rng.sample(StandardNormal);
            let dw = z * (10.0 * h).sqrt();
            let dn = sample_poisson(&mut rng, p.lambda * h);
            let s = StepInputs::new(y, h, dw, dn).unwrap();
            total += 1;
            match explicit_step(&s, &c, &jump) {
                Ok(out) if out.value > 0.0 && out.value.is_finite() => {
                    worst_res = worst_res.max(out.residual);
                    if out.residual > 1e-12 {
                        bad += 1;
                    }
                }
                _ => bad += 1,
            }
        }
    }
    outcome(
        bad == 0,
        format!("{total} steps over h in {{2^-10, 2^-2, 1, 4, 64}}, 10x variance: {bad} failures, max residual {worst_res:.2e}"),
    )
}

fn oracles() -> Outcome {
    let jump = JumpCoefficient::half();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_e, mut worst_b) = (0.0_f64, 0.0_f64);
    for i in 0..10_000 {
        let p = if i % 2 == 0 { ModelParams::example1() } else { ModelParams::example2() };
        let h = 2f64.powf(rng.random_range(-12.0..2.0));
        let y = 10f64.powf(rng.random_range(-4.0..2.0));
        let dw = rng.sample::<f64, _>(StandardNormal) * h.sqrt();
        let dn = sample_poisson(&mut rng, h);
        let kappa = 1.0 / (2.0 * p.r - 2.0);
        let (c, fg) = if i % 4 < 2 {
            (Correction::tamed(h, &p).unwrap(), common::tamed(&p, h, y))
        } else {
            (Correction::projected(h, kappa, &p).unwrap(), common::projected(&p, h, kappa, y))
        };
        let got = explicit_step(&StepInputs::new(y, h, dw, dn).unwrap(), &c, &jump).unwrap().value;
        worst_e = worst_e.max(common::rel_diff(got, common::explicit_step_oracle(&p, fg, y, h, dw, dn, 0.5)));
    }
    for i in 0..10_000 {
        let p = if i % 2 == 0 { ModelParams::example1() } else { ModelParams::example2() };
        let h = 2f64.powf(rng.random_range(-14.0..-1.0));
        let y = 10f64.powf(rng.random_range(-3.0..1.5));
        let dw = rng.sample::<f64, _>(StandardNormal) * h.sqrt();
        let dn = sample_poisson(&mut rng, h);
        let got = match bem_step(&StepInputs::new(y, h, dw, dn).unwrap(), &p, &jump) {
            Ok(s) => s.value,
            Err(e) => return outcome(false, format!("bem_step failed: {e}")),
        };
        worst_b = worst_b.max(common::rel_diff(got, common::implicit_root_bisect(&p, y, h, dw, dn, 0.5)));
    }
    outcome(
        worst_e < 1e-10 && worst_b < 1e-10,
        format!("explicit max rel diff {worst_e:.2e} (< 1e-10), backward Euler max rel diff {worst_b:.2e} (< 1e-10)"),
    )
}

fn assumptions() -> Outcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for (name, p) in [("example1", ModelParams::example1()), ("example2", ModelParams::example2())] {
        for i in 5..=10 {
            let h = 2f64.powi(-i);
            for c in [
                Correction::tamed(h, &p).unwrap(),
                Correction::projected(h, 1.0 / (2.0 * p.r - 2.0), &p).unwrap(),
            ] {
                count += 1;
                let r = check_assumption(&c, &CheckOptions::default());
                if !r.passed {
                    let why = r
                        .violation
                        .map(|v| format!("{} at x={:.4}: {}", v.family, v.x, v.detail))
                        .unwrap_or_default();
                    failures.push(format!("{} {name} h=2^-{i}: {why}", r.kind.name()));
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{count} checks passed, closed-form constants included")
    } else {
        format!("{} of {count} checks failed: {}", failures.len(), failures.join(" | "))
    };
    outcome(failures.is_empty(), detail)
}

fn timing() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p) in [("example1", ModelParams::example1()), ("example2", ModelParams::example2())] {
        let mut cfg = ExperimentConfig::standard(p);
        if desk() {
            cfg.n_paths = 2000;
        }
        let t = match benchmark(&cfg, &[SchemeTag::Tem, SchemeTag::Bem], 1) {
            Ok(t) => t,
            Err(e) => return outcome(false, format!("benchmark failed: {e}")),
        };
        let (tem, bem) = (t.single[0].1, t.single[1].1);
        ok &= tem <= 0.8 * bem;
        parts.push(format!("{name} TEM {tem:.2}s / BEM {bem:.2}s = {:.2}", tem / bem));
    }
    outcome(ok, format!("single worker, identical noise: {} (need <= 0.80)", parts.join("; ")))
}

fn determinism() -> Outcome {
    let mut cfg = ExperimentConfig::standard(ModelParams::example2());
    cfg.n_paths = 2000;
    let runs: Vec<_> = [1, 1, 4]
        .iter()
        .map(|&w| run_convergence(&cfg, w).map(|r| r.without_timings()))
        .collect();
    let Ok(runs) = runs.into_iter().collect::<Result<Vec<_>, _>>() else {
        return outcome(false, "run failed");
    };
    let identical = runs[0] == runs[1] && runs[0] == runs[2];

    let mut dn_exact = true;
    let mut worst_dw = 0.0_f64;
    for path in 0..200 {
        let fine = NoisePath::generate(cfg.seed, path, 1 << 14, 2f64.powi(-14), 1.0).unwrap();
        let dn: u32 = fine.dn.iter().sum();
        let dw: f64 = fine.dw.iter().sum();
        let mass: f64 = fine.dw.iter().map(|x| x.abs()).sum();
        for k in 4..=9 {
            let coarse = fine.coarsen(1 << k).unwrap();
            dn_exact &= coarse.dn.iter().sum::<u32>() == dn;
            worst_dw = worst_dw.max((coarse.dw.iter().sum::<f64>() - dw).abs() / mass);
        }
    }
    outcome(
        identical && dn_exact && worst_dw <= 1e-15,
        format!(
            "report bit-identical across runs and workers {{1, 4}}: {identical}; sum dN exact: {dn_exact}; sum dW max rel diff {worst_dw:.2e} (<= 1e-15)"
        ),
    )
}

fn synthetic_fit() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for q in [0.5, 1.0] {
        let pts: Vec<(f64, f64)> = (5..=10).map(|i| 2f64.powi(-i)).map(|h| (h, 0.3 * h.powf(q))).collect();
        match fit_rate(&pts) {
            Ok(f) => {
                ok &= (f.q - q).abs() < 1e-6;
                parts.push(format!("q={:.6} (want {q:.4})", f.q));
            }
            Err(e) => {
                ok = false;
                parts.push(e.to_string());
            }
        }
    }
    outcome(
        ok,
        format!(
            "synthetic power laws: {}; absolute e_h and resid values are not compared (not reproducible)",
            parts.join(", ")
        ),
    )
}

fn main() {
    // `cargo test -- --list` and similar harness probes
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("rate reproduction, example1", || {
            rates(
                ModelParams::example1(),
                [(SchemeTag::Tem, 0.40, 0.60), (SchemeTag::Pem, 0.45, 0.70), (SchemeTag::Bem, 0.45, 0.65)],
            )
        }),
        ("rate reproduction, example2", || {
            rates(
                ModelParams::example2(),
                [(SchemeTag::Tem, 0.40, 0.62), (SchemeTag::Pem, 0.44, 0.66), (SchemeTag::Bem, 0.42, 0.64)],
            )
        }),
        ("unconditional positivity", positivity),
        ("oracle equivalence", oracles),
        ("assumption suite", assumptions),
        ("timing ordering", timing),
        ("coupling and determinism", determinism),
        ("property fallback", synthetic_fit),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}. {name}: {} [{:.1}s]", i + 1, o.detail, t0.elapsed().as_secs_f64());
        passed += o.passed as usize;
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed < criteria.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
