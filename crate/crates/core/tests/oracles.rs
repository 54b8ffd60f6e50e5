mod common;

use aitsahalia::schemes::{bem_tolerance, positive_root};
use aitsahalia::{bem_step, explicit_step, Correction, JumpCoefficient, ModelParams, StepInputs};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn presets() -> [ModelParams; 2] {
    [ModelParams::example1(), ModelParams::example2()]
}

#[test]
fn quadratic_oracle_known_roots() {
    assert_eq!(quadratic_root_bisect(0.0, 1.0), 1.0);
    // (y - 3)(y + 2) = y^2 - y - 6
    assert!((quadratic_root_bisect(1.0, 6.0) - 3.0).abs() < 1e-14);
    let tiny = quadratic_root_bisect(-1e8, 1e-3);
    assert!(rel_diff(tiny, 1e-11) < 1e-12);
}

#[test]
fn explicit_step_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let jump = JumpCoefficient::half();
    for i in 0..10_000 {
        let p = presets()[i % 2];
        let h = 2f64.powf(rng.random_range(-12.0..2.0));
        let y = 10f64.powf(rng.random_range(-4.0..2.0));
        let dw = rng.random_range(-4.0..4.0) * h.sqrt();
        let dn = rng.random_range(0..3u32);
        let kappa = 1.0 / (2.0 * p.r - 2.0);
        let (c, fg) = if i % 4 < 2 {
            (Correction::tamed(h, &p).unwrap(), tamed(&p, h, y))
        } else {
            (Correction::projected(h, kappa, &p).unwrap(), projected(&p, h, kappa, y))
        };
        let got = explicit_step(&StepInputs::new(y, h, dw, dn).unwrap(), &c, &jump).unwrap().value;
        let want = explicit_step_oracle(&p, fg, y, h, dw, dn, 0.5);
        assert!(
            rel_diff(got, want) < 1e-10,
            "instance {i}: y={y} h={h} dw={dw} dn={dn}: {got} vs {want}"
        );
    }
}

#[test]
fn bem_step_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let jump = JumpCoefficient::half();
    for i in 0..10_000 {
        let p = presets()[i % 2];
        let h = 2f64.powf(rng.random_range(-14.0..-1.0));
        let y = 10f64.powf(rng.random_range(-3.0..1.5));
        let dw = rng.random_range(-4.0..4.0) * h.sqrt();
        let dn = rng.random_range(0..3u32);
        let got = bem_step(&StepInputs::new(y, h, dw, dn).unwrap(), &p, &jump).unwrap();
        let want = implicit_root_bisect(&p, y, h, dw, dn, 0.5);
        assert!(
            rel_diff(got.value, want) < 1e-10,
            "instance {i}: y={y} h={h} dw={dw} dn={dn}: {} vs {want}",
            got.value
        );
        assert!(implicit_residual(&p, y, h, dw, dn, 0.5, got.value).abs() <= 10.0 * bem_tolerance(y));
    }
}

proptest! {
    #[test]
    fn positive_root_solves_quadratic(b in -1e6f64..1e6, c in 1e-12f64..1e3) {
        let y = positive_root(b, c);
        prop_assert!(y > 0.0);
        prop_assert!(rel_diff(y, quadratic_root_bisect(b, c)) < 1e-10);
    }

    #[test]
    fn bem_residual_within_tolerance(
        y in 1e-3f64..30.0,
        e in -12i32..-1,
        z in -5.0f64..5.0,
        dn in 0u32..4,
        second in any::<bool>(),
    ) {
        let p = if second { ModelParams::example2() } else { ModelParams::example1() };
        let h = 2f64.powi(e);
        let s = StepInputs::new(y, h, z * h.sqrt(), dn).unwrap();
        let out = bem_step(&s, &p, &JumpCoefficient::half()).unwrap();
        prop_assert!(out.value > 0.0);
        prop_assert!(out.residual <= bem_tolerance(y));
        prop_assert!(out.iterations <= aitsahalia::schemes::BEM_MAX_ITERATIONS);
    }
}
