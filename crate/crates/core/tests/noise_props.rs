use aitsahalia::NoisePath;
use proptest::prelude::*;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[test]
fn brownian_variance_and_independence() {
    let h = 2f64.powi(-8);
    let n = 200_000;
    let p = NoisePath::generate(101, 0, n, h, 1.0).unwrap();
    assert!((var(&p.dw) / h - 1.0).abs() < 0.05);
    assert!(mean(&p.dw).abs() < 4.0 * (h / n as f64).sqrt());

    // lag-one covariance is zero within three standard errors
    let cov: Vec<f64> = p.dw.windows(2).map(|w| w[0] * w[1]).collect();
    let se = (var(&cov) / cov.len() as f64).sqrt();
    assert!(mean(&cov).abs() < 3.0 * se, "{} vs {}", mean(&cov), se);

    let dn: Vec<f64> = p.dn.iter().map(|&k| k as f64).collect();
    let (mw, mn) = (mean(&p.dw), mean(&dn));
    let c = p.dw.iter().zip(&dn).map(|(a, b)| (a - mw) * (b - mn)).sum::<f64>() / (n - 1) as f64;
    let corr = c / (var(&p.dw) * var(&dn)).sqrt();
    assert!(corr.abs() < 0.02, "corr {corr}");
}

#[test]
fn paths_are_independent() {
    let h = 0.01;
    let a = NoisePath::generate(5, 0, 100_000, h, 1.0).unwrap();
    let b = NoisePath::generate(5, 1, 100_000, h, 1.0).unwrap();
    let prod: Vec<f64> = a.dw.iter().zip(&b.dw).map(|(x, y)| x * y).collect();
    let se = (var(&prod) / prod.len() as f64).sqrt();
    assert!(mean(&prod).abs() < 3.0 * se);
    assert_ne!(a.dw[..10], b.dw[..10]);
}

#[test]
fn poisson_totals_follow_the_clt() {
    let (lambda, h, n, paths) = (1.0, 2f64.powi(-10), 1024, 400);
    let totals: Vec<f64> = (0..paths)
        .map(|i| NoisePath::generate(17, i, n, h, lambda).unwrap().dn.iter().sum::<u32>() as f64)
        .collect();
    let t = lambda * h * n as f64;
    let se = (t / paths as f64).sqrt();
    assert!((mean(&totals) - t).abs() < 4.0 * se, "{} vs {t}", mean(&totals));
    assert!((var(&totals) / t - 1.0).abs() < 0.2);
}

#[test]
fn large_intensity_uses_normal_approximation_with_right_moments() {
    let h = 1.0;
    let p = NoisePath::generate(9, 0, 50_000, h, 40.0).unwrap();
    let dn: Vec<f64> = p.dn.iter().map(|&k| k as f64).collect();
    assert!((mean(&dn) / 40.0 - 1.0).abs() < 0.01);
    assert!((var(&dn) / 40.0 - 1.0).abs() < 0.05);
}

#[test]
fn dump_round_trip() {
    let p = NoisePath::generate(1, 2, 300, 0.125, 2.0).unwrap().coarsen(3).unwrap();
    let mut buf = Vec::new();
    p.write_to(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"ASNP");
    let back = NoisePath::read_from(buf.as_slice()).unwrap();
    assert_eq!(back, p);
    assert!(NoisePath::read_from(&buf[..buf.len() - 1]).is_err());
}

proptest! {
    #[test]
    fn coarsening_is_associative(seed in any::<u64>(), a in 1usize..6, b in 1usize..6, blocks in 1usize..20) {
        let fine = NoisePath::generate(seed, 0, a * b * blocks, 1e-3, 3.0).unwrap();
        let two = fine.coarsen(a).unwrap().coarsen(b).unwrap();
        let one = fine.coarsen(a * b).unwrap();
        prop_assert_eq!(&two.dn, &one.dn);
        for (k, (x, y)) in two.dw.iter().zip(&one.dw).enumerate() {
            let mass: f64 = fine.dw[k * a * b..(k + 1) * a * b].iter().map(|v| v.abs()).sum();
            prop_assert!((x - y).abs() <= 1e-15 * mass.max(f64::MIN_POSITIVE) * (a * b) as f64);
        }
        prop_assert!((two.h - one.h).abs() <= 1e-15 * one.h);
        prop_assert_eq!(two.fine_checksum, fine.fine_checksum);
    }

    #[test]
    fn coarsening_conserves_totals(seed in any::<u64>(), factor in 1usize..64, blocks in 1usize..32) {
        let fine = NoisePath::generate(seed, 3, factor * blocks, 2f64.powi(-14), 1.0).unwrap();
        let coarse = fine.coarsen(factor).unwrap();
        prop_assert_eq!(coarse.dn.iter().sum::<u32>(), fine.dn.iter().sum::<u32>());
        let mass: f64 = fine.dw.iter().map(|v| v.abs()).sum();
        let diff = coarse.dw.iter().sum::<f64>() - fine.dw.iter().sum::<f64>();
        prop_assert!(diff.abs() <= 1e-15 * mass * (fine.len() as f64).sqrt().max(1.0));
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), path in any::<u64>()) {
        let a = NoisePath::generate(seed, path, 16, 0.1, 1.0).unwrap();
        let b = NoisePath::generate(seed, path, 16, 0.1, 1.0).unwrap();
        prop_assert_eq!(a, b);
    }
}
