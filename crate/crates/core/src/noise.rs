//! Brownian and Poisson increments on a fine grid.
//!
//! Every path draws from two substreams keyed by `(seed, path_index, tag)`,
//! so paths can be generated in any order on any thread with identical
//! results. Coarser grids are obtained by summing consecutive fine
//! increments, which couples a coarse simulation to the fine reference run
//! on the same underlying path.

use std::io::{self, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const TAG_BROWNIAN: u64 = 0x5752_4e52; // "WRNR"
const TAG_POISSON: u64 = 0x504f_4953; // "POIS"

/// Above this mean the Poisson sampler switches to a normal approximation.
pub const POISSON_INVERSION_LIMIT: f64 = 10.0;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one process of one path.
pub fn substream(seed: u64, path_index: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed) ^ splitmix64(tag.rotate_left(17));
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path_index);
    rng
}

/// Poisson(mean) by sequential-search inversion.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    if mean > POISSON_INVERSION_LIMIT {
        let z: f64 = rng.sample(StandardNormal);
        return (mean + mean.sqrt() * z).round().max(0.0) as u32;
    }
    let u: f64 = rng.random();
    let mut k = 0u32;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // the tail beyond k = 200 is below 1e-100 for mean <= 10
    while u > cdf && k < 200 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

fn checksum(dw: &[f64], dn: &[u32]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325;
    for w in dw {
        h = fnv1a(h, &w.to_bits().to_le_bytes());
    }
    for n in dn {
        h = fnv1a(h, &n.to_le_bytes());
    }
    h
}

/// Increments of `W` and `N` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    /// Step of this grid.
    pub h: f64,
    pub dw: Vec<f64>,
    pub dn: Vec<u32>,
    pub seed: u64,
    pub path_index: u64,
    /// Checksum of the finest-grid increments this path was derived from.
    pub fine_checksum: u64,
}

impl NoisePath {
    pub fn generate(seed: u64, path_index: u64, n: usize, h: f64, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n_fine", "need at least one step"));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid("h_fine", format!("must be > 0, got {h}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")));
        }
        let mean = lambda * h;
        if mean > POISSON_INVERSION_LIMIT {
            log::warn!("lambda*h = {mean} > {POISSON_INVERSION_LIMIT}: Poisson increments use a normal approximation");
        }
        let mut w_rng = substream(seed, path_index, TAG_BROWNIAN);
        let mut n_rng = substream(seed, path_index, TAG_POISSON);
        let sd = h.sqrt();
        let dw: Vec<f64> = (0..n)
            .map(|_| sd * w_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let dn: Vec<u32> = (0..n).map(|_| sample_poisson(&mut n_rng, mean)).collect();
        let fine_checksum = checksum(&dw, &dn);
        Ok(NoisePath {
            h,
            dw,
            dn,
            seed,
            path_index,
            fine_checksum,
        })
    }

    pub fn len(&self) -> usize {
        self.dw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dw.is_empty()
    }

    /// Sums each run of `factor` consecutive increments, left to right.
    pub fn coarsen(&self, factor: usize) -> Result<NoisePath> {
        let n = self.len();
        if factor == 0 || !n.is_multiple_of(factor) {
            return Err(Error::Divisibility { count: n, factor });
        }
        Ok(self.coarsen_prefix(factor, n / factor))
    }

    /// Coarsens the first `steps * factor` increments into `steps` increments.
    ///
    /// # Panics
    /// If `factor` is zero or the path is shorter than `steps * factor`.
    pub fn coarsen_prefix(&self, factor: usize, steps: usize) -> NoisePath {
        assert!(factor > 0 && steps * factor <= self.len());
        let used = steps * factor;
        let dw = self.dw[..used]
            .chunks_exact(factor)
            .map(|c| c.iter().fold(0.0, |acc, &x| acc + x))
            .collect();
        let dn = self.dn[..used].chunks_exact(factor).map(|c| c.iter().sum()).collect();
        NoisePath {
            h: self.h * factor as f64,
            dw,
            dn,
            seed: self.seed,
            path_index: self.path_index,
            fine_checksum: self.fine_checksum,
        }
    }

    /// Checksum of this grid's own increments.
    pub fn checksum(&self) -> u64 {
        checksum(&self.dw, &self.dn)
    }

    /// Writes the binary dump described in `docs/noise-format.md`.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&self.h.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.path_index.to_le_bytes())?;
        w.write_all(&self.fine_checksum.to_le_bytes())?;
        w.write_all(&(self.dw.len() as u64).to_le_bytes())?;
        for x in &self.dw {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(self.dn.len() as u64).to_le_bytes())?;
        for k in &self.dn {
            w.write_all(&k.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(bad("not a noise dump"));
        }
        if read_u32(&mut r)? != DUMP_VERSION {
            return Err(bad("unsupported noise dump version"));
        }
        let h = f64::from_bits(read_u64(&mut r)?);
        let seed = read_u64(&mut r)?;
        let path_index = read_u64(&mut r)?;
        let fine_checksum = read_u64(&mut r)?;
        let n = read_u64(&mut r)? as usize;
        let dw = (0..n)
            .map(|_| read_u64(&mut r).map(f64::from_bits))
            .collect::<io::Result<Vec<_>>>()?;
        let m = read_u64(&mut r)? as usize;
        if m != n {
            return Err(bad("dW and dN lengths differ"));
        }
        let dn = (0..m).map(|_| read_u32(&mut r)).collect::<io::Result<Vec<_>>>()?;
        Ok(NoisePath {
            h,
            dw,
            dn,
            seed,
            path_index,
            fine_checksum,
        })
    }
}

const DUMP_MAGIC: &[u8; 4] = b"ASNP";
const DUMP_VERSION: u32 = 1;

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(dw: Vec<f64>, dn: Vec<u32>) -> NoisePath {
        NoisePath {
            h: 0.25,
            fine_checksum: checksum(&dw, &dn),
            dw,
            dn,
            seed: 1,
            path_index: 0,
        }
    }

    #[test]
    fn deterministic() {
        let a = NoisePath::generate(7, 3, 1000, 1e-3, 1.0).unwrap();
        let b = NoisePath::generate(7, 3, 1000, 1e-3, 1.0).unwrap();
        assert_eq!(a, b);
        let c = NoisePath::generate(7, 4, 1000, 1e-3, 1.0).unwrap();
        assert_ne!(a.dw, c.dw);
    }

    #[test]
    fn coarsen_sums_pairs() {
        let (a, b, c, d) = (0.1, -0.7, 0.3, 1e-3);
        let p = path(vec![a, b, c, d], vec![0, 1, 2, 0]);
        let q = p.coarsen(2).unwrap();
        assert_eq!(q.dw, vec![a + b, c + d]);
        assert_eq!(q.dn, vec![1, 2]);
        assert_eq!(q.h, 0.5);
        assert_eq!(q.fine_checksum, p.fine_checksum);
        let all = p.coarsen(4).unwrap();
        assert_eq!(all.dw, vec![((a + b) + c) + d]);
        assert_eq!(all.dn, vec![3]);
    }

    #[test]
    fn coarsen_divisibility() {
        let p = path(vec![0.0; 6], vec![0; 6]);
        assert!(matches!(p.coarsen(4), Err(Error::Divisibility { count: 6, factor: 4 })));
        assert!(p.coarsen(0).is_err());
        assert!(p.coarsen(3).is_ok());
    }

    #[test]
    fn generate_rejects_bad_input() {
        assert!(NoisePath::generate(0, 0, 0, 0.1, 1.0).is_err());
        assert!(NoisePath::generate(0, 0, 10, 0.0, 1.0).is_err());
        assert!(NoisePath::generate(0, 0, 10, 0.1, 0.0).is_err());
    }

    #[test]
    fn poisson_inversion_small_means() {
        let mut rng = substream(11, 0, TAG_POISSON);
        let mean = 2.5;
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_poisson(&mut rng, mean) as f64).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - mean).abs() < 0.02, "mean {m}");
        assert!((var - mean).abs() < 0.05, "var {var}");
        assert_eq!(sample_poisson(&mut rng, 0.0), 0);
        // normal fallback stays non-negative and centred
        let big: f64 = (0..10_000).map(|_| sample_poisson(&mut rng, 50.0) as f64).sum::<f64>() / 1e4;
        assert!((big - 50.0).abs() < 0.5);
    }

    #[test]
    fn dump_round_trip() {
        let p = NoisePath::generate(5, 9, 64, 2f64.powi(-6), 3.0).unwrap();
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 * 4 + 8 + 64 * 8 + 8 + 64 * 4);
        let q = NoisePath::read_from(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        buf[0] = b'X';
        assert!(NoisePath::read_from(buf.as_slice()).is_err());
    }
}
