//! Per-particle random streams and correlated Brownian increments.
//!
//! Particle `i` owns ChaCha8 stream `i` under the run seed. Every time step
//! consumes exactly four 64-bit words (eight 32-bit words), so the normal for
//! `(seed, particle, step, channel)` always sits at the same stream position,
//! whatever the thread count or the order in which particles are visited.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{shared_psd, VarianceCoupling};
use crate::error::{Error, Result};

/// Stream words consumed per particle and step.
pub const WORDS_PER_STEP: u128 = 8;

#[derive(Debug, Clone)]
pub struct ParticleRng {
    inner: ChaCha8Rng,
}

impl ParticleRng {
    pub fn new(seed: u64, particle: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(particle);
        Self { inner }
    }

    /// Positions the stream at the start of `step`.
    pub fn seek(&mut self, step: u64) {
        self.inner.set_word_pos(step as u128 * WORDS_PER_STEP);
    }

    fn open_unit(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Four independent standard normals (Box-Muller on two uniform pairs).
    pub fn normals(&mut self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for pair in out.chunks_exact_mut(2) {
            let r = (-2.0 * self.open_unit().ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * self.open_unit()).sin_cos();
            pair[0] = r * c;
            pair[1] = r * s;
        }
        out
    }
}

/// Independent seed for a named subsystem: FNV-1a of `label` mixed into
/// `seed` with a SplitMix64 finalizer. Stable across platforms and releases.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lower-triangular `L` with `L L^T = m` for a positive semi-definite `m`.
/// Zero pivots give zero columns.
pub fn cholesky_psd<const N: usize>(m: &[[f64; N]; N]) -> Result<[[f64; N]; N]> {
    let mut l = [[0.0; N]; N];
    for j in 0..N {
        let d = m[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -1e-10 {
            return Err(Error::param("matrix is not positive semi-definite"));
        }
        if d <= 1e-14 {
            for i in j + 1..N {
                let r = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if r.abs() > 1e-7 {
                    return Err(Error::param("matrix is not positive semi-definite"));
                }
            }
            continue;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..N {
            l[i][j] = (m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    Ok(l)
}

/// Brownian increments for one particle and step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Increments {
    pub c: f64,
    pub f: f64,
    /// Variance driver of factor `c` (the only one under a shared variance).
    pub v_c: f64,
    pub v_f: f64,
}

/// Maps four independent normals to correlated increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationFactor {
    l: [[f64; 3]; 3],
    coupling: VarianceCoupling,
    rho_v: f64,
}

impl CorrelationFactor {
    pub fn new(rho: f64, rho_v: f64, coupling: VarianceCoupling) -> Result<Self> {
        let l = match coupling {
            VarianceCoupling::Shared => {
                if !shared_psd(rho, rho_v) {
                    return Err(Error::param(format!(
                        "correlation matrix not positive semi-definite: rho={rho}, rho_v={rho_v}"
                    )));
                }
                cholesky_psd(&[[1.0, rho, rho_v], [rho, 1.0, rho_v], [rho_v, rho_v, 1.0]])?
            }
            VarianceCoupling::PerFactor => {
                if !(rho.abs() <= 1.0 && rho_v.abs() <= 1.0) {
                    return Err(Error::param("correlations must lie in [-1, 1]"));
                }
                let two = cholesky_psd(&[[1.0, rho], [rho, 1.0]])?;
                [[two[0][0], 0.0, 0.0], [two[1][0], two[1][1], 0.0], [0.0, 0.0, 0.0]]
            }
        };
        Ok(Self { l, coupling, rho_v })
    }

    pub fn apply(&self, z: [f64; 4], sqrt_dt: f64) -> Increments {
        let l = &self.l;
        let c = l[0][0] * z[0];
        let f = l[1][0] * z[0] + l[1][1] * z[1];
        match self.coupling {
            VarianceCoupling::Shared => {
                let v = l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2];
                Increments { c: c * sqrt_dt, f: f * sqrt_dt, v_c: v * sqrt_dt, v_f: v * sqrt_dt }
            }
            VarianceCoupling::PerFactor => {
                let perp = (1.0 - self.rho_v * self.rho_v).max(0.0).sqrt();
                Increments {
                    c: c * sqrt_dt,
                    f: f * sqrt_dt,
                    v_c: (self.rho_v * c + perp * z[2]) * sqrt_dt,
                    v_f: (self.rho_v * f + perp * z[3]) * sqrt_dt,
                }
            }
        }
    }
}

/// `(dW^c, dW^f, dW^v)` with covariance `dt * [[1,rho,rho_v],[rho,1,rho_v],[rho_v,rho_v,1]]`.
pub fn correlated_increments(rho: f64, rho_v: f64, dt: f64, rng: &mut ParticleRng) -> Result<(f64, f64, f64)> {
    let inc = CorrelationFactor::new(rho, rho_v, VarianceCoupling::Shared)?.apply(rng.normals(), dt.sqrt());
    Ok((inc.c, inc.f, inc.v_c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(7, "sim"), derive_seed(7, "sim"));
        assert_ne!(derive_seed(7, "sim"), derive_seed(7, "hybrid"));
        assert_ne!(derive_seed(7, "sim"), derive_seed(8, "sim"));
    }

    fn sample_corr(xs: &[(f64, f64)]) -> f64 {
        let n = xs.len() as f64;
        let (mx, my) = xs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn seek_reproduces_stream() {
        let mut a = ParticleRng::new(5, 17);
        let draws: Vec<[f64; 4]> = (0..10).map(|_| a.normals()).collect();
        let mut b = ParticleRng::new(5, 17);
        b.seek(7);
        assert_eq!(b.normals(), draws[7]);
        let mut other = ParticleRng::new(5, 18);
        assert_ne!(other.normals(), draws[0]);
    }

    #[test]
    fn independent_when_uncorrelated() {
        let n = 200_000;
        let mut rng = ParticleRng::new(1, 0);
        let draws: Vec<(f64, f64, f64)> = (0..n).map(|_| correlated_increments(0.0, 0.0, 0.01, &mut rng).unwrap()).collect();
        let bound = 3.0 / (n as f64).sqrt();
        let cf: Vec<_> = draws.iter().map(|d| (d.0, d.1)).collect();
        let cv: Vec<_> = draws.iter().map(|d| (d.0, d.2)).collect();
        let fv: Vec<_> = draws.iter().map(|d| (d.1, d.2)).collect();
        for c in [sample_corr(&cf), sample_corr(&cv), sample_corr(&fv)] {
            assert!(c.abs() < bound, "{c}");
        }
        let var = draws.iter().map(|d| d.0 * d.0).sum::<f64>() / n as f64;
        assert!((var - 0.01).abs() < 0.01 * 5.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn perfect_correlation_is_exact() {
        let mut rng = ParticleRng::new(2, 3);
        for _ in 0..1000 {
            let (c, f, _) = correlated_increments(1.0, 0.5, 0.02, &mut rng).unwrap();
            assert_eq!(c, f);
        }
    }

    #[test]
    fn front_second_correlation_matches_input() {
        let n = 1_000_000;
        let mut rng = ParticleRng::new(3, 0);
        let xs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let (c, f, _) = correlated_increments(0.9, 0.0, 1.0 / 250.0, &mut rng).unwrap();
                (c, f)
            })
            .collect();
        assert!((sample_corr(&xs) - 0.9).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn per_factor_variance_noises() {
        let n = 200_000;
        let cf = CorrelationFactor::new(0.9, 1.0, VarianceCoupling::PerFactor).unwrap();
        let mut rng = ParticleRng::new(4, 0);
        let incs: Vec<Increments> = (0..n).map(|_| cf.apply(rng.normals(), 1.0)).collect();
        assert!(incs.iter().all(|i| i.v_c == i.c && i.v_f == i.f));
        let cf = CorrelationFactor::new(0.0, 0.5, VarianceCoupling::PerFactor).unwrap();
        let pairs: Vec<(f64, f64)> = (0..n).map(|_| cf.apply(rng.normals(), 1.0)).map(|i| (i.c, i.v_c)).collect();
        assert!((sample_corr(&pairs) - 0.5).abs() < 0.01);
    }

    #[test]
    fn non_psd_rejected() {
        assert!(CorrelationFactor::new(0.0, 1.0, VarianceCoupling::Shared).is_err());
        assert!(cholesky_psd(&[[1.0, 2.0], [2.0, 1.0]]).is_err());
    }
}
