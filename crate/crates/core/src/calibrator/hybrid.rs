use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::esch::{esch_minimize, EschConfig};
use super::subplex::{subplex_minimize, SubplexConfig};
use super::Bounds;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    pub seed: u64,
    pub esch: EschConfig,
    pub subplex: SubplexConfig,
    /// Subplex initial step as a fraction of each bound width.
    pub subplex_scale: f64,
    /// Skip the random start and begin from this point (previous-day parameters).
    pub warm_start: Option<Vec<f64>>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            esch: EschConfig::default(),
            subplex: SubplexConfig::default(),
            subplex_scale: 0.1,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub p0: Vec<f64>,
    pub f0: f64,
    pub p1: Vec<f64>,
    pub f1: f64,
    pub p2: Vec<f64>,
    pub f2: f64,
    /// Best-so-far loss after every evaluation, starting with `f(p0)`.
    pub loss_trace: Vec<f64>,
    pub n_evals: usize,
    pub seconds: f64,
}

/// Global ESCH search from a random (or warm) start followed by a local
/// Subplex refinement. An ESCH budget of zero runs the local stage only.
pub fn hybrid_minimize<F>(f: F, bounds: &Bounds, cfg: &HybridConfig) -> Result<HybridResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let started = Instant::now();
    let p0 = match &cfg.warm_start {
        Some(x) => {
            bounds.check(x)?;
            x.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..bounds.dim()).map(|d| bounds.sample(d, &mut rng)).collect()
        }
    };
    let f0 = f(&p0);
    let mut trace = vec![f0];
    let mut n_evals = 1;

    let (p1, f1) = if cfg.esch.budget == 0 {
        (p0.clone(), f0)
    } else {
        let esch_cfg = EschConfig {
            seed: cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
            ..cfg.esch.clone()
        };
        let r = esch_minimize(&f, bounds, Some(&p0), &esch_cfg)?;
        n_evals += r.evaluations;
        trace.extend(r.trace.iter().map(|v| v.min(f0)));
        if r.f <= f0 {
            (r.x, r.f)
        } else {
            (p0.clone(), f0)
        }
    };

    let (p2, f2) = if cfg.subplex.budget == 0 {
        (p1.clone(), f1)
    } else {
        let scale: Vec<f64> = bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .map(|(l, u)| cfg.subplex_scale * (u - l))
            .collect();
        let r = subplex_minimize(&f, &p1, &scale, Some(bounds), &cfg.subplex)?;
        n_evals += r.evaluations;
        trace.extend(r.trace.iter().map(|v| v.min(f1)));
        if r.f <= f1 {
            (r.x, r.f)
        } else {
            (p1.clone(), f1)
        }
    };

    Ok(HybridResult {
        p0,
        f0,
        p1,
        f1,
        p2,
        f2,
        loss_trace: trace,
        n_evals,
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bumpy(x: &[f64]) -> f64 {
        x.iter()
            .map(|v| (v - 0.3).powi(2) + 0.05 * (1.0 - (20.0 * (v - 0.3)).cos()))
            .sum()
    }

    #[test]
    fn stages_are_monotone() {
        let b = Bounds::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        for seed in 0..5 {
            let cfg = HybridConfig {
                seed,
                esch: EschConfig { budget: 300, ..Default::default() },
                subplex: SubplexConfig { budget: 300, ..Default::default() },
                ..Default::default()
            };
            let r = hybrid_minimize(bumpy, &b, &cfg).unwrap();
            assert!(r.f2 <= r.f1 && r.f1 <= r.f0, "{r:?}");
            assert!(r.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn zero_budget_returns_start() {
        let b = Bounds::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let cfg = HybridConfig {
            seed: 3,
            esch: EschConfig { budget: 0, ..Default::default() },
            subplex: SubplexConfig { budget: 0, ..Default::default() },
            ..Default::default()
        };
        let r = hybrid_minimize(bumpy, &b, &cfg).unwrap();
        assert_eq!(r.p2, r.p0);
        assert_eq!(r.f2, bumpy(&r.p0));
        assert_eq!(r.n_evals, 1);
    }

    #[test]
    fn warm_start_skips_global_stage() {
        let b = Bounds::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let cfg = HybridConfig {
            warm_start: Some(vec![0.35, 0.25]),
            esch: EschConfig { budget: 0, ..Default::default() },
            subplex: SubplexConfig { budget: 400, ..Default::default() },
            subplex_scale: 0.02,
            ..Default::default()
        };
        let r = hybrid_minimize(bumpy, &b, &cfg).unwrap();
        assert_eq!(r.p0, vec![0.35, 0.25]);
        assert_eq!(r.p1, r.p0);
        assert!(r.f2 < 1e-8, "{}", r.f2);
    }
}
