//! ESCH evolutionary search: uniform initial parents, single-point crossover,
//! one-coordinate Cauchy mutation and elitist (parents + offspring) selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Bounds, OptimResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EschConfig {
    pub parents: usize,
    pub offspring: usize,
    /// Maximum number of objective evaluations, initial parents included.
    pub budget: usize,
    pub seed: u64,
    /// Cauchy scale as a fraction of each coordinate's bound width.
    pub cauchy_scale: f64,
}

impl Default for EschConfig {
    fn default() -> Self {
        Self {
            parents: 20,
            offspring: 40,
            budget: 5_000,
            seed: 0,
            cauchy_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
struct Individual {
    x: Vec<f64>,
    f: f64,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Population-based global search over a box.
///
/// `x0`, when given, replaces the first random parent. Offspring of one
/// generation are evaluated in parallel; results do not depend on the number
/// of threads.
pub fn esch_minimize<F>(f: F, bounds: &Bounds, x0: Option<&[f64]>, cfg: &EschConfig) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = bounds.dim();
    if n == 0 {
        return Err(Error::config("ESCH needs at least one coordinate"));
    }
    if cfg.parents == 0 || cfg.offspring == 0 {
        return Err(Error::config("ESCH population sizes must be positive"));
    }
    if cfg.budget < cfg.parents + cfg.offspring {
        return Err(Error::config(format!(
            "ESCH budget {} smaller than one generation ({} parents + {} offspring)",
            cfg.budget, cfg.parents, cfg.offspring
        )));
    }
    if let Some(x) = x0 {
        bounds.check(x)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut initial: Vec<Vec<f64>> = (0..cfg.parents)
        .map(|_| (0..n).map(|d| bounds.sample(d, &mut rng)).collect())
        .collect();
    if let Some(x) = x0 {
        initial[0] = x.to_vec();
    }
    let mut parents: Vec<Individual> = initial
        .into_par_iter()
        .map(|x| {
            let v = sanitize(f(&x));
            Individual { x, f: v }
        })
        .collect();
    let mut evaluations = parents.len();
    let mut best_f = f64::INFINITY;
    let mut trace = Vec::with_capacity(cfg.budget);
    for p in &parents {
        best_f = best_f.min(p.f);
        trace.push(best_f);
    }

    while evaluations < cfg.budget {
        let count = cfg.offspring.min(cfg.budget - evaluations);
        let children: Vec<Vec<f64>> = (0..count)
            .map(|_| {
                let i = rng.random_range(0..parents.len());
                let mut j = rng.random_range(0..parents.len());
                if parents.len() > 1 {
                    while j == i {
                        j = rng.random_range(0..parents.len());
                    }
                }
                let cut = rng.random_range(0..n);
                let mut child: Vec<f64> = parents[i].x[..cut]
                    .iter()
                    .chain(&parents[j].x[cut..])
                    .copied()
                    .collect();
                let pos = rng.random_range(0..n);
                let width = bounds.upper[pos] - bounds.lower[pos];
                let mut mutated = child[pos];
                for _ in 0..32 {
                    let u: f64 = rng.random();
                    let step = cfg.cauchy_scale * width * (std::f64::consts::PI * (u - 0.5)).tan();
                    mutated = child[pos] + step;
                    if mutated >= bounds.lower[pos] && mutated <= bounds.upper[pos] {
                        break;
                    }
                }
                child[pos] = mutated.clamp(bounds.lower[pos], bounds.upper[pos]);
                child
            })
            .collect();
        let scored: Vec<Individual> = children
            .into_par_iter()
            .map(|x| {
                let v = sanitize(f(&x));
                Individual { x, f: v }
            })
            .collect();
        evaluations += scored.len();
        for c in &scored {
            best_f = best_f.min(c.f);
            trace.push(best_f);
        }
        parents.extend(scored);
        parents.sort_by(|a, b| a.f.total_cmp(&b.f));
        parents.truncate(cfg.parents);
    }

    let best = parents
        .iter()
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .expect("non-empty population");
    Ok(OptimResult {
        x: best.x.clone(),
        f: best.f,
        evaluations,
        improved: x0.is_none() || best.f < trace[0],
        converged: false,
        trace,
    })
}
