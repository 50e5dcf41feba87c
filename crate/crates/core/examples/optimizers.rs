//! The derivative-free optimizers on textbook test functions.
//!
//! ```text
//! cargo run --release --example optimizers -- [seed=1]
//! ```

use commodity_slv::calibrator::{esch_minimize, hybrid_minimize, subplex_minimize, Bounds, EschConfig, HybridConfig, SubplexConfig};

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos()).sum::<f64>()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
}

fn main() -> commodity_slv::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let bounds = Bounds::new(vec![-5.12; 4], vec![5.12; 4])?;

    let esch = esch_minimize(rastrigin, &bounds, None, &EschConfig { budget: 20_000, seed, ..Default::default() })?;
    println!("ESCH on 4-d Rastrigin: f={:.3e} at {:.4?} after {} evaluations", esch.f, esch.x, esch.evaluations);

    let sub = subplex_minimize(rosenbrock, &[-1.2, 1.0, -1.2, 1.0], &[0.5; 4], None, &SubplexConfig { budget: 20_000, ..Default::default() })?;
    println!("Subplex on 4-d Rosenbrock: f={:.3e} at {:.6?} after {} evaluations", sub.f, sub.x, sub.evaluations);

    let mut cfg = HybridConfig { seed, ..Default::default() };
    cfg.esch.budget = 3_000;
    cfg.subplex.budget = 2_000;
    let both = |x: &[f64]| rastrigin(x) + rosenbrock(x);
    let h = hybrid_minimize(both, &bounds, &cfg)?;
    println!(
        "hybrid on Rastrigin + Rosenbrock: start {:.3} -> ESCH {:.3} -> Subplex {:.3e}, {} evaluations in {:.2}s",
        h.f0, h.f1, h.f2, h.n_evals, h.seconds
    );
    Ok(())
}
