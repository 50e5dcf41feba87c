//! Recalibrates `(a, chi, rho_v, rho)` to synthetic index quotes generated at
//! known parameters.
//!
//! ```text
//! cargo run --release --example hybrid_calibration -- [particles] [esch_budget] [subplex_budget]
//! ```

use std::time::Instant;

use commodity_slv::calibrator::{hybrid_calibrate, IndexCalibrationConfig, IndexObjective, ReducedParam};
use commodity_slv::dupire_lv::{quantize_a, CalibratedEta, EtaSource, LvCalibrationConfig, PdeGrid};
use commodity_slv::market_data::BusinessCalendar;
use commodity_slv::pricing::IndexMarket;
use commodity_slv::slv_mc::SimConfig;
use commodity_slv::synthetic;

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> commodity_slv::Result<()> {
    let (n, esch, subplex) = (arg(1, 50_000), arg(2, 300), arg(3, 200));
    let curve = synthetic::wti_like_curve(16);
    let discount = synthetic::flat_discount();
    let truth = ReducedParam::reference_calibrated();

    let true_eta = synthetic::skewed_eta(truth.a);
    let futures = synthetic::futures_quotes(&curve, &discount, &true_eta, &PdeGrid::new(250, 200, 1.0), &synthetic::futures_option_grid())?;
    let eta = CalibratedEta::new(futures, curve.clone(), discount.clone(), LvCalibrationConfig::default());

    let market = IndexMarket::with_horizon_months(curve, discount, BusinessCalendar::weekends_only(), 12)?;
    let mut cfg = IndexCalibrationConfig::default();
    cfg.sim = SimConfig { n_particles: n, seed: 11, ..Default::default() };
    cfg.hybrid.seed = 5;
    cfg.hybrid.esch.budget = esch;
    cfg.hybrid.subplex.budget = subplex;

    let quotes = synthetic::index_quote_snapshots(
        &market,
        &cfg.model_params(&truth)?,
        &*eta.surface(quantize_a(truth.a))?,
        &cfg.sim,
        &synthetic::index_option_grid(),
        0.02,
    )?;
    let objective = IndexObjective::new(&market, &eta, &quotes, cfg)?;

    let t = Instant::now();
    let f_truth = objective.loss(&truth.to_vec());
    println!("loss at truth {f_truth:.4e} ({:.2}s incl. LV fit)", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let f_seed = objective.loss(&ReducedParam { rho_v: 0.5, ..ReducedParam::reference_seed() }.to_vec());
    println!("loss at a=0.1 {f_seed:.4e} ({:.2}s)", t.elapsed().as_secs_f64());
    let t = Instant::now();
    objective.loss(&truth.to_vec());
    println!("cached evaluation {:.2}s", t.elapsed().as_secs_f64());
    if esch + subplex == 0 {
        return Ok(());
    }

    let report = hybrid_calibrate(&objective)?;
    for (stage, p, f) in [("start", report.start, report.start_loss), ("ESCH", report.global, report.global_loss), ("Subplex", report.params, report.loss)] {
        println!("{stage:>8}: a={:.5} chi={:.5} rho_v={:+.5} rho={:.5}  loss {f:.4e}", p.a, p.chi, p.rho_v, p.rho);
    }
    println!(
        "truth a={:.4} rho={:.4}; fitted a={:.4} rho={:.4}; {} evals in {:.0}s",
        truth.a, truth.rho, report.params.a, report.params.rho, report.n_evals, report.seconds
    );
    Ok(())
}
