//! One-parameter scans of index ATM vols and the one-year smile.
//!
//! ```text
//! cargo run --release --example sensitivity_scan -- <param> <v1,v2,...> [particles] [flat|skew] [shared|per_factor]
//! ```
//!
//! The local volatility is calibrated, for every `a`, to futures options
//! generated from either a flat or a skewed surface.

use commodity_slv::dupire_lv::{CalibratedEta, LocalVolSurface, LvCalibrationConfig, PdeGrid};
use commodity_slv::market_data::BusinessCalendar;
use commodity_slv::pricing::{sensitivity_scan, IndexMarket, ScanGrid, ScanParam};
use commodity_slv::slv_mc::{ModelParams, SimConfig, VarianceCoupling};
use commodity_slv::synthetic;

fn main() -> commodity_slv::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let param: ScanParam = args.get(1).map(String::as_str).unwrap_or("rho").parse()?;
    let values: Vec<f64> =
        args.get(2).map(String::as_str).unwrap_or("-1,1").split(',').map(|v| v.parse().expect("numeric value")).collect();
    let n: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let skew = args.get(4).map(String::as_str) == Some("skew");
    let coupling = match args.get(5).map(String::as_str) {
        Some("per_factor") => VarianceCoupling::PerFactor,
        _ => VarianceCoupling::Shared,
    };

    let curve = synthetic::wti_like_curve(16);
    let discount = synthetic::flat_discount();
    let base = ModelParams::reference().with_coupling(coupling)?;
    let source = if skew { synthetic::skewed_eta(base.a) } else { LocalVolSurface::flat(0.3, base.a) };
    let quotes = synthetic::futures_quotes(&curve, &discount, &source, &PdeGrid::new(250, 200, 1.0), &synthetic::futures_option_grid())?;
    let eta = CalibratedEta::new(quotes, curve.clone(), discount.clone(), LvCalibrationConfig::default());
    let market = IndexMarket::with_horizon_months(curve, discount, BusinessCalendar::weekends_only(), 12)?;
    let grid = ScanGrid::default();
    let sim = SimConfig { n_particles: n, seed: 2024, ..Default::default() };

    let report = sensitivity_scan(&base, &eta, &market, param, &values, &grid, &sim)?;
    let pct = |v: &Option<f64>| v.map_or("   nan".to_string(), |x| format!("{:6.2}", 100.0 * x));
    println!("{param} scan, N={n}, {} market", if skew { "skewed" } else { "flat" });
    print!("{:>8}", "months");
    for m in &grid.maturities_months {
        print!("{m:>7}");
    }
    println!();
    for e in &report.entries {
        print!("{:>8}", e.value);
        for v in &e.atm_vols {
            print!(" {}", pct(v));
        }
        println!();
    }
    println!("one-year smile");
    for e in &report.entries {
        print!("{:>8}", e.value);
        for v in &e.smile_vols {
            print!(" {}", pct(v));
        }
        let at = |m: f64| grid.moneyness.iter().position(|x| (*x - m).abs() < 1e-12).and_then(|i| e.smile_vols[i]);
        if let (Some(lo), Some(hi)) = (at(0.9), at(1.1)) {
            print!("   slope 0.9->1.1: {:+.4}", (hi - lo) / 0.2);
        }
        println!();
    }
    Ok(())
}
