//! Fit a local volatility surface to futures option quotes and print it.
//!
//! ```text
//! cargo run --release --example lv_calibration -- [a=0.3]
//! ```
//!
//! Quotes are priced off a skewed surface, so the fit should recover it on
//! the quoted region.

use commodity_slv::dupire_lv::{calibrate_local_vol, LvCalibrationConfig, PdeGrid};
use commodity_slv::synthetic;

fn main() -> commodity_slv::Result<()> {
    let a: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let curve = synthetic::wti_like_curve(16);
    let discount = synthetic::flat_discount();
    let truth = synthetic::skewed_eta(a);
    let quotes = synthetic::futures_quotes(&curve, &discount, &truth, &PdeGrid::new(250, 200, 1.0), &synthetic::futures_option_grid())?;

    let started = std::time::Instant::now();
    let fit = calibrate_local_vol(&quotes, &curve, &discount, a, &LvCalibrationConfig::default())?;
    println!(
        "a={a}: {} quotes fitted, {} excluded, {} PDE solves in {:.2}s",
        fit.fitted.len(),
        fit.excluded.len(),
        fit.pde_solves,
        started.elapsed().as_secs_f64()
    );
    for w in &fit.warnings {
        println!("warning: {w}");
    }

    let s = &fit.surface;
    print!("{:>8}", "t \\ k");
    for k in &s.strike_knots {
        print!("{k:>8.3}");
    }
    println!();
    for (t, row) in s.time_knots.iter().zip(&s.values) {
        print!("{t:>8.3}");
        for v in row {
            print!("{v:>8.4}");
        }
        println!();
    }
    let worst = fit.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    println!("max |model - market| = {worst:.2e}");
    Ok(())
}
