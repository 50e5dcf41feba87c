//! Price index options from the bundled fixtures, like the `price` command does.
//!
//! ```text
//! cargo run --release --example index_option_pricing -- [particles=20000]
//! ```
//!
//! Reads `fixtures/curve.csv`, `discount.csv`, `futures_quotes.csv` and
//! `specs.csv`, calibrates the local volatility for the reference model and
//! prints price, standard error and implied vol for every spec.

use std::path::Path;

use commodity_slv::cli::load_specs;
use commodity_slv::dupire_lv::{calibrate_local_vol, LvCalibrationConfig};
use commodity_slv::market_data::{load_discount_curve, load_futures_curve, load_quotes, BusinessCalendar, QuoteContext};
use commodity_slv::pricing::{price_futures_vanillas, IndexMarket, Underlying};
use commodity_slv::slv_mc::{ModelParams, SimConfig};
use commodity_slv::synthetic;

fn main() -> commodity_slv::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let curve = load_futures_curve(dir.join("curve.csv"), synthetic::valuation_date())?;
    let discount = load_discount_curve(dir.join("discount.csv"))?;
    let cal = BusinessCalendar::weekends_only();
    let quotes = load_quotes(dir.join("futures_quotes.csv"), QuoteContext { curve: &curve, discount: &discount, index_level: 100.0 })?;
    let specs = load_specs(&dir.join("specs.csv"), &curve)?;

    let params = ModelParams::reference();
    let fit = calibrate_local_vol(&quotes.on_futures(), &curve, &discount, params.a, &LvCalibrationConfig::default())?;
    let sim = SimConfig { n_particles: n, seed: 1, ..Default::default() };

    let (index, futures): (Vec<_>, Vec<_>) = specs.iter().copied().partition(|s| s.underlying == Underlying::Index);
    let last = index.iter().map(|s| s.expiry).max().expect("index specs");
    let months = ((last - curve.valuation_date()).num_days() / 28) as u32;
    let market = IndexMarket::with_horizon_months(curve.clone(), discount.clone(), cal.clone(), months)?;
    let (mut priced, stats) = market.price_index_options(&params, &fit.surface, &sim, &index)?;
    priced.extend(price_futures_vanillas(&params, &fit.surface, &curve, &discount, &cal, &sim, &futures)?);

    println!("{n} particles, index simulation {:.2}s", stats.seconds);
    println!("{:>10} {:>11} {:>5} {:>9} {:>10} {:>8} {:>7}", "underlying", "expiry", "type", "strike", "price", "stderr", "vol");
    for p in &priced {
        let under = match p.spec.underlying {
            Underlying::Index => "index".to_string(),
            Underlying::Futures(c) => format!("F{c}"),
        };
        let vol = p.implied_vol.map_or("-".to_string(), |v| format!("{:.2}", 100.0 * v));
        println!(
            "{under:>10} {:>11} {:>5} {:>9.3} {:>10.4} {:>8.4} {vol:>7}",
            p.spec.expiry,
            format!("{:?}", p.spec.callput).to_lowercase(),
            p.strike,
            p.price,
            p.stderr
        );
    }
    Ok(())
}
