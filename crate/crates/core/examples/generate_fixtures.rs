//! Regenerates the files under `fixtures/`.
//!
//! ```text
//! cargo run --release --example generate_fixtures [-- <dir>]
//! ```
//!
//! Futures quotes come from a flat `eta = 0.25` at `a = 0.3`. Index quotes
//! are two snapshots at 0.98x and 1.02x the model prices under
//! `ReducedParam::reference_calibrated()`, with `eta` recalibrated to the
//! futures quotes and the simulation seed the CLI derives from `seed = 1`.

use std::fs::File;
use std::path::PathBuf;

use commodity_slv::calibrator::{IndexCalibrationConfig, ReducedParam};
use commodity_slv::dupire_lv::{quantize_a, CalibratedEta, EtaSource, LocalVolSurface, LvCalibrationConfig, PdeGrid};
use commodity_slv::market_data::quotes::write_quotes;
use commodity_slv::market_data::{BusinessCalendar, QuoteSet};
use commodity_slv::pricing::IndexMarket;
use commodity_slv::slv_mc::{derive_seed, SimConfig};
use commodity_slv::{synthetic, Error, Result};

const CONTRACTS: usize = 16;
const SEED: u64 = 1;
const PARTICLES: usize = 20_000;

fn create(path: &PathBuf) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn main() -> Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures").into()));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let curve = synthetic::wti_like_curve(CONTRACTS);
    let discount = synthetic::flat_discount();

    let mut s = String::from("maturity_date,price\n");
    for (d, p) in curve.maturities().iter().zip(curve.prices()) {
        s.push_str(&format!("{d},{p}\n"));
    }
    write(&dir.join("curve.csv"), &s)?;

    let mut s = String::from("time,discount_factor\n");
    for t in [0.25, 0.5, 1.0, 2.0, 3.0, 5.0] {
        s.push_str(&format!("{t},{}\n", discount.discount_factor(t)?));
    }
    write(&dir.join("discount.csv"), &s)?;

    let flat = LocalVolSurface::flat(0.25, 0.3);
    let futures = synthetic::futures_quotes(&curve, &discount, &flat, &PdeGrid::new(250, 200, 1.0), &synthetic::futures_option_grid())?;
    write_quotes(create(&dir.join("futures_quotes.csv"))?, &QuoteSet::new(futures.clone()), &curve)?;

    let truth = ReducedParam::reference_calibrated();
    let eta = CalibratedEta::new(futures, curve.clone(), discount.clone(), LvCalibrationConfig::default());
    let market = IndexMarket::with_horizon_months(curve.clone(), discount, BusinessCalendar::weekends_only(), 12)?;
    let sim = SimConfig { n_particles: PARTICLES, seed: derive_seed(SEED, "sim"), ..Default::default() };
    let params = IndexCalibrationConfig::default().model_params(&truth)?;
    let quotes = synthetic::index_quote_snapshots(
        &market,
        &params,
        &*eta.surface(quantize_a(truth.a))?,
        &sim,
        &synthetic::index_option_grid(),
        0.02,
    )?;
    write_quotes(create(&dir.join("index_quotes.csv"))?, &quotes, &curve)?;

    let m3 = market.expiry_after_months(3);
    let m6 = market.expiry_after_months(6);
    let m12 = market.expiry_after_months(12);
    let fut_expiry = curve.maturity_date(6) - chrono::Duration::days(7);
    let specs = format!(
        "underlying,expiry,strike_type,strike,callput\n\
         index,{m3},moneyness,1.0,call\n\
         index,{m6},moneyness,0.9,call\n\
         index,{m12},moneyness,1.1,call\n\
         index,{m12},absolute,0,call\n\
         index,{m12},moneyness,1.0,put\n\
         {},{fut_expiry},moneyness,1.0,call\n",
        curve.maturity_date(6)
    );
    write(&dir.join("specs.csv"), &specs)?;

    let toml = format!(
        "# Synthetic market of the bundled fixtures.\n\
         valuation_date = \"{}\"\n\
         curve = \"curve.csv\"\n\
         discount = \"discount.csv\"\n\
         futures_quotes = \"futures_quotes.csv\"\n\
         index_quotes = \"index_quotes.csv\"\n\
         index_level = 100.0\n\
         output = \"out\"\n\
         seed = {SEED}\n\
         \n\
         [model]\n\
         a = 0.3\n\
         kappa = 1.0\n\
         theta = 1.0\n\
         chi = 0.1\n\
         rho_v = 0.0\n\
         v0 = 1.0\n\
         rho = 0.9\n\
         \n\
         [sim]\n\
         n_particles = {PARTICLES}\n\
         steps_per_year = 250\n\
         \n\
         [loss]\n\
         p = 2.0\n\
         normalized = true\n\
         \n\
         [calibration]\n\
         esch_budget = 300\n\
         subplex_budget = 200\n",
        curve.valuation_date()
    );
    write(&dir.join("run.toml"), &toml)?;
    Ok(())
}

fn write(path: &PathBuf, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}
