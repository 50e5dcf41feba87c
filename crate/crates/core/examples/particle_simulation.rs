//! Simulate the two-factor SLV particle system and look at the futures it implies.
//!
//! ```text
//! cargo run --release --example particle_simulation -- [particles=100000] [seed=1]
//! ```
//!
//! Prints, per contract, the simulated mean against today's futures price and
//! the ATM implied vol, next to the vol of the local volatility model the
//! leverage function was built to match.

use commodity_slv::dupire_lv::{calibrate_local_vol, solve_normalized_calls, vanilla_price_on_futures, LvCalibrationConfig, PdeGrid};
use commodity_slv::market_data::{year_fraction, BusinessCalendar};
use commodity_slv::pricing::{implied_vol, price_futures_vanillas, CallPut, FuturesSampler, OptionSpec, StrikeSpec, Underlying};
use commodity_slv::slv_mc::{simulate, ModelParams, SimConfig, SimGrid};
use commodity_slv::synthetic;

fn main() -> commodity_slv::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let curve = synthetic::wti_like_curve(16);
    let discount = synthetic::flat_discount();
    let cal = BusinessCalendar::weekends_only();
    let params = ModelParams::reference();
    let quotes = synthetic::futures_quotes(
        &curve,
        &discount,
        &synthetic::skewed_eta(params.a),
        &PdeGrid::new(250, 200, 1.0),
        &synthetic::futures_option_grid(),
    )?;
    let eta = calibrate_local_vol(&quotes, &curve, &discount, params.a, &LvCalibrationConfig::default())?.surface;
    let sim = SimConfig { n_particles: n, seed, ..Default::default() };

    let valuation = curve.valuation_date();
    // Each contract is sampled about a week before it matures.
    let contracts = [1usize, 3, 6, 9, 12];
    let sample_date = |c: usize| cal.following(curve.maturity_date(c) - chrono::Days::new(10));
    let grid = SimGrid::business_days(&cal, valuation, sample_date(12))?;
    let mut sampler = FuturesSampler::new(contracts.iter().map(|c| (sample_date(*c), *c)).collect());
    let stats = simulate(&params, &eta, &curve, &grid, &sim, &mut sampler)?;
    println!("{n} particles, {} steps, {:.2}s", stats.steps, stats.seconds);
    println!("{:>9} {:>11} {:>10} {:>10} {:>8}", "contract", "sampled", "F(0)", "E[F(t)]", "z");
    for c in contracts {
        let xs = sampler.samples(sample_date(c), c).expect("sampled");
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
        println!("{c:>9} {:>11} {:>10.4} {mean:>10.4} {:>8.2}", sample_date(c), curve.price(c), (mean - curve.price(c)) / (sd / (xs.len() as f64).sqrt()));
    }

    // ATM options expiring shortly before each contract's maturity.
    let specs: Vec<OptionSpec> = [3usize, 6, 12]
        .iter()
        .map(|c| OptionSpec {
            callput: CallPut::Call,
            expiry: cal.following(valuation + chrono::Months::new(*c as u32)),
            strike: StrikeSpec::Moneyness(1.0),
            underlying: Underlying::Futures(*c),
        })
        .collect();
    let stops: Vec<f64> = specs.iter().map(|s| year_fraction(valuation, s.expiry)).collect();
    let pde = solve_normalized_calls(&eta, params.a, &PdeGrid::new(250, 220, 1.1).with_stops(stops))?;
    let mc = price_futures_vanillas(&params, &eta, &curve, &discount, &cal, &sim, &specs)?;
    println!("{:>9} {:>10} {:>10} {:>10}", "contract", "expiry", "SLV vol", "LV vol");
    for p in &mc {
        let Underlying::Futures(c) = p.spec.underlying else { continue };
        let df = discount.discount_factor(p.expiry_time)?;
        let lv = vanilla_price_on_futures(&pde, p.expiry_time, curve.maturity(c), p.strike, p.forward, df)?;
        let lv_vol = implied_vol(lv, p.forward, p.strike, p.expiry_time, df, CallPut::Call)?;
        let slv_vol = p.implied_vol.map_or(f64::NAN, |v| 100.0 * v);
        println!("{c:>9} {:>10} {slv_vol:>10.3} {:>10.3}", p.spec.expiry, 100.0 * lv_vol);
    }
    Ok(())
}
