//! Replicate a rolling futures index on a made-up settlement history.
//!
//! ```text
//! cargo run --release --example index_replication
//! ```
//!
//! Prints every close of the first two months with the roll weight, the
//! contracts held and the bundle quantity carried into the next day.

use commodity_slv::index_engine::replicate_single;
use commodity_slv::market_data::BusinessCalendar;
use commodity_slv::pricing::IndexMarket;
use commodity_slv::synthetic;

fn main() -> commodity_slv::Result<()> {
    let curve = synthetic::wti_like_curve(8);
    let market = IndexMarket::with_horizon_months(curve.clone(), synthetic::flat_discount(), BusinessCalendar::weekends_only(), 2)?;

    // Each contract drifts and wiggles on its own.
    let price = |c: usize, day: usize| {
        let d = day as f64;
        curve.price(c) * (1.0 + 0.002 * d + 0.01 * (0.7 * d + c as f64).sin())
    };
    let states = replicate_single(&market.schedule, market.i0, price)?;
    println!("{:>10} {:>5} {:>5} {:>6} {:>10} {:>10}", "date", "front", "2nd", "alpha", "index", "quantity");
    for s in &states {
        println!("{:>10} {:>5} {:>5} {:>6.1} {:>10.4} {:>10.6}", s.date, s.front, s.second, s.alpha, s.value, s.quantity);
    }
    let last = states.last().expect("non-empty schedule");
    println!("index moved {:+.2}% over {} closes", 100.0 * (last.value / market.i0 - 1.0), states.len() - 1);
    Ok(())
}
