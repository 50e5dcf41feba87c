//! Deterministic synthetic market used by tests, examples and the bundled fixtures.

use chrono::{Datelike, Months, NaiveDate};

use crate::dupire_lv::{solve_normalized_calls, vanilla_price_on_futures, LocalVolSurface, PdeGrid};
use crate::error::Result;
use crate::market_data::{BusinessCalendar, DiscountCurve, FuturesCurve, QuoteKind, QuoteSet, VanillaQuote};
use crate::pricing::{IndexMarket, OptionSpec};
use crate::slv_mc::{ModelParams, SimConfig};

pub fn valuation_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 12, 16).expect("valid date")
}

/// Monthly WTI-like curve: one contract per month from December 2019, maturing
/// on the business day on or after the 19th, in mild backwardation from 60.
pub fn wti_like_curve(contracts: usize) -> FuturesCurve {
    let cal = BusinessCalendar::weekends_only();
    let first = NaiveDate::from_ymd_opt(2019, 12, 19).expect("valid date");
    let rows = (0..contracts)
        .map(|i| {
            let d = cal.following(first + Months::new(i as u32));
            (d, 60.0 - 0.25 * i as f64 + 0.5 * ((d.month() as f64) * 0.7).sin())
        })
        .collect();
    FuturesCurve::new(valuation_date(), rows).expect("synthetic curve is valid")
}

pub fn flat_discount() -> DiscountCurve {
    DiscountCurve::flat(0.02, 5.0)
}

/// Option on `contract` expiring `days` calendar days before the contract matures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuturesOptionSpec {
    pub contract: usize,
    pub days_before_maturity: i64,
    /// Strike over the initial futures price.
    pub moneyness: f64,
}

/// Call prices on futures generated by the PDE under `eta`.
pub fn futures_quotes(
    curve: &FuturesCurve,
    discount: &DiscountCurve,
    eta: &LocalVolSurface,
    grid: &PdeGrid,
    specs: &[FuturesOptionSpec],
) -> Result<Vec<VanillaQuote>> {
    let expiry_of = |s: &FuturesOptionSpec| {
        curve.time_of(curve.maturity_date(s.contract) - chrono::Duration::days(s.days_before_maturity))
    };
    let horizon = specs.iter().map(expiry_of).fold(0.0, f64::max);
    let grid = PdeGrid {
        horizon,
        stop_times: specs.iter().map(expiry_of).collect(),
        ..grid.clone()
    };
    let calls = solve_normalized_calls(eta, eta.a, &grid)?;
    specs
        .iter()
        .map(|s| {
            let t = expiry_of(s);
            let f0 = curve.price(s.contract);
            let strike = s.moneyness * f0;
            let price = vanilla_price_on_futures(
                &calls,
                t,
                curve.maturity(s.contract),
                strike,
                f0,
                discount.discount_factor(t)?,
            )?;
            Ok(VanillaQuote {
                kind: QuoteKind::OnFutures,
                expiry: t,
                underlying: Some(s.contract),
                strike,
                moneyness: Some(s.moneyness),
                price,
                quote_date: curve.valuation_date(),
            })
        })
        .collect()
}

/// Three expiries (about 3, 6 and 12 months) by five strikes.
pub fn futures_option_grid() -> Vec<FuturesOptionSpec> {
    let mut out = Vec::new();
    for contract in [3, 6, 12] {
        for m in [0.8, 0.9, 1.0, 1.1, 1.2] {
            out.push(FuturesOptionSpec {
                contract,
                days_before_maturity: 5,
                moneyness: m,
            });
        }
    }
    out
}

/// A downward-skewed `eta` with a mildly declining term structure.
pub fn skewed_eta(a: f64) -> LocalVolSurface {
    let times = vec![0.25, 0.5, 1.0, 2.0];
    let strikes = vec![0.6, 0.8, 1.0, 1.2, 1.4];
    let values = times
        .iter()
        .map(|t| {
            let level = 0.30 - 0.03 * t;
            strikes.iter().map(|k| level - 0.15 * (k - 1.0)).collect()
        })
        .collect();
    LocalVolSurface::new(a, times, strikes, values).expect("synthetic surface is valid")
}

/// Index calls by (months to expiry, moneyness).
pub fn index_option_grid() -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    for months in [1, 3, 6, 9, 12] {
        for m in [0.9, 1.0, 1.1] {
            out.push((months, m));
        }
    }
    out
}

/// Two dated snapshots of index call quotes straddling the model prices:
/// the earlier at `1 - spread` and the later at `1 + spread` times each price,
/// so their mean is the model price itself.
pub fn index_quote_snapshots(
    market: &IndexMarket,
    params: &ModelParams,
    eta: &LocalVolSurface,
    sim: &SimConfig,
    grid: &[(u32, f64)],
    spread: f64,
) -> Result<QuoteSet> {
    let specs: Vec<OptionSpec> =
        grid.iter().map(|(m, k)| OptionSpec::index_call(market.expiry_after_months(*m), *k)).collect();
    let (priced, _) = market.price_index_options(params, eta, sim, &specs)?;
    let valuation = market.valuation_date();
    let early_date = valuation - chrono::Duration::days(30);
    let mut quotes = Vec::new();
    for (date, scale) in [(early_date, 1.0 - spread), (valuation, 1.0 + spread)] {
        for p in &priced {
            quotes.push(VanillaQuote {
                kind: QuoteKind::OnIndex,
                expiry: p.expiry_time,
                underlying: None,
                strike: p.strike,
                moneyness: Some(p.strike / market.i0),
                price: p.price * scale,
                quote_date: date,
            });
        }
    }
    Ok(QuoteSet::new(quotes))
}
