use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use super::calendar::{parse_date, year_fraction};
use super::curve::{DiscountCurve, FuturesCurve};
use crate::error::{Error, Result};
use crate::pricing::black::{black_price, CallPut};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuoteKind {
    OnFutures,
    OnIndex,
}

/// A call quote, always held in price units after loading.
#[derive(Debug, Clone, PartialEq)]
pub struct VanillaQuote {
    pub kind: QuoteKind,
    /// Option expiry, ACT/365 years from valuation.
    pub expiry: f64,
    /// Underlying futures contract (futures quotes only).
    pub underlying: Option<usize>,
    pub strike: f64,
    /// Strike over forward, present for index quotes.
    pub moneyness: Option<f64>,
    pub price: f64,
    pub quote_date: NaiveDate,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuoteSet {
    pub quotes: Vec<VanillaQuote>,
}

impl QuoteSet {
    pub fn new(quotes: Vec<VanillaQuote>) -> Self {
        Self { quotes }
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn on_futures(&self) -> Vec<VanillaQuote> {
        self.of_kind(QuoteKind::OnFutures)
    }

    pub fn on_index(&self) -> Vec<VanillaQuote> {
        self.of_kind(QuoteKind::OnIndex)
    }

    fn of_kind(&self, kind: QuoteKind) -> Vec<VanillaQuote> {
        self.quotes.iter().filter(|q| q.kind == kind).cloned().collect()
    }

    /// Splits index quotes into the earlier and later dated snapshots.
    ///
    /// Both snapshots are returned sorted by (expiry, moneyness) and must
    /// share identical keys.
    pub fn index_snapshots(&self) -> Result<(Vec<VanillaQuote>, Vec<VanillaQuote>)> {
        let index = self.on_index();
        let mut dates: Vec<NaiveDate> = index.iter().map(|q| q.quote_date).collect();
        dates.sort();
        dates.dedup();
        if dates.len() != 2 {
            return Err(Error::data(format!(
                "expected exactly two index quote dates, found {}",
                dates.len()
            )));
        }
        let snapshot = |date: NaiveDate| {
            let mut v: Vec<VanillaQuote> =
                index.iter().filter(|q| q.quote_date == date).cloned().collect();
            v.sort_by(|a, b| {
                a.expiry
                    .total_cmp(&b.expiry)
                    .then(a.moneyness.unwrap_or(0.0).total_cmp(&b.moneyness.unwrap_or(0.0)))
            });
            v
        };
        let (early, late) = (snapshot(dates[0]), snapshot(dates[1]));
        let same_keys = early.len() == late.len()
            && early.iter().zip(&late).all(|(a, b)| {
                (a.expiry - b.expiry).abs() < 1e-12 && a.moneyness == b.moneyness
            });
        if !same_keys {
            return Err(Error::data(
                "index quote snapshots do not share identical (expiry, moneyness) keys",
            ));
        }
        Ok((early, late))
    }
}

/// Market context needed to turn implied-vol quotes into prices.
#[derive(Debug, Clone, Copy)]
pub struct QuoteContext<'a> {
    pub curve: &'a FuturesCurve,
    pub discount: &'a DiscountCurve,
    /// Index level used as the forward of index options.
    pub index_level: f64,
}

#[derive(Debug, Deserialize)]
struct QuoteRow {
    kind: String,
    expiry: String,
    underlying: String,
    strike_or_moneyness: f64,
    quote_type: String,
    value: f64,
    quote_date: String,
}

fn parse_time(s: &str, valuation: NaiveDate) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(t) => Ok(t),
        Err(_) => Ok(year_fraction(valuation, parse_date(s)?)),
    }
}

/// Reads `kind,expiry,underlying,strike_or_moneyness,quote_type,value,quote_date`.
///
/// `expiry` and `underlying` accept either ISO dates or year fractions; the
/// underlying of an index quote is ignored. Vol quotes are converted to prices
/// with Black-76.
pub fn load_quotes(path: impl AsRef<Path>, ctx: QuoteContext<'_>) -> Result<QuoteSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_quotes(file, ctx)
}

pub fn read_quotes<R: std::io::Read>(reader: R, ctx: QuoteContext<'_>) -> Result<QuoteSet> {
    let valuation = ctx.curve.valuation_date();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut quotes = Vec::new();
    for (i, rec) in rdr.deserialize::<QuoteRow>().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::data(format!("row {row}: {e}")))?;
        let kind = match rec.kind.as_str() {
            "on_futures" | "futures" => QuoteKind::OnFutures,
            "on_index" | "index" => QuoteKind::OnIndex,
            other => return Err(Error::data(format!("row {row}: unknown quote kind {other:?}"))),
        };
        let expiry = parse_time(&rec.expiry, valuation)?;
        if !(expiry > 0.0) {
            return Err(Error::data(format!("row {row}: expiry must be positive")));
        }
        if !(rec.strike_or_moneyness > 0.0) {
            return Err(Error::data(format!("row {row}: strike must be positive")));
        }
        let quote_date = parse_date(&rec.quote_date)?;
        let (underlying, strike, moneyness, forward) = match kind {
            QuoteKind::OnFutures => {
                let maturity = parse_time(&rec.underlying, valuation)?;
                let contract = ctx.curve.contract_at(maturity).ok_or_else(|| {
                    Error::data(format!("row {row}: underlying {} is not on the curve", rec.underlying))
                })?;
                if expiry > ctx.curve.maturity(contract) + 1e-12 {
                    return Err(Error::data(format!(
                        "row {row}: option expiry after futures maturity"
                    )));
                }
                (Some(contract), rec.strike_or_moneyness, None, ctx.curve.price(contract))
            }
            QuoteKind::OnIndex => (
                None,
                rec.strike_or_moneyness * ctx.index_level,
                Some(rec.strike_or_moneyness),
                ctx.index_level,
            ),
        };
        let price = match rec.quote_type.as_str() {
            "price" => rec.value,
            "vol" | "iv" | "implied_vol" => {
                let df = ctx.discount.discount_factor(expiry)?;
                black_price(forward, strike, expiry, rec.value, df, CallPut::Call)
            }
            other => return Err(Error::data(format!("row {row}: unknown quote type {other:?}"))),
        };
        if !(price >= 0.0) {
            return Err(Error::data(format!("row {row}: negative price")));
        }
        quotes.push(VanillaQuote {
            kind,
            expiry,
            underlying,
            strike,
            moneyness,
            price,
            quote_date,
        });
    }
    Ok(QuoteSet { quotes })
}

/// Writes a quote set in the loader's CSV layout (price units).
pub fn write_quotes<W: std::io::Write>(
    writer: W,
    quotes: &QuoteSet,
    curve: &FuturesCurve,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::data(e.to_string());
    w.write_record([
        "kind",
        "expiry",
        "underlying",
        "strike_or_moneyness",
        "quote_type",
        "value",
        "quote_date",
    ])
    .map_err(csv_err)?;
    for q in &quotes.quotes {
        let (kind, underlying, strike) = match q.kind {
            QuoteKind::OnFutures => (
                "on_futures",
                curve.maturity_date(q.underlying.expect("futures quote has underlying")).to_string(),
                q.strike,
            ),
            QuoteKind::OnIndex => ("on_index", String::new(), q.moneyness.unwrap_or(q.strike)),
        };
        w.write_record([
            kind.to_string(),
            q.expiry.to_string(),
            underlying,
            strike.to_string(),
            "price".to_string(),
            q.price.to_string(),
            q.quote_date.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::data(e.to_string()))?;
    Ok(())
}
