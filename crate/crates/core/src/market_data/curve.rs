use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use super::calendar::{parse_date, year_fraction};
use crate::error::{Error, Result};

/// Initial futures term structure `F_0(T_i)`.
///
/// Contracts are identified by their position in the maturity list.
#[derive(Debug, Clone, PartialEq)]
pub struct FuturesCurve {
    valuation_date: NaiveDate,
    maturities: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl FuturesCurve {
    pub fn new(
        valuation_date: NaiveDate,
        mut rows: Vec<(NaiveDate, f64)>,
    ) -> Result<Self> {
        for (i, (date, price)) in rows.iter().enumerate() {
            if !(price.is_finite() && *price > 0.0) {
                return Err(Error::data(format!(
                    "row {}: futures price for {date} must be positive, got {price}",
                    i + 1
                )));
            }
            if *date <= valuation_date {
                return Err(Error::data(format!(
                    "row {}: maturity {date} is not after valuation date {valuation_date}",
                    i + 1
                )));
            }
        }
        rows.sort_by_key(|(d, _)| *d);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::data(format!("duplicate maturity {}", w[0].0)));
        }
        if rows.len() < 2 {
            return Err(Error::data(format!(
                "futures curve needs at least 2 contracts, got {}",
                rows.len()
            )));
        }
        let (maturities, prices) = rows.into_iter().unzip();
        Ok(Self {
            valuation_date,
            maturities,
            prices,
        })
    }

    pub fn valuation_date(&self) -> NaiveDate {
        self.valuation_date
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn maturities(&self) -> &[NaiveDate] {
        &self.maturities
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn maturity_date(&self, contract: usize) -> NaiveDate {
        self.maturities[contract]
    }

    /// Maturity of a contract as an ACT/365 year fraction from valuation.
    pub fn maturity(&self, contract: usize) -> f64 {
        year_fraction(self.valuation_date, self.maturities[contract])
    }

    pub fn price(&self, contract: usize) -> f64 {
        self.prices[contract]
    }

    pub fn time_of(&self, date: NaiveDate) -> f64 {
        year_fraction(self.valuation_date, date)
    }

    /// Contract whose maturity matches `maturity` (year fraction) to within half a day.
    pub fn contract_at(&self, maturity: f64) -> Option<usize> {
        (0..self.len()).find(|&i| (self.maturity(i) - maturity).abs() < 0.5 / 365.0)
    }

    pub fn contract_on(&self, date: NaiveDate) -> Option<usize> {
        self.maturities.iter().position(|d| *d == date)
    }

    /// `F_0(T)`; off-pillar maturities are linearly interpolated when allowed.
    pub fn price_at(&self, maturity: f64, interpolate: bool) -> Result<f64> {
        if let Some(i) = self.contract_at(maturity) {
            return Ok(self.prices[i]);
        }
        if !interpolate {
            return Err(Error::range(format!(
                "maturity {maturity:.6} is not a curve pillar"
            )));
        }
        let first = self.maturity(0);
        let last = self.maturity(self.len() - 1);
        if maturity < first || maturity > last {
            return Err(Error::range(format!(
                "maturity {maturity:.6} outside curve [{first:.6}, {last:.6}]"
            )));
        }
        let j = (1..self.len())
            .find(|&j| self.maturity(j) >= maturity)
            .expect("bracketed");
        let (t0, t1) = (self.maturity(j - 1), self.maturity(j));
        let w = (maturity - t0) / (t1 - t0);
        Ok(self.prices[j - 1] * (1.0 - w) + self.prices[j] * w)
    }
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    maturity_date: String,
    price: f64,
}

/// Reads a `maturity_date,price` CSV.
pub fn load_futures_curve(path: impl AsRef<Path>, valuation_date: NaiveDate) -> Result<FuturesCurve> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_futures_curve(file, valuation_date)
}

pub fn read_futures_curve<R: std::io::Read>(reader: R, valuation_date: NaiveDate) -> Result<FuturesCurve> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<CurveRow>().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("row {}: {e}", i + 1)))?;
        rows.push((parse_date(&rec.maturity_date)?, rec.price));
    }
    FuturesCurve::new(valuation_date, rows)
}

/// Zero-coupon bond curve `P_0(t)` with log-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountCurve {
    times: Vec<f64>,
    log_dfs: Vec<f64>,
}

impl DiscountCurve {
    pub fn new(mut pillars: Vec<(f64, f64)>) -> Result<Self> {
        pillars.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pillars.first().map_or(true, |p| p.0 > 0.0) {
            pillars.insert(0, (0.0, 1.0));
        }
        let (t0, p0) = pillars[0];
        if t0 < 0.0 || (t0 == 0.0 && (p0 - 1.0).abs() > 1e-12) {
            return Err(Error::data("discount curve must start at P(0) = 1"));
        }
        for w in pillars.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::data(format!("duplicate discount pillar {}", w[1].0)));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::data(format!(
                    "discount factors must be non-increasing (t={} has {} > {})",
                    w[1].0, w[1].1, w[0].1
                )));
            }
        }
        if let Some(bad) = pillars.iter().find(|p| !(p.1 > 0.0 && p.1 <= 1.0)) {
            return Err(Error::data(format!(
                "discount factor {} at t={} outside (0, 1]",
                bad.1, bad.0
            )));
        }
        Ok(Self {
            times: pillars.iter().map(|p| p.0).collect(),
            log_dfs: pillars.iter().map(|p| p.1.ln()).collect(),
        })
    }

    /// Flat continuously-compounded rate out to `horizon` years.
    pub fn flat(rate: f64, horizon: f64) -> Self {
        Self {
            times: vec![0.0, horizon],
            log_dfs: vec![0.0, -rate * horizon],
        }
    }

    pub fn last_pillar(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn discount_factor(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::range(format!("negative discount time {t}")));
        }
        let last = self.last_pillar();
        if t > last + 1e-12 {
            return Err(Error::range(format!(
                "discount time {t} beyond last pillar {last}"
            )));
        }
        let t = t.min(last);
        let j = self.times.partition_point(|&x| x < t).max(1);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        Ok((self.log_dfs[j - 1] * (1.0 - w) + self.log_dfs[j] * w).exp())
    }
}

#[derive(Debug, Deserialize)]
struct DiscountRow {
    time: f64,
    discount_factor: f64,
}

/// Reads a `time,discount_factor` CSV.
pub fn load_discount_curve(path: impl AsRef<Path>) -> Result<DiscountCurve> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut pillars = Vec::new();
    for (i, rec) in rdr.deserialize::<DiscountRow>().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("row {}: {e}", i + 1)))?;
        pillars.push((rec.time, rec.discount_factor));
    }
    DiscountCurve::new(pillars)
}
