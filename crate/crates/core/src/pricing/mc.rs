//! Monte Carlo pricing of vanillas on the index and on single futures.

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use super::black::{implied_vol, CallPut};
use crate::dupire_lv::LocalVolSurface;
use crate::error::{Error, Result};
use crate::index_engine::{IndexAccumulator, IndexPaths, DEFAULT_INDEX_LEVEL};
use crate::market_data::{
    build_roll_schedule, year_fraction, BusinessCalendar, DiscountCurve, FuturesCurve, MaturityMap, RollSchedule,
};
use crate::slv_mc::{simulate, ModelParams, PathObserver, SimConfig, SimGrid, SimStats, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "contract")]
pub enum Underlying {
    Index,
    Futures(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrikeSpec {
    Absolute(f64),
    /// Strike over the forward (`I_0` for the index, `F_0(T)` for futures).
    Moneyness(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub callput: CallPut,
    pub expiry: NaiveDate,
    pub strike: StrikeSpec,
    pub underlying: Underlying,
}

impl OptionSpec {
    pub fn index_call(expiry: NaiveDate, moneyness: f64) -> Self {
        Self { callput: CallPut::Call, expiry, strike: StrikeSpec::Moneyness(moneyness), underlying: Underlying::Index }
    }

    pub fn strike_for(&self, forward: f64) -> Result<f64> {
        let k = match self.strike {
            StrikeSpec::Absolute(k) => k,
            StrikeSpec::Moneyness(m) => m * forward,
        };
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::data(format!("strike must be non-negative, got {k}")));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricedOption {
    pub spec: OptionSpec,
    pub expiry_time: f64,
    pub strike: f64,
    pub forward: f64,
    pub price: f64,
    pub stderr: f64,
    /// Black implied vol against `forward`; `None` when the price leaves the no-arbitrage band.
    pub implied_vol: Option<f64>,
}

/// `df * mean(payoff)` and `df * std / sqrt(N)`.
pub fn mc_price(samples: &[f64], strike: f64, cp: CallPut, df: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::data("need at least two samples to price"));
    }
    let n = samples.len() as f64;
    let pay = |x: f64| match cp {
        CallPut::Call => (x - strike).max(0.0),
        CallPut::Put => (strike - x).max(0.0),
    };
    let mean = samples.iter().map(|x| pay(*x)).sum::<f64>() / n;
    let var = samples.iter().map(|x| (pay(*x) - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((df * mean, df * (var / n).sqrt()))
}

fn priced(spec: OptionSpec, t: f64, forward: f64, samples: &[f64], discount: &DiscountCurve) -> Result<PricedOption> {
    let strike = spec.strike_for(forward)?;
    let df = discount.discount_factor(t)?;
    let (price, stderr) = mc_price(samples, strike, spec.callput, df)?;
    let implied = if t > 0.0 && strike > 0.0 {
        implied_vol(price, forward, strike, t, df, spec.callput).ok()
    } else {
        None
    };
    Ok(PricedOption { spec, expiry_time: t, strike, forward, price, stderr, implied_vol: implied })
}

/// Prices index options from simulated index paths; the forward is `i0`.
pub fn price_index_vanillas(
    paths: &IndexPaths,
    i0: f64,
    valuation: NaiveDate,
    specs: &[OptionSpec],
    discount: &DiscountCurve,
) -> Result<Vec<PricedOption>> {
    specs
        .iter()
        .map(|spec| {
            if spec.underlying != Underlying::Index {
                return Err(Error::data("expected an index option"));
            }
            let samples = paths
                .at(spec.expiry)
                .ok_or_else(|| Error::range(format!("expiry {} not on the simulated date grid", spec.expiry)))?;
            priced(*spec, year_fraction(valuation, spec.expiry), i0, samples, discount)
        })
        .collect()
}

/// Everything fixed about the index market for one valuation date.
#[derive(Debug, Clone)]
pub struct IndexMarket {
    pub curve: FuturesCurve,
    pub discount: DiscountCurve,
    pub calendar: BusinessCalendar,
    pub schedule: RollSchedule,
    pub i0: f64,
}

impl IndexMarket {
    /// Schedule from the curve's valuation date through `end`.
    pub fn new(curve: FuturesCurve, discount: DiscountCurve, calendar: BusinessCalendar, end: NaiveDate, i0: f64) -> Result<Self> {
        let start = curve.valuation_date();
        if !calendar.is_business_day(start) {
            return Err(Error::Calendar(format!("valuation date {start} is not a business day")));
        }
        if !(i0 > 0.0) {
            return Err(Error::data(format!("index level must be positive, got {i0}")));
        }
        let map = MaturityMap::from_curve(&curve, &calendar, start, end)?;
        let schedule = build_roll_schedule(&calendar, start, end, &map)?;
        if let Some(&c) = schedule.contracts().iter().find(|&&c| c >= curve.len()) {
            return Err(Error::range(format!("index window needs contract {c}, curve has {}", curve.len())));
        }
        Ok(Self { curve, discount, calendar, schedule, i0 })
    }

    /// Index market with expiries out to `months` after valuation.
    pub fn with_horizon_months(curve: FuturesCurve, discount: DiscountCurve, calendar: BusinessCalendar, months: u32) -> Result<Self> {
        let end = calendar.following(curve.valuation_date() + Months::new(months));
        Self::new(curve, discount, calendar, end, DEFAULT_INDEX_LEVEL)
    }

    pub fn valuation_date(&self) -> NaiveDate {
        self.curve.valuation_date()
    }

    /// `months` after valuation, moved to the next business day.
    pub fn expiry_after_months(&self, months: u32) -> NaiveDate {
        self.calendar.following(self.valuation_date() + Months::new(months))
    }

    /// Schedule date whose year fraction is within half a day of `t`.
    pub fn date_for_time(&self, t: f64) -> Result<NaiveDate> {
        let v = self.valuation_date();
        self.schedule
            .days()
            .iter()
            .map(|d| d.date)
            .find(|d| (year_fraction(v, *d) - t).abs() < 0.5 / 365.0)
            .ok_or_else(|| Error::range(format!("expiry {t} is not a date of the index grid")))
    }

    /// Simulates the index and prices `specs`, keeping only their expiry dates.
    pub fn price_index_options(
        &self,
        params: &ModelParams,
        eta: &LocalVolSurface,
        sim: &SimConfig,
        specs: &[OptionSpec],
    ) -> Result<(Vec<PricedOption>, SimStats)> {
        let (paths, stats) = self.simulate_index(params, eta, sim, specs.iter().map(|s| s.expiry).collect())?;
        Ok((price_index_vanillas(&paths, self.i0, self.valuation_date(), specs, &self.discount)?, stats))
    }

    /// Index values on `dates` for every particle.
    pub fn simulate_index(
        &self,
        params: &ModelParams,
        eta: &LocalVolSurface,
        sim: &SimConfig,
        mut dates: Vec<NaiveDate>,
    ) -> Result<(IndexPaths, SimStats)> {
        dates.sort();
        dates.dedup();
        let last = *dates.last().ok_or_else(|| Error::data("no expiries requested"))?;
        if last > self.schedule.end() {
            return Err(Error::range(format!("expiry {last} beyond the index horizon {}", self.schedule.end())));
        }
        let end = self.schedule.position(last).ok_or_else(|| Error::range(format!("expiry {last} is not a business day")))?;
        let grid = SimGrid::new(self.schedule.dates()[..=end].to_vec())?;
        let mut acc = IndexAccumulator::new(&self.schedule, self.i0, Some(dates))?;
        let stats = simulate(params, eta, &self.curve, &grid, sim, &mut acc)?;
        Ok((acc.finish(), stats))
    }
}

/// Collects futures prices of chosen contracts on chosen dates.
#[derive(Debug, Clone, Default)]
pub struct FuturesSampler {
    wanted: Vec<(NaiveDate, usize)>,
    samples: Vec<Vec<f64>>,
}

impl FuturesSampler {
    pub fn new(wanted: Vec<(NaiveDate, usize)>) -> Self {
        let samples = vec![Vec::new(); wanted.len()];
        Self { wanted, samples }
    }

    pub fn samples(&self, date: NaiveDate, contract: usize) -> Option<&[f64]> {
        self.wanted
            .iter()
            .position(|w| *w == (date, contract))
            .map(|i| self.samples[i].as_slice())
            .filter(|s| !s.is_empty())
    }
}

impl PathObserver for FuturesSampler {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        for (i, (d, c)) in self.wanted.iter().enumerate() {
            if *d == snap.date {
                snap.futures_into(*c, &mut self.samples[i]);
            }
        }
        Ok(())
    }
}

/// Prices options on single futures by simulation on the business-day grid.
pub fn price_futures_vanillas(
    params: &ModelParams,
    eta: &LocalVolSurface,
    curve: &FuturesCurve,
    discount: &DiscountCurve,
    calendar: &BusinessCalendar,
    sim: &SimConfig,
    specs: &[OptionSpec],
) -> Result<Vec<PricedOption>> {
    let mut wanted = Vec::new();
    for s in specs {
        match s.underlying {
            Underlying::Futures(c) if c < curve.len() => wanted.push((s.expiry, c)),
            Underlying::Futures(c) => return Err(Error::range(format!("contract {c} not on the curve"))),
            Underlying::Index => return Err(Error::data("expected an option on futures")),
        }
    }
    let end = *specs.iter().map(|s| &s.expiry).max().ok_or_else(|| Error::data("no options given"))?;
    let grid = SimGrid::business_days(calendar, curve.valuation_date(), end)?;
    let mut sampler = FuturesSampler::new(wanted);
    simulate(params, eta, curve, &grid, sim, &mut sampler)?;
    specs
        .iter()
        .map(|s| {
            let Underlying::Futures(c) = s.underlying else { unreachable!() };
            let samples = sampler
                .samples(s.expiry, c)
                .ok_or_else(|| Error::range(format!("expiry {} not a business day before contract {c} expires", s.expiry)))?;
            priced(*s, year_fraction(curve.valuation_date(), s.expiry), curve.price(c), samples, discount)
        })
        .collect()
}
