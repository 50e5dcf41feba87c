//! Day-by-day replication of a rolling excess-return futures index.
//!
//! The composition fixed at the close of day `d` (front weight `alpha_d`)
//! earns the price move from `d` to `d + 1`:
//!
//! `I_{d+1} = I_d * (alpha F^c_{d+1} + (1 - alpha) F^f_{d+1}) / (alpha F^c_d + (1 - alpha) F^f_d)`.

use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market_data::{RollDay, RollSchedule};
use crate::slv_mc::{PathObserver, PathSet, Snapshot};

pub const DEFAULT_INDEX_LEVEL: f64 = 100.0;

fn check_price(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::data(format!("{what} price must be positive, got {x}")))
    }
}

/// Index update outside a roll: `I * F_{t+1} / F_t`.
pub fn index_step_nonroll(i: f64, f_t: f64, f_next: f64) -> Result<f64> {
    check_price(f_t, "front")?;
    check_price(f_next, "front")?;
    Ok(i * f_next / f_t)
}

/// Index update with front weight `alpha` held over the day.
pub fn index_step_roll(i: f64, alpha: f64, fc_t: f64, ff_t: f64, fc_next: f64, ff_next: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::data(format!("roll weight {alpha} outside [0, 1]")));
    }
    for (x, w) in [(fc_t, "front"), (ff_t, "second"), (fc_next, "front"), (ff_next, "second")] {
        check_price(x, w)?;
    }
    Ok(i * (alpha * fc_next + (1.0 - alpha) * ff_next) / (alpha * fc_t + (1.0 - alpha) * ff_t))
}

/// Units of the weighted contract bundle held after the close: `I / (alpha F^c + (1 - alpha) F^f)`.
pub fn bundle_quantity(i: f64, alpha: f64, fc: f64, ff: f64) -> f64 {
    i / (alpha * fc + (1.0 - alpha) * ff)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexState {
    pub date: NaiveDate,
    pub value: f64,
    /// Quantity of the weighted bundle held into the next day.
    pub quantity: f64,
    pub alpha: f64,
    pub front: usize,
    pub second: usize,
}

/// Replicates one price scenario. `prices(contract, day)` gives settlement prices.
pub fn replicate_single<F>(schedule: &RollSchedule, i0: f64, mut prices: F) -> Result<Vec<IndexState>>
where
    F: FnMut(usize, usize) -> f64,
{
    if !(i0 > 0.0) {
        return Err(Error::data(format!("initial index level must be positive, got {i0}")));
    }
    let days = schedule.days();
    let mut out = Vec::with_capacity(days.len());
    let mut value = i0;
    for (d, day) in days.iter().enumerate() {
        if d > 0 {
            let prev: &RollDay = &days[d - 1];
            value = index_step_roll(
                value,
                prev.alpha,
                prices(prev.front, d - 1),
                prices(prev.second, d - 1),
                prices(prev.front, d),
                prices(prev.second, d),
            )?;
        }
        out.push(IndexState {
            date: day.date,
            value,
            quantity: bundle_quantity(value, day.alpha, prices(day.front, d), prices(day.second, d)),
            alpha: day.alpha,
            front: day.front,
            second: day.second,
        });
    }
    Ok(out)
}

/// Index values per particle on a set of dates.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexPaths {
    pub dates: Vec<NaiveDate>,
    /// `values[date][particle]`.
    pub values: Vec<Vec<f64>>,
}

impl IndexPaths {
    pub fn at(&self, date: NaiveDate) -> Option<&[f64]> {
        self.dates.iter().position(|d| *d == date).map(|i| self.values[i].as_slice())
    }

    /// CSV with header `date,particle,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["date", "particle", "value"]).map_err(csv_err)?;
        for (d, row) in self.dates.iter().zip(&self.values) {
            for (p, v) in row.iter().enumerate() {
                wr.write_record([d.to_string(), p.to_string(), format!("{v}")]).map_err(csv_err)?;
            }
        }
        wr.flush().map_err(|e| Error::data(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::data(format!("csv write failed: {e}"))
}

/// Streaming index replication driven by the simulation, keeping only the
/// previous close per particle.
#[derive(Debug, Clone)]
pub struct IndexAccumulator {
    days: Vec<RollDay>,
    i0: f64,
    values: Vec<f64>,
    prev_c: Vec<f64>,
    prev_f: Vec<f64>,
    record: Option<Vec<NaiveDate>>,
    recorded: IndexPaths,
    next: usize,
    fc: Vec<f64>,
    ff: Vec<f64>,
}

impl IndexAccumulator {
    /// `record = None` keeps every date.
    pub fn new(schedule: &RollSchedule, i0: f64, record: Option<Vec<NaiveDate>>) -> Result<Self> {
        if !(i0 > 0.0) {
            return Err(Error::data(format!("initial index level must be positive, got {i0}")));
        }
        if let Some(dates) = &record {
            if let Some(d) = dates.iter().find(|d| schedule.position(**d).is_none()) {
                return Err(Error::range(format!("requested index date {d} is not a schedule date")));
            }
        }
        Ok(Self {
            days: schedule.days().to_vec(),
            i0,
            values: Vec::new(),
            prev_c: Vec::new(),
            prev_f: Vec::new(),
            record,
            recorded: IndexPaths { dates: Vec::new(), values: Vec::new() },
            next: 0,
            fc: Vec::new(),
            ff: Vec::new(),
        })
    }

    /// Feeds the close of the next schedule day. `front`/`second` are the
    /// prices at this close of the contracts held since the previous close;
    /// `new_front`/`new_second` those of the composition fixed now.
    pub fn push(&mut self, date: NaiveDate, held: (&[f64], &[f64]), fixed: (&[f64], &[f64])) -> Result<()> {
        let d = self.next;
        let day = self
            .days
            .get(d)
            .ok_or_else(|| Error::data(format!("index date {date} beyond the roll schedule")))?;
        if day.date != date {
            return Err(Error::data(format!("path date {date} does not match schedule date {}", day.date)));
        }
        if d == 0 {
            self.values = vec![self.i0; fixed.0.len()];
        } else {
            let alpha = self.days[d - 1].alpha;
            let (fc, ff) = held;
            if fc.len() != self.values.len() || ff.len() != self.values.len() {
                return Err(Error::data("particle count changed between dates"));
            }
            for p in 0..self.values.len() {
                self.values[p] = index_step_roll(self.values[p], alpha, self.prev_c[p], self.prev_f[p], fc[p], ff[p])?;
            }
        }
        self.prev_c.clear();
        self.prev_c.extend_from_slice(fixed.0);
        self.prev_f.clear();
        self.prev_f.extend_from_slice(fixed.1);
        let keep = match &self.record {
            None => true,
            Some(ds) => ds.contains(&date),
        };
        if keep {
            self.recorded.dates.push(date);
            self.recorded.values.push(self.values.clone());
        }
        self.next += 1;
        Ok(())
    }

    /// Current index value per particle.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn days_seen(&self) -> usize {
        self.next
    }

    pub fn finish(self) -> IndexPaths {
        self.recorded
    }
}

impl PathObserver for IndexAccumulator {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        let d = self.next;
        let day = *self
            .days
            .get(d)
            .ok_or_else(|| Error::data(format!("simulation date {} beyond the roll schedule", snap.date)))?;
        let mut fc = std::mem::take(&mut self.fc);
        let mut ff = std::mem::take(&mut self.ff);
        let mut nc = Vec::new();
        let mut nf = Vec::new();
        let held = if d > 0 { self.days[d - 1] } else { day };
        snap.futures_into(held.front, &mut fc);
        snap.futures_into(held.second, &mut ff);
        let (fixed_c, fixed_f) = if (day.front, day.second) == (held.front, held.second) {
            (&fc, &ff)
        } else {
            snap.futures_into(day.front, &mut nc);
            snap.futures_into(day.second, &mut nf);
            (&nc, &nf)
        };
        let r = self.push(snap.date, (&fc, &ff), (fixed_c, fixed_f));
        self.fc = fc;
        self.ff = ff;
        r
    }
}

/// Index paths for every particle of a stored path set.
pub fn replicate_index(paths: &PathSet, schedule: &RollSchedule, i0: f64) -> Result<IndexPaths> {
    if paths.dates != schedule.dates() {
        return Err(Error::data("path dates do not match the roll schedule"));
    }
    let mut acc = IndexAccumulator::new(schedule, i0, None)?;
    let days = schedule.days();
    let get = |d: usize, c: usize| {
        paths
            .prices(d, c)
            .ok_or_else(|| Error::data(format!("contract {c} missing from the path set")))
    };
    for (d, day) in days.iter().enumerate() {
        let held = if d > 0 { days[d - 1] } else { *day };
        acc.push(
            day.date,
            (get(d, held.front)?, get(d, held.second)?),
            (get(d, day.front)?, get(d, day.second)?),
        )?;
    }
    Ok(acc.finish())
}
