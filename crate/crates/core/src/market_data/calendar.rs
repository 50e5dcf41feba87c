use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, Months, NaiveDate, Weekday};

use crate::error::{Error, Result};

/// ACT/365 fixed year fraction between two dates.
pub fn year_fraction(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / 365.0
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::data(format!("invalid ISO date {s:?}: {e}")))
}

/// Weekends-only business-day calendar with an optional holiday list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BusinessCalendar {
    holidays: BTreeSet<NaiveDate>,
}

impl BusinessCalendar {
    pub fn weekends_only() -> Self {
        Self::default()
    }

    pub fn with_holidays<I: IntoIterator<Item = NaiveDate>>(holidays: I) -> Self {
        Self {
            holidays: holidays.into_iter().collect(),
        }
    }

    /// One ISO date per line; blank lines and `#` comments are ignored.
    pub fn load_holidays(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut holidays = BTreeSet::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            holidays.insert(parse_date(line)?);
        }
        Ok(Self { holidays })
    }

    pub fn is_business_day(&self, date: NaiveDate) -> bool {
        !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(&date)
    }

    /// Business days in `[start, end]`, ascending.
    pub fn business_days(&self, start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
        start
            .iter_days()
            .take_while(|d| *d <= end)
            .filter(|d| self.is_business_day(*d))
            .collect()
    }

    pub fn business_days_in_month(&self, year: i32, month: u32) -> Vec<NaiveDate> {
        let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
        let last = first + Months::new(1) - chrono::Days::new(1);
        self.business_days(first, last)
    }

    /// 1-based ordinal of `date` among the business days of its month.
    pub fn business_day_number(&self, date: NaiveDate) -> Option<usize> {
        if !self.is_business_day(date) {
            return None;
        }
        let first = date.with_day(1)?;
        Some(self.business_days(first, date).len())
    }

    /// Next business day on or after `date`.
    pub fn following(&self, date: NaiveDate) -> NaiveDate {
        let mut d = date;
        while !self.is_business_day(d) {
            d = d.succ_opt().expect("date in range");
        }
        d
    }
}
