use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};

use super::calendar::BusinessCalendar;
use super::curve::FuturesCurve;
use crate::error::{Error, Result};

/// End-of-day front-contract weights on roll days 1 to 5 (business days 5..=9).
pub const ROLL_WEIGHTS: [f64; 5] = [0.8, 0.6, 0.4, 0.2, 0.0];
/// First business day of the roll window.
pub const ROLL_START_BD: usize = 5;

/// Month -> contract held as front before that month's roll.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaturityMap {
    fronts: BTreeMap<(i32, u32), usize>,
}

impl MaturityMap {
    pub fn new(fronts: BTreeMap<(i32, u32), usize>) -> Self {
        Self { fronts }
    }

    /// For every month in `[start, end]`, the first contract still alive at the
    /// close of the month's last roll day.
    pub fn from_curve(
        curve: &FuturesCurve,
        calendar: &BusinessCalendar,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Self> {
        let mut fronts = BTreeMap::new();
        for (year, month) in months_between(start, end) {
            let days = calendar.business_days_in_month(year, month);
            let last_roll_day = *days.get(ROLL_START_BD + 3).ok_or_else(|| {
                Error::Calendar(format!("{year}-{month:02} has fewer than 9 business days"))
            })?;
            let front = curve
                .maturities()
                .iter()
                .position(|m| *m > last_roll_day)
                .ok_or_else(|| {
                    Error::range(format!("no contract alive after the {year}-{month:02} roll"))
                })?;
            fronts.insert((year, month), front);
        }
        Ok(Self { fronts })
    }

    pub fn front(&self, year: i32, month: u32) -> Option<usize> {
        self.fronts.get(&(year, month)).copied()
    }
}

fn months_between(start: NaiveDate, end: NaiveDate) -> Vec<(i32, u32)> {
    let mut out = Vec::new();
    let (mut y, mut m) = (start.year(), start.month());
    while (y, m) <= (end.year(), end.month()) {
        out.push((y, m));
        if m == 12 {
            y += 1;
            m = 1;
        } else {
            m += 1;
        }
    }
    out
}

/// Index composition held from the close of `date` to the next close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollDay {
    pub date: NaiveDate,
    pub front: usize,
    pub second: usize,
    /// Quantity weight on the front contract after the close of `date`.
    pub alpha: f64,
    /// 1..=5 inside the roll window.
    pub roll_day: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollSchedule {
    days: Vec<RollDay>,
}

impl RollSchedule {
    pub fn days(&self) -> &[RollDay] {
        &self.days
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.days.iter().map(|d| d.date).collect()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn start(&self) -> NaiveDate {
        self.days[0].date
    }

    pub fn end(&self) -> NaiveDate {
        self.days[self.days.len() - 1].date
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.days.binary_search_by_key(&date, |d| d.date).ok()
    }

    pub fn alpha(&self, date: NaiveDate) -> Option<f64> {
        self.position(date).map(|i| self.days[i].alpha)
    }

    /// Every contract referenced by the schedule, ascending.
    pub fn contracts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .days
            .iter()
            .flat_map(|d| [d.front, d.second])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Builds the daily roll schedule over the business days of `[start, end]`.
pub fn build_roll_schedule(
    calendar: &BusinessCalendar,
    start: NaiveDate,
    end: NaiveDate,
    maturity_map: &MaturityMap,
) -> Result<RollSchedule> {
    if end < start {
        return Err(Error::Calendar(format!("empty date range {start}..{end}")));
    }
    let months = months_between(start, end);
    for &(y, m) in &months {
        let n = calendar.business_days_in_month(y, m).len();
        if n < ROLL_START_BD + 4 {
            return Err(Error::Calendar(format!(
                "{y}-{m:02} has {n} business days, fewer than 9"
            )));
        }
        if maturity_map.front(y, m).is_none() {
            return Err(Error::data(format!("no front contract assigned to {y}-{m:02}")));
        }
    }
    for w in months.windows(2) {
        let before = maturity_map.front(w[0].0, w[0].1).expect("checked");
        let after = maturity_map.front(w[1].0, w[1].1).expect("checked");
        if after != before + 1 {
            return Err(Error::data(format!(
                "roll into {}-{:02} expects front contract {} but map gives {after}",
                w[1].0,
                w[1].1,
                before + 1
            )));
        }
    }

    let mut days = Vec::new();
    for date in calendar.business_days(start, end) {
        let bd = calendar.business_day_number(date).expect("business day");
        let front = maturity_map.front(date.year(), date.month()).expect("checked");
        let entry = if bd < ROLL_START_BD {
            RollDay { date, front, second: front + 1, alpha: 1.0, roll_day: None }
        } else if bd < ROLL_START_BD + ROLL_WEIGHTS.len() {
            let k = bd - ROLL_START_BD;
            RollDay {
                date,
                front,
                second: front + 1,
                alpha: ROLL_WEIGHTS[k],
                roll_day: Some(k + 1),
            }
        } else {
            RollDay { date, front: front + 1, second: front + 2, alpha: 1.0, roll_day: None }
        };
        days.push(entry);
    }
    if days.is_empty() {
        return Err(Error::Calendar(format!("no business days in {start}..{end}")));
    }
    Ok(RollSchedule { days })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn simple_map() -> MaturityMap {
        let mut m = BTreeMap::new();
        m.insert((2020, 3), 0);
        m.insert((2020, 4), 1);
        m.insert((2020, 5), 2);
        MaturityMap::new(m)
    }

    #[test]
    fn roll_days_are_business_days_5_to_9() {
        let cal = BusinessCalendar::weekends_only();
        let s = build_roll_schedule(&cal, d(2020, 3, 1), d(2020, 3, 31), &simple_map()).unwrap();
        let bds = cal.business_days_in_month(2020, 3);
        let window: Vec<_> = s.days().iter().filter(|x| x.roll_day.is_some()).map(|x| x.date).collect();
        assert_eq!(window, bds[4..9].to_vec());
        assert_eq!(s.alpha(bds[4]), Some(0.8));
        for day in &bds[..4] {
            assert_eq!(s.alpha(*day), Some(1.0));
        }
    }

    #[test]
    fn second_becomes_front_after_window() {
        let cal = BusinessCalendar::weekends_only();
        let s = build_roll_schedule(&cal, d(2020, 3, 1), d(2020, 4, 30), &simple_map()).unwrap();
        let days = s.days();
        let last_window = days.iter().rposition(|x| x.roll_day == Some(5) && x.date.month() == 3).unwrap();
        assert_eq!(days[last_window + 1].front, days[last_window].second);
    }

    #[test]
    fn short_month_is_a_calendar_error() {
        let holidays: Vec<_> = (1..=20).map(|day| d(2020, 3, day)).collect();
        let cal = BusinessCalendar::with_holidays(holidays);
        let err = build_roll_schedule(&cal, d(2020, 3, 1), d(2020, 3, 31), &simple_map()).unwrap_err();
        assert!(matches!(err, Error::Calendar(_)));
    }

    #[test]
    fn discontinuous_map_rejected() {
        let mut m = BTreeMap::new();
        m.insert((2020, 3), 0);
        m.insert((2020, 4), 3);
        let cal = BusinessCalendar::weekends_only();
        assert!(build_roll_schedule(&cal, d(2020, 3, 1), d(2020, 4, 30), &MaturityMap::new(m)).is_err());
    }
}
