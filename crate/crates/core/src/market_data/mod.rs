//! Futures curves, discounting, option quotes, business-day calendars and
//! the monthly roll schedule of an excess-return rolling index.
//!
//! All year fractions are ACT/365 fixed from the curve's valuation date.

pub mod calendar;
pub mod curve;
pub mod quotes;
pub mod roll;

pub use calendar::{year_fraction, BusinessCalendar};
pub use curve::{load_discount_curve, load_futures_curve, DiscountCurve, FuturesCurve};
pub use quotes::{load_quotes, QuoteContext, QuoteKind, QuoteSet, VanillaQuote};
pub use roll::{build_roll_schedule, MaturityMap, RollDay, RollSchedule, ROLL_WEIGHTS};
