//! Black-76 and Monte Carlo pricing of index vanillas, plus parameter scans.

pub mod black;
pub mod mc;
pub mod sensitivity;

pub use black::{black_price, black_vega, implied_vol, norm_cdf, CallPut};
pub use mc::{
    mc_price, price_futures_vanillas, price_index_vanillas, FuturesSampler, IndexMarket, OptionSpec, PricedOption,
    StrikeSpec, Underlying,
};
pub use sensitivity::{sensitivity_scan, ScanEntry, ScanGrid, ScanParam, SensitivityReport, DEFAULT_MONEYNESS};
