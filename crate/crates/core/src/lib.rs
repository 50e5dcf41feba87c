//! Stochastic local volatility for commodity futures and rolling futures indices.

pub mod calibrator;
pub mod cli;
pub mod dupire_lv;
pub mod error;
pub mod index_engine;
pub mod market_data;
pub mod pricing;
pub mod slv_mc;
pub mod synthetic;

pub use error::{Error, Result};
