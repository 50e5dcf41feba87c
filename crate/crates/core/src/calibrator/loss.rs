use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(sum_j |market_j - model_j|^p)^(1/p)`.
pub fn loss_p(market: &[f64], model: &[f64], p: f64) -> Result<f64> {
    if market.len() != model.len() {
        return Err(Error::data(format!(
            "loss inputs differ in length: {} market vs {} model",
            market.len(),
            model.len()
        )));
    }
    if market.is_empty() {
        return Err(Error::data("loss needs at least one quote"));
    }
    if !(p >= 1.0) {
        return Err(Error::config(format!("p-norm exponent must be >= 1, got {p}")));
    }
    let sum: f64 = market
        .iter()
        .zip(model)
        .map(|(a, b)| (a - b).abs().powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// What to do with snapshot pairs that (almost) coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenominatorPolicy {
    /// Replace `|dec - nov|` by `max(|dec - nov|, 1e-4 * mean)`.
    #[default]
    Floor,
    /// Fail with the offending quote indices.
    Reject,
}

pub const DENOMINATOR_FLOOR: f64 = 1e-4;

/// Snapshot-normalized loss: distance to the mid of two dated snapshots
/// measured in units of their spread.
pub fn loss_normalized(
    early: &[f64],
    late: &[f64],
    model: &[f64],
    p: f64,
    policy: DenominatorPolicy,
) -> Result<f64> {
    if early.len() != late.len() || early.len() != model.len() {
        return Err(Error::data("snapshot and model vectors differ in length"));
    }
    if early.is_empty() {
        return Err(Error::data("loss needs at least one quote"));
    }
    if !(p >= 1.0) {
        return Err(Error::config(format!("p-norm exponent must be >= 1, got {p}")));
    }
    let mut bad = Vec::new();
    let mut sum = 0.0;
    for (j, ((e, l), m)) in early.iter().zip(late).zip(model).enumerate() {
        let mean = 0.5 * (e + l);
        let floor = DENOMINATOR_FLOOR * mean.abs();
        let spread = (l - e).abs();
        let denom = match policy {
            DenominatorPolicy::Floor => spread.max(floor),
            DenominatorPolicy::Reject => {
                if spread <= floor {
                    bad.push(j);
                }
                spread
            }
        };
        if !(denom > 0.0) {
            bad.push(j);
            continue;
        }
        sum += ((mean - m).abs() / denom).powf(p);
    }
    if !bad.is_empty() {
        bad.dedup();
        return Err(Error::data(format!(
            "degenerate snapshot spread for quotes {bad:?}"
        )));
    }
    Ok(sum.powf(1.0 / p))
}
