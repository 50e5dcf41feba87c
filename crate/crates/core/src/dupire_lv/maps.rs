//! Maps between the normalized spot and individual futures contracts.

use super::surface::LocalVolSurface;
use crate::error::{Error, Result};

/// Strike in normalized-spot units for a futures strike `k` on a contract
/// with initial price `f0` and time to maturity `tau = T - t`.
pub fn effective_strike(tau: f64, strike: f64, f0: f64, a: f64) -> f64 {
    1.0 - (a * tau).exp() * (1.0 - strike / f0)
}

/// Futures price implied by the normalized spot `s`.
pub fn futures_from_spot(s: f64, tau: f64, f0: f64, a: f64) -> f64 {
    f0 * (1.0 - (1.0 - s) * (-a * tau).exp())
}

/// Lowest futures price reachable under the map (`s = 0`).
pub fn futures_floor(tau: f64, f0: f64, a: f64) -> f64 {
    f0 * (1.0 - (-a * tau).exp())
}

/// Local volatility of the futures price at strike `strike`.
pub fn local_vol_futures(
    eta: &LocalVolSurface,
    t: f64,
    maturity: f64,
    strike: f64,
    f0: f64,
    a: f64,
) -> Result<f64> {
    if maturity < t {
        return Err(Error::range(format!("maturity {maturity} before time {t}")));
    }
    let tau = maturity - t;
    let multiplier = strike - futures_floor(tau, f0, a);
    if multiplier < -1e-12 * f0 {
        return Err(Error::Domain(format!(
            "strike {strike} below the reachable futures floor {}",
            futures_floor(tau, f0, a)
        )));
    }
    let k = effective_strike(tau, strike, f0, a);
    Ok(multiplier.max(0.0) * eta.eval(t, k))
}
