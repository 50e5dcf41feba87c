//! Black-76 prices and implied volatility inversion.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallPut {
    Call,
    Put,
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Discounted Black-76 price of a European option on a forward `f`.
pub fn black_price(f: f64, k: f64, t: f64, sigma: f64, df: f64, cp: CallPut) -> f64 {
    let sd = sigma * t.max(0.0).sqrt();
    let undiscounted = if sd <= 0.0 {
        match cp {
            CallPut::Call => (f - k).max(0.0),
            CallPut::Put => (k - f).max(0.0),
        }
    } else {
        let d1 = ((f / k).ln() + 0.5 * sd * sd) / sd;
        let d2 = d1 - sd;
        match cp {
            CallPut::Call => f * norm_cdf(d1) - k * norm_cdf(d2),
            CallPut::Put => k * norm_cdf(-d2) - f * norm_cdf(-d1),
        }
    };
    df * undiscounted
}

/// dPrice/dsigma.
pub fn black_vega(f: f64, k: f64, t: f64, sigma: f64, df: f64) -> f64 {
    let sd = sigma * t.sqrt();
    if sd <= 0.0 {
        return 0.0;
    }
    let d1 = ((f / k).ln() + 0.5 * sd * sd) / sd;
    df * f * norm_pdf(d1) * t.sqrt()
}

/// Inverts [`black_price`] in sigma.
///
/// Newton steps are kept inside a shrinking bracket; a step that leaves the
/// bracket is replaced by bisection.
pub fn implied_vol(price: f64, f: f64, k: f64, t: f64, df: f64, cp: CallPut) -> Result<f64> {
    if !(f > 0.0 && k > 0.0 && t > 0.0 && df > 0.0) {
        return Err(Error::Domain(format!(
            "implied vol needs positive inputs (F={f}, K={k}, t={t}, df={df})"
        )));
    }
    // Put prices are mapped to calls through parity.
    let call = match cp {
        CallPut::Call => price,
        CallPut::Put => price + df * (f - k),
    };
    let lower = df * (f - k).max(0.0);
    let upper = df * f;
    let tol = 1e-10 * df * f;
    if !(call >= lower - tol && call < upper) {
        return Err(Error::Domain(format!(
            "price {price} outside no-arbitrage bounds [{lower}, {upper})"
        )));
    }
    if call - lower <= tol {
        return Ok(0.0);
    }

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while black_price(f, k, t, hi, df, CallPut::Call) < call {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Domain(format!("no volatility below 1000 reproduces {price}")));
        }
    }
    // Start from the Brenner-Subrahmanyam style guess, clipped into the bracket.
    let mut sigma = ((2.0 * std::f64::consts::PI / t).sqrt() * call / (df * f)).clamp(lo, hi);
    if sigma <= lo || sigma >= hi {
        sigma = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let diff = black_price(f, k, t, sigma, df, CallPut::Call) - call;
        if diff.abs() < tol {
            return Ok(sigma);
        }
        if diff > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let vega = black_vega(f, k, t, sigma, df);
        let newton = sigma - diff / vega;
        sigma = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            return Ok(sigma);
        }
    }
    Ok(sigma)
}
