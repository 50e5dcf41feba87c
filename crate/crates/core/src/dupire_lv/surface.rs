use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_VOL_CAP: f64 = 5.0;
pub const SURFACE_FORMAT_VERSION: u32 = 1;

/// Local volatility `eta(t, k)` of the normalized spot.
///
/// Piecewise constant and left-continuous in time (the value at knot `t_m`
/// applies on `(t_{m-1}, t_m]`), piecewise linear in strike, flat outside
/// the knot ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalVolSurface {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub a: f64,
    pub time_knots: Vec<f64>,
    pub strike_knots: Vec<f64>,
    /// `values[m][l] = eta(time_knots[m], strike_knots[l])`.
    pub values: Vec<Vec<f64>>,
}

fn format_version() -> u32 {
    SURFACE_FORMAT_VERSION
}

impl LocalVolSurface {
    pub fn new(
        a: f64,
        time_knots: Vec<f64>,
        strike_knots: Vec<f64>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::with_cap(a, time_knots, strike_knots, values, DEFAULT_VOL_CAP)
    }

    pub fn with_cap(
        a: f64,
        time_knots: Vec<f64>,
        strike_knots: Vec<f64>,
        values: Vec<Vec<f64>>,
        cap: f64,
    ) -> Result<Self> {
        let s = Self {
            format_version: SURFACE_FORMAT_VERSION,
            a,
            time_knots,
            strike_knots,
            values,
        };
        s.validate(cap)?;
        Ok(s)
    }

    /// Same `eta` everywhere.
    pub fn flat(eta: f64, a: f64) -> Self {
        Self {
            format_version: SURFACE_FORMAT_VERSION,
            a,
            time_knots: vec![0.0],
            strike_knots: vec![1.0],
            values: vec![vec![eta]],
        }
    }

    pub fn validate(&self, cap: f64) -> Result<()> {
        if self.time_knots.is_empty() || self.strike_knots.is_empty() {
            return Err(Error::config("local vol surface needs at least one knot per axis"));
        }
        let ascending = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !ascending(&self.time_knots) || !ascending(&self.strike_knots) {
            return Err(Error::config("local vol knots must be strictly ascending"));
        }
        if self.values.len() != self.time_knots.len()
            || self.values.iter().any(|row| row.len() != self.strike_knots.len())
        {
            return Err(Error::config("local vol values do not match the knot grid"));
        }
        if !(self.a >= 0.0) {
            return Err(Error::param(format!("mean reversion a must be >= 0, got {}", self.a)));
        }
        // A flat zero surface is the deterministic limit and is allowed.
        let all_zero = self.values.iter().flatten().all(|v| *v == 0.0);
        for v in self.values.iter().flatten() {
            if !(v.is_finite() && (*v > 0.0 || all_zero) && *v <= cap) {
                return Err(Error::config(format!(
                    "local vol value {v} outside (0, {cap}]"
                )));
            }
        }
        Ok(())
    }

    /// Index of the time slice that applies at `t`.
    pub fn slice_index(&self, t: f64) -> usize {
        self.time_knots
            .partition_point(|&knot| knot < t)
            .min(self.time_knots.len() - 1)
    }

    pub fn slice(&self, t: f64) -> &[f64] {
        &self.values[self.slice_index(t)]
    }

    /// Linear interpolation of one time slice in strike, flat outside.
    pub fn interp_slice(&self, slice: &[f64], k: f64) -> f64 {
        let knots = &self.strike_knots;
        let n = knots.len();
        if k <= knots[0] {
            return slice[0];
        }
        if k >= knots[n - 1] {
            return slice[n - 1];
        }
        let j = knots.partition_point(|&x| x < k);
        let w = (k - knots[j - 1]) / (knots[j] - knots[j - 1]);
        slice[j - 1] + w * (slice[j] - slice[j - 1])
    }

    pub fn eval(&self, t: f64, k: f64) -> f64 {
        self.interp_slice(self.slice(t), k)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::data(e.to_string()))?;
        s.validate(f64::INFINITY)?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> LocalVolSurface {
        LocalVolSurface::new(
            0.3,
            vec![0.25, 0.5],
            vec![0.8, 1.0, 1.2],
            vec![vec![0.3, 0.25, 0.28], vec![0.4, 0.35, 0.3]],
        )
        .unwrap()
    }

    #[test]
    fn left_continuous_in_time() {
        let s = sample();
        assert_eq!(s.eval(0.25, 1.0), 0.25);
        assert_eq!(s.eval(0.2500001, 1.0), 0.35);
        assert_eq!(s.eval(0.0, 1.0), 0.25);
        assert_eq!(s.eval(9.0, 1.0), 0.35);
    }

    #[test]
    fn linear_in_strike_flat_outside() {
        let s = sample();
        assert!((s.eval(0.1, 0.9) - 0.275).abs() < 1e-15);
        assert_eq!(s.eval(0.1, 0.1), 0.3);
        assert_eq!(s.eval(0.1, 4.0), 0.28);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(LocalVolSurface::new(0.3, vec![0.5, 0.25], vec![1.0], vec![vec![0.2], vec![0.2]]).is_err());
        assert!(LocalVolSurface::new(0.3, vec![0.5], vec![1.0], vec![vec![6.0]]).is_err());
        assert!(LocalVolSurface::new(0.3, vec![0.5], vec![1.0], vec![vec![-0.1]]).is_err());
    }

    proptest! {
        #[test]
        fn json_reload_is_bit_exact(vals in proptest::collection::vec(1e-6f64..5.0, 6), a in 0.0f64..3.0) {
            let s = LocalVolSurface::new(
                a,
                vec![0.1, 0.7],
                vec![0.5, 1.0, 1.5],
                vec![vals[..3].to_vec(), vals[3..].to_vec()],
            ).unwrap();
            let back = LocalVolSurface::from_json(&s.to_json().unwrap()).unwrap();
            prop_assert_eq!(back.a.to_bits(), s.a.to_bits());
            for (r0, r1) in s.values.iter().zip(&back.values) {
                for (x, y) in r0.iter().zip(r1) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
