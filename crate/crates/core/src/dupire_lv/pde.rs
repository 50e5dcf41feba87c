//! Forward PDE for normalized call prices
//!
//! ```text
//! dc/dt = -a c - a (1 - k) dc/dk + 1/2 k^2 eta(t,k)^2 d2c/dk2,   c(0,k) = (1-k)^+
//! ```
//!
//! Crank-Nicolson in time with Rannacher start-up (two backward-Euler half
//! steps), central differences in `k`, switching the transport term to
//! upwinding where the cell Peclet number exceeds 2. Boundaries:
//! `c(t, k_min) = 1 - k_min` and `c(t, k_max) = 0`.

use serde::{Deserialize, Serialize};

use super::maps::effective_strike;
use super::surface::LocalVolSurface;
use crate::error::{Error, Result};

/// Grid settings for [`solve_normalized_calls`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    pub k_min: f64,
    pub k_max: f64,
    /// Number of strike intervals.
    pub k_steps: usize,
    /// Nominal number of time steps per year; intervals between stop times
    /// are split into equal steps no longer than `1 / t_steps_per_year`.
    pub t_steps_per_year: usize,
    pub horizon: f64,
    /// Times that must fall on a layer (quote expiries).
    #[serde(default)]
    pub stop_times: Vec<f64>,
}

impl PdeGrid {
    pub fn new(k_steps: usize, t_steps_per_year: usize, horizon: f64) -> Self {
        Self {
            k_min: 0.0,
            k_max: 5.0,
            k_steps,
            t_steps_per_year,
            horizon,
            stop_times: Vec::new(),
        }
    }

    pub fn with_stops(mut self, stops: impl IntoIterator<Item = f64>) -> Self {
        self.stop_times.extend(stops);
        self
    }

    pub fn dk(&self) -> f64 {
        (self.k_max - self.k_min) / self.k_steps as f64
    }

    pub fn k_nodes(&self) -> Vec<f64> {
        let h = self.dk();
        (0..=self.k_steps).map(|i| self.k_min + i as f64 * h).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.k_min >= 0.0 && self.k_max > self.k_min + 0.0) || !self.k_max.is_finite() {
            return Err(Error::config(format!(
                "strike grid [{}, {}] must satisfy 0 <= k_min < k_max",
                self.k_min, self.k_max
            )));
        }
        if self.k_min >= 1.0 || self.k_max <= 1.0 {
            return Err(Error::config("strike grid must bracket k = 1"));
        }
        if self.k_steps < 4 || self.t_steps_per_year == 0 {
            return Err(Error::config("PDE grid needs at least 4 strike steps and 1 time step"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("PDE horizon must be positive"));
        }
        Ok(())
    }

    /// Layer times from 0 to the horizon, honouring every stop time.
    pub fn time_grid(&self, extra_stops: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        let mut stops: Vec<f64> = self
            .stop_times
            .iter()
            .chain(extra_stops)
            .copied()
            .filter(|t| *t > 0.0 && *t < self.horizon)
            .collect();
        if stops.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("non-finite PDE stop time"));
        }
        stops.push(self.horizon);
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        let dt_max = 1.0 / self.t_steps_per_year as f64;
        let mut times = vec![0.0];
        let mut prev = 0.0;
        for stop in stops {
            let n = ((stop - prev) / dt_max - 1e-9).ceil().max(1.0) as usize;
            for j in 1..n {
                times.push(prev + (stop - prev) * j as f64 / n as f64);
            }
            times.push(stop);
            prev = stop;
        }
        Ok(times)
    }
}

/// Solution `c(t, k)` of the normalized call PDE on every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCallGrid {
    pub a: f64,
    pub k_min: f64,
    pub dk: f64,
    pub times: Vec<f64>,
    /// `layers[n][i] = c(times[n], k_min + i dk)`.
    pub layers: Vec<Vec<f64>>,
}

impl NormalizedCallGrid {
    pub fn k_max(&self) -> f64 {
        self.k_min + self.dk * (self.layers[0].len() - 1) as f64
    }

    pub fn k_nodes(&self) -> Vec<f64> {
        (0..self.layers[0].len())
            .map(|i| self.k_min + i as f64 * self.dk)
            .collect()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    fn interp_layer(&self, layer: &[f64], k: f64) -> Result<f64> {
        if k <= 0.0 && self.k_min == 0.0 {
            // s >= 0, so E[(s - k)^+] = E[s] - k = 1 - k.
            return Ok(1.0 - k);
        }
        if k < self.k_min {
            return Err(Error::range(format!(
                "effective strike {k} below grid minimum {}",
                self.k_min
            )));
        }
        let x = (k - self.k_min) / self.dk;
        let n = layer.len() - 1;
        if x >= n as f64 {
            return Ok(0.0);
        }
        let i = x.floor() as usize;
        let w = x - i as f64;
        Ok(layer[i] * (1.0 - w) + layer[i + 1] * w)
    }

    /// `c(t, k)`: linear in `k` between nodes and in `t` between layers.
    pub fn value(&self, t: f64, k: f64) -> Result<f64> {
        if !(t >= 0.0) || t > self.horizon() + 1e-12 {
            return Err(Error::range(format!(
                "time {t} outside PDE horizon [0, {}]",
                self.horizon()
            )));
        }
        let j = self.times.partition_point(|&x| x < t - 1e-12);
        if j < self.times.len() && (self.times[j] - t).abs() <= 1e-12 {
            return self.interp_layer(&self.layers[j], k);
        }
        let j = j.max(1).min(self.times.len() - 1);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        let c0 = self.interp_layer(&self.layers[j - 1], k)?;
        let c1 = self.interp_layer(&self.layers[j], k)?;
        Ok(c0 * (1.0 - w) + c1 * w)
    }

    pub fn layer_at(&self, t: f64) -> Option<&[f64]> {
        self.times
            .iter()
            .position(|x| (x - t).abs() <= 1e-12)
            .map(|j| self.layers[j].as_slice())
    }
}

/// Price of a call on futures `T` with expiry `t`:
/// `df * F_0(T) * exp(-a (T - t)) * c(t, k_F)`.
pub fn vanilla_price_on_futures(
    grid: &NormalizedCallGrid,
    t: f64,
    maturity: f64,
    strike: f64,
    f0: f64,
    df: f64,
) -> Result<f64> {
    if maturity < t {
        return Err(Error::range(format!("option expiry {t} after futures maturity {maturity}")));
    }
    let tau = maturity - t;
    let k = effective_strike(tau, strike, f0, grid.a);
    let c = grid.value(t, k)?;
    Ok((df * f0 * (-grid.a * tau).exp() * c).max(0.0))
}

/// Tridiagonal operator `L` at interior nodes: `lower[i] c[i-1] + diag[i] c[i] + upper[i] c[i+1]`.
#[derive(Debug, Clone)]
pub(crate) struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Operator {
    pub(crate) fn build(a: f64, k_min: f64, dk: f64, eta_at_nodes: &[f64]) -> Self {
        let n = eta_at_nodes.len();
        let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let h2 = dk * dk;
        for i in 1..n - 1 {
            let k = k_min + i as f64 * dk;
            let diff = 0.5 * k * k * eta_at_nodes[i] * eta_at_nodes[i];
            let b = -a * (1.0 - k);
            let peclet = if diff > 0.0 { b.abs() * dk / diff } else { f64::INFINITY };
            if b == 0.0 || peclet <= 2.0 {
                lower[i] = diff / h2 - b / (2.0 * dk);
                diag[i] = -2.0 * diff / h2 - a;
                upper[i] = diff / h2 + b / (2.0 * dk);
            } else if b > 0.0 {
                lower[i] = diff / h2;
                diag[i] = -2.0 * diff / h2 - b / dk - a;
                upper[i] = diff / h2 + b / dk;
            } else {
                lower[i] = diff / h2 - b / dk;
                diag[i] = -2.0 * diff / h2 + b / dk - a;
                upper[i] = diff / h2;
            }
        }
        Self { lower, diag, upper }
    }

    /// One theta-scheme step `(I - theta dt L) c' = (I + (1-theta) dt L) c`
    /// with Dirichlet values `left`, `right`.
    pub(crate) fn step(
        &self,
        c: &[f64],
        out: &mut [f64],
        dt: f64,
        theta: f64,
        left: f64,
        right: f64,
        scratch: &mut Vec<f64>,
    ) {
        let n = c.len();
        let ex = (1.0 - theta) * dt;
        let im = theta * dt;
        // rhs in `out`, modified diagonal in scratch
        scratch.resize(n, 0.0);
        out[0] = left;
        out[n - 1] = right;
        for i in 1..n - 1 {
            out[i] = c[i]
                + ex * (self.lower[i] * c[i - 1] + self.diag[i] * c[i] + self.upper[i] * c[i + 1]);
        }
        // Thomas algorithm on interior rows; boundary values known.
        out[1] += im * self.lower[1] * left;
        out[n - 2] += im * self.upper[n - 2] * right;
        let sub = |i: usize| -im * self.lower[i];
        let sup = |i: usize| -im * self.upper[i];
        let dia = |i: usize| 1.0 - im * self.diag[i];
        scratch[1] = dia(1);
        for i in 2..n - 1 {
            let m = sub(i) / scratch[i - 1];
            scratch[i] = dia(i) - m * sup(i - 1);
            out[i] -= m * out[i - 1];
        }
        out[n - 2] /= scratch[n - 2];
        for i in (1..n - 2).rev() {
            out[i] = (out[i] - sup(i) * out[i + 1]) / scratch[i];
        }
    }
}

pub(crate) fn initial_layer(k_nodes: &[f64]) -> Vec<f64> {
    k_nodes.iter().map(|k| (1.0 - k).max(0.0)).collect()
}

/// Advances `start` (at `times[0]`) through `times`, holding the node vols fixed.
/// Returns the layers after each step.
pub(crate) fn advance(
    a: f64,
    k_min: f64,
    dk: f64,
    eta_at_nodes: &[f64],
    start: &[f64],
    times: &[f64],
    rannacher: bool,
) -> Result<Vec<Vec<f64>>> {
    let op = Operator::build(a, k_min, dk, eta_at_nodes);
    let left = 1.0 - k_min;
    let n = start.len();
    let mut layers = Vec::with_capacity(times.len().saturating_sub(1));
    let mut cur = start.to_vec();
    let mut scratch = Vec::with_capacity(n);
    let mut half = vec![0.0; n];
    for (step, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        let mut next = vec![0.0; n];
        if rannacher && step == 0 {
            op.step(&cur, &mut half, 0.5 * dt, 1.0, left, 0.0, &mut scratch);
            op.step(&half, &mut next, 0.5 * dt, 1.0, left, 0.0, &mut scratch);
        } else {
            op.step(&cur, &mut next, dt, 0.5, left, 0.0, &mut scratch);
        }
        if let Some(bad) = next.iter().position(|v| !v.is_finite() || *v < -1e-8) {
            return Err(Error::numerics(format!(
                "PDE solution invalid at t={}, node {bad}: {}",
                w[1], next[bad]
            )));
        }
        layers.push(next.clone());
        cur = next;
    }
    Ok(layers)
}

pub(crate) fn eta_nodes(eta: &LocalVolSurface, slice: usize, k_nodes: &[f64]) -> Vec<f64> {
    let row = &eta.values[slice];
    k_nodes.iter().map(|&k| eta.interp_slice(row, k)).collect()
}

/// Solves the normalized call PDE forward from `c(0,k) = (1-k)^+`.
pub fn solve_normalized_calls(
    eta: &LocalVolSurface,
    a: f64,
    grid: &PdeGrid,
) -> Result<NormalizedCallGrid> {
    if !(a >= 0.0) {
        return Err(Error::param(format!("mean reversion a must be >= 0, got {a}")));
    }
    let times = grid.time_grid(&eta.time_knots)?;
    let k_nodes = grid.k_nodes();
    let dk = grid.dk();
    let mut layers = vec![initial_layer(&k_nodes)];
    layers[0][0] = 1.0 - grid.k_min;
    let mut start = 0;
    while start + 1 < times.len() {
        // Group steps sharing one eta time slice.
        let slice = eta.slice_index(0.5 * (times[start] + times[start + 1]));
        let mut end = start + 1;
        while end + 1 < times.len()
            && eta.slice_index(0.5 * (times[end] + times[end + 1])) == slice
        {
            end += 1;
        }
        let nodes = eta_nodes(eta, slice, &k_nodes);
        let new = advance(
            a,
            grid.k_min,
            dk,
            &nodes,
            layers.last().expect("initial layer"),
            &times[start..=end],
            start == 0,
        )?;
        layers.extend(new);
        start = end;
    }
    Ok(NormalizedCallGrid {
        a,
        k_min: grid.k_min,
        dk,
        times,
        layers,
    })
}
