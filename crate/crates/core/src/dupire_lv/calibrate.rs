//! Fitting `eta(t, k)` to vanilla quotes on futures.
//!
//! Time slices are fitted one after another: the slice ending at expiry
//! `t_m` only changes prices at `t >= t_m`, so each objective evaluation
//! advances the PDE once from the already-fitted layer at `t_{m-1}`.

use std::cell::Cell;

use super::maps::effective_strike;
use super::pde::{advance, initial_layer, PdeGrid};
use super::surface::{LocalVolSurface, DEFAULT_VOL_CAP};
use crate::calibrator::subplex::{subplex_minimize, SubplexConfig};
use crate::error::{Error, Result};
use crate::market_data::{DiscountCurve, FuturesCurve, QuoteKind, VanillaQuote};
use crate::pricing::black::{implied_vol, CallPut};

#[derive(Debug, Clone, PartialEq)]
pub struct LvCalibrationConfig {
    pub k_max: f64,
    pub k_steps: usize,
    pub t_steps_per_year: usize,
    /// Strike knots per slice; `None` picks 5..=9 from the number of distinct strikes.
    pub strike_knots: Option<usize>,
    /// Weight of the squared second-difference smoothness penalty.
    pub lambda: f64,
    /// Largest accepted absolute residual in normalized call units.
    pub tolerance: f64,
    pub max_evals_per_slice: usize,
    pub cap: f64,
}

impl Default for LvCalibrationConfig {
    fn default() -> Self {
        Self {
            k_max: 5.0,
            k_steps: 250,
            t_steps_per_year: 200,
            strike_knots: None,
            lambda: 1e-3,
            tolerance: 5e-4,
            max_evals_per_slice: 4_000,
            cap: DEFAULT_VOL_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LvCalibration {
    pub surface: LocalVolSurface,
    /// Model minus market price for every fitted quote, in quote order.
    pub residuals: Vec<f64>,
    /// Fitted quotes (indices into the input slice).
    pub fitted: Vec<usize>,
    /// Quotes skipped because their strike lies below the reachable floor.
    pub excluded: Vec<usize>,
    pub warnings: Vec<String>,
    pub objective_evaluations: usize,
    pub pde_solves: usize,
    pub grid: PdeGrid,
}

struct Prepared {
    index: usize,
    expiry: f64,
    k: f64,
    c_market: f64,
    scale: f64,
}

fn knot_positions(ks: &[f64], count: Option<usize>) -> Vec<f64> {
    let mut distinct: Vec<f64> = ks.iter().map(|k| (k * 1e6).round() / 1e6).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let n = count.unwrap_or(distinct.len().clamp(5, 9)).max(1);
    let (mut lo, mut hi) = (distinct[0], distinct[distinct.len() - 1]);
    if hi - lo < 1e-6 {
        lo -= 0.1;
        hi += 0.1;
    }
    lo = lo.max(0.0);
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Fits the local volatility of the normalized spot for a fixed mean reversion `a`.
pub fn calibrate_local_vol(
    quotes: &[VanillaQuote],
    curve: &FuturesCurve,
    discount: &DiscountCurve,
    a: f64,
    cfg: &LvCalibrationConfig,
) -> Result<LvCalibration> {
    if !(a >= 0.0) {
        return Err(Error::param(format!("mean reversion a must be >= 0, got {a}")));
    }
    let mut warnings = Vec::new();
    let mut excluded = Vec::new();
    let mut prepared = Vec::new();
    for (i, q) in quotes.iter().enumerate() {
        if q.kind != QuoteKind::OnFutures {
            continue;
        }
        let contract = q
            .underlying
            .ok_or_else(|| Error::data(format!("futures quote {i} has no underlying")))?;
        let maturity = curve.maturity(contract);
        let f0 = curve.price(contract);
        let tau = maturity - q.expiry;
        if tau < -1e-12 {
            return Err(Error::data(format!("quote {i} expires after its futures")));
        }
        let k = effective_strike(tau.max(0.0), q.strike, f0, a);
        if k < 0.0 {
            warnings.push(format!(
                "quote {i}: strike {} below the reachable futures floor, excluded",
                q.strike
            ));
            excluded.push(i);
            continue;
        }
        let scale = discount.discount_factor(q.expiry)? * f0 * (-a * tau.max(0.0)).exp();
        prepared.push(Prepared {
            index: i,
            expiry: q.expiry,
            k,
            c_market: q.price / scale,
            scale,
        });
    }
    if prepared.is_empty() {
        return Err(Error::calibration("no usable quotes on futures"));
    }

    let mut expiries: Vec<f64> = prepared.iter().map(|p| p.expiry).collect();
    expiries.sort_by(f64::total_cmp);
    expiries.dedup_by(|x, y| (*x - *y).abs() < 1e-10);
    for p in &mut prepared {
        p.expiry = *expiries
            .iter()
            .find(|e| (**e - p.expiry).abs() < 1e-10)
            .expect("deduped expiry");
    }
    let strikes: Vec<f64> = prepared.iter().map(|p| p.k).collect();
    let strike_knots = knot_positions(&strikes, cfg.strike_knots);
    let horizon = *expiries.last().expect("non-empty");
    let grid = PdeGrid {
        k_min: 0.0,
        k_max: cfg.k_max,
        k_steps: cfg.k_steps,
        t_steps_per_year: cfg.t_steps_per_year,
        horizon,
        stop_times: expiries.clone(),
    };
    let times = grid.time_grid(&[])?;
    let k_nodes = grid.k_nodes();
    let dk = grid.dk();
    if strikes.iter().any(|k| *k >= cfg.k_max) {
        return Err(Error::config("quote effective strike beyond PDE grid k_max"));
    }

    // Index of each expiry in the time grid.
    let layer_of = |t: f64| times.iter().position(|x| (x - t).abs() < 1e-12).expect("stop time on grid");

    let probe = LocalVolSurface {
        format_version: super::surface::SURFACE_FORMAT_VERSION,
        a,
        time_knots: vec![0.0],
        strike_knots: strike_knots.clone(),
        values: vec![vec![0.0; strike_knots.len()]],
    };
    let nodes_for = |vals: &[f64]| -> Vec<f64> {
        k_nodes.iter().map(|&k| probe.interp_slice(vals, k)).collect()
    };

    let mut start_layer = initial_layer(&k_nodes);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(expiries.len());
    let mut total_evals = 0usize;
    let pde_solves = Cell::new(0usize);
    let mut residuals = vec![0.0; prepared.len()];
    let subplex_cfg = SubplexConfig {
        budget: cfg.max_evals_per_slice,
        xtol: 1e-9,
        ..Default::default()
    };

    let mut prev_index = 0usize;
    for (m, &expiry) in expiries.iter().enumerate() {
        let slice_quotes: Vec<&Prepared> =
            prepared.iter().filter(|p| p.expiry == expiry).collect();
        let end_index = layer_of(expiry);
        let seg = &times[prev_index..=end_index];
        let rannacher = m == 0;

        let guess = match values.last() {
            Some(prev) => prev.clone(),
            None => {
                let atm = slice_quotes
                    .iter()
                    .min_by(|x, y| (x.k - 1.0).abs().total_cmp(&(y.k - 1.0).abs()))
                    .expect("slice has quotes");
                let iv = if atm.k > 0.0 {
                    implied_vol(atm.c_market, 1.0, atm.k, expiry, 1.0, CallPut::Call).unwrap_or(0.3)
                } else {
                    0.3
                };
                vec![iv.clamp(0.01, cfg.cap); strike_knots.len()]
            }
        };
        let to_vals = |x: &[f64]| -> Vec<f64> { x.iter().map(|v| v.exp().min(cfg.cap)).collect() };

        let last_layer = |vals: &[f64]| -> Result<Vec<f64>> {
            pde_solves.set(pde_solves.get() + 1);
            let nodes = nodes_for(vals);
            let mut layers = advance(a, 0.0, dk, &nodes, &start_layer, seg, rannacher)?;
            Ok(layers.pop().unwrap_or_else(|| start_layer.clone()))
        };
        let model_c = |layer: &[f64], k: f64| -> f64 {
            let x = k / dk;
            let i = (x.floor() as usize).min(layer.len() - 2);
            let w = x - i as f64;
            layer[i] * (1.0 - w) + layer[i + 1] * w
        };
        let objective = |x: &[f64]| -> f64 {
            let vals = to_vals(x);
            let layer = match last_layer(&vals) {
                Ok(l) => l,
                Err(_) => return f64::INFINITY,
            };
            let fit: f64 = slice_quotes
                .iter()
                .map(|q| (model_c(&layer, q.k) - q.c_market).powi(2))
                .sum();
            let rough: f64 = vals
                .windows(3)
                .map(|w| (w[0] - 2.0 * w[1] + w[2]).powi(2))
                .sum();
            fit + cfg.lambda * rough
        };
        let x0: Vec<f64> = guess.iter().map(|v| v.ln()).collect();
        let scale = vec![0.1; x0.len()];
        let r = subplex_minimize(objective, &x0, &scale, None, &subplex_cfg)?;
        total_evals += r.evaluations;

        let vals = to_vals(&r.x);
        let layer = last_layer(&vals)?;
        for (j, p) in prepared.iter().enumerate() {
            if p.expiry == expiry {
                residuals[j] = model_c(&layer, p.k) - p.c_market;
            }
        }
        values.push(vals);
        start_layer = layer;
        prev_index = end_index;
    }

    let surface = LocalVolSurface::with_cap(a, expiries, strike_knots, values, cfg.cap)?;
    let worst = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let price_residuals: Vec<f64> = residuals
        .iter()
        .zip(&prepared)
        .map(|(r, p)| r * p.scale)
        .collect();
    if worst > cfg.tolerance {
        return Err(Error::Calibration {
            message: format!(
                "local vol fit residual {worst:.3e} exceeds tolerance {:.3e}",
                cfg.tolerance
            ),
            best: Some(Box::new(surface)),
            residuals: price_residuals,
        });
    }
    Ok(LvCalibration {
        surface,
        residuals: price_residuals,
        fitted: prepared.iter().map(|p| p.index).collect(),
        excluded,
        warnings,
        objective_evaluations: total_evals,
        // One extra solve per slice re-evaluates the accepted point.
        pde_solves: pde_solves.get(),
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{flat_discount, futures_option_grid, futures_quotes, wti_like_curve};

    #[test]
    fn recovers_flat_surface() {
        let curve = wti_like_curve(14);
        let disc = flat_discount();
        let truth = LocalVolSurface::flat(0.25, 0.3);
        let quotes = futures_quotes(&curve, &disc, &truth, &PdeGrid::new(250, 200, 1.0), &futures_option_grid()).unwrap();
        let cal = calibrate_local_vol(&quotes, &curve, &disc, 0.3, &LvCalibrationConfig::default()).unwrap();
        assert_eq!(cal.surface.time_knots.len(), 3);
        for row in &cal.surface.values {
            for v in row {
                assert!((v - 0.25).abs() < 5e-3, "{:?}", cal.surface.values);
            }
        }
        assert_eq!(cal.pde_solves, cal.objective_evaluations + 3);
        assert!(cal.excluded.is_empty());
    }

    #[test]
    fn strikes_below_floor_are_excluded() {
        let curve = wti_like_curve(14);
        let disc = flat_discount();
        let truth = LocalVolSurface::flat(0.25, 0.3);
        let mut quotes = futures_quotes(&curve, &disc, &truth, &PdeGrid::new(200, 100, 1.0), &futures_option_grid()).unwrap();
        // Contract 12 seen from the first expiry: floor near 0.2 F0.
        let mut low = quotes[0].clone();
        low.underlying = Some(12);
        low.strike = 0.1 * curve.price(12);
        low.price = disc.discount_factor(low.expiry).unwrap() * (curve.price(12) - low.strike);
        quotes.push(low);
        let cfg = LvCalibrationConfig { k_steps: 200, t_steps_per_year: 100, ..Default::default() };
        let cal = calibrate_local_vol(&quotes, &curve, &disc, 0.3, &cfg).unwrap();
        assert_eq!(cal.excluded, vec![15]);
        assert_eq!(cal.warnings.len(), 1);
    }

    #[test]
    fn unreachable_tolerance_returns_best_surface() {
        let curve = wti_like_curve(14);
        let disc = flat_discount();
        let truth = LocalVolSurface::flat(0.25, 0.3);
        let mut quotes = futures_quotes(&curve, &disc, &truth, &PdeGrid::new(200, 100, 1.0), &futures_option_grid()).unwrap();
        // Non-convex in strike: no surface can match.
        quotes[1].price *= 0.5;
        let cfg = LvCalibrationConfig { k_steps: 200, t_steps_per_year: 100, max_evals_per_slice: 500, ..Default::default() };
        match calibrate_local_vol(&quotes, &curve, &disc, 0.3, &cfg) {
            Err(Error::Calibration { best, residuals, .. }) => {
                assert!(best.is_some());
                assert_eq!(residuals.len(), 15);
            }
            other => panic!("expected calibration error, got {other:?}"),
        }
    }
}
