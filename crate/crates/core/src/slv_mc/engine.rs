use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;

use super::kernel::{auto_bandwidth, conditional_variance_ratio, KernelRegression};
use super::params::{Bandwidth, ModelParams, SimConfig};
use super::rng::{CorrelationFactor, ParticleRng};
use crate::dupire_lv::{futures_from_spot, LocalVolSurface};
use crate::error::{Error, Result};
use crate::market_data::{year_fraction, BusinessCalendar, FuturesCurve, RollSchedule};

/// Full-truncation Euler step of the variance.
pub fn step_variance(v: f64, dt: f64, kappa: f64, theta: f64, chi: f64, dw: f64) -> f64 {
    let vp = v.max(0.0);
    v + kappa * (theta - vp) * dt + chi * vp.sqrt() * dw
}

/// Euler step of a normalized spot factor with leverage ratio `r`.
/// The result is floored at zero, where the diffusion vanishes.
pub fn step_spot(s: f64, dt: f64, a: f64, eta: f64, r: f64, dw: f64) -> f64 {
    (s + a * (1.0 - s) * dt + s * eta * r.sqrt() * dw).max(0.0)
}

/// Which spot factor drives a contract: even indices `c`, odd `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    C,
    F,
}

pub fn factor_of(contract: usize) -> Factor {
    if contract % 2 == 0 {
        Factor::C
    } else {
        Factor::F
    }
}

/// Simulation dates (closes), starting at the valuation date.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGrid {
    pub dates: Vec<NaiveDate>,
    /// ACT/365 years from the first date.
    pub times: Vec<f64>,
}

impl SimGrid {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::config("simulation grid is empty"));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::data("simulation dates must increase"));
        }
        let times = dates.iter().map(|d| year_fraction(dates[0], *d)).collect();
        Ok(Self { dates, times })
    }

    pub fn business_days(cal: &BusinessCalendar, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let mut dates = cal.business_days(start, end);
        if dates.first() != Some(&start) {
            dates.insert(0, start);
        }
        Self::new(dates)
    }

    pub fn from_schedule(schedule: &RollSchedule) -> Result<Self> {
        Self::new(schedule.dates())
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }
}

/// Particle states. Under a shared variance `v_f` repeats `v_c` exactly.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub s_c: Vec<f64>,
    pub s_f: Vec<f64>,
    pub v_c: Vec<f64>,
    pub v_f: Vec<f64>,
    pub t: f64,
    pub step: u64,
    rngs: Vec<ParticleRng>,
}

struct Particle<'a> {
    s_c: &'a mut f64,
    s_f: &'a mut f64,
    v_c: &'a mut f64,
    v_f: &'a mut f64,
    rng: &'a mut ParticleRng,
}

const CHUNK: usize = 2048;

impl Ensemble {
    pub fn new(n: usize, v0: f64, seed: u64) -> Self {
        Self {
            s_c: vec![1.0; n],
            s_f: vec![1.0; n],
            v_c: vec![v0; n],
            v_f: vec![v0; n],
            t: 0.0,
            step: 0,
            rngs: (0..n as u64).map(|i| ParticleRng::new(seed, i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.s_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_c.is_empty()
    }

    pub fn factor(&self, f: Factor) -> &[f64] {
        match f {
            Factor::C => &self.s_c,
            Factor::F => &self.s_f,
        }
    }

    fn bandwidth(cfg: &SimConfig, s: &[f64]) -> f64 {
        match cfg.bandwidth {
            Bandwidth::Fixed(e) => e,
            Bandwidth::Auto => auto_bandwidth(s),
        }
    }

    /// Leverage ratios for both factors at the current state.
    fn ratios(&self, cfg: &SimConfig) -> (Ratios, Ratios) {
        let make = |s: &[f64], v: &[f64]| {
            let eps = Self::bandwidth(cfg, s);
            if cfg.exact_kernel {
                let eps = if eps > 0.0 { eps } else { f64::INFINITY };
                Ratios::Exact((0..s.len()).into_par_iter().map(|i| conditional_variance_ratio(s, v, i, eps)).collect())
            } else {
                Ratios::Binned(KernelRegression::build(s, v, eps, cfg.bins))
            }
        };
        (make(&self.s_c, &self.v_c), make(&self.s_f, &self.v_f))
    }

    /// Advances every particle by `dt`.
    pub fn advance(&mut self, params: &ModelParams, eta: &LocalVolSurface, dt: f64, cfg: &SimConfig) -> Result<()> {
        let mid = self.t + 0.5 * dt;
        let slice = eta.slice(mid);
        let corr = CorrelationFactor::new(params.rho.at(mid), params.rho_v, params.coupling)?;
        let (rc, rf) = self.ratios(cfg);
        let sqrt_dt = dt.sqrt();
        let p = params;
        let body = |i: usize, q: Particle<'_>| {
            let z = q.rng.normals();
            let inc = corr.apply(z, sqrt_dt);
            let (sc, sf, vc, vf) = (*q.s_c, *q.s_f, *q.v_c, *q.v_f);
            let r_c = rc.get(i, sc, vc);
            let r_f = rf.get(i, sf, vf);
            *q.s_c = step_spot(sc, dt, p.a, eta.interp_slice(slice, sc), r_c, inc.c);
            *q.s_f = step_spot(sf, dt, p.a, eta.interp_slice(slice, sf), r_f, inc.f);
            *q.v_c = step_variance(vc, dt, p.kappa, p.theta, p.chi, inc.v_c);
            *q.v_f = step_variance(vf, dt, p.kappa, p.theta, p.chi, inc.v_f);
        };
        self.s_c
            .par_chunks_mut(CHUNK)
            .zip(self.s_f.par_chunks_mut(CHUNK))
            .zip(self.v_c.par_chunks_mut(CHUNK))
            .zip(self.v_f.par_chunks_mut(CHUNK))
            .zip(self.rngs.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(chunk, ((((sc, sf), vc), vf), rng))| {
                for j in 0..sc.len() {
                    body(
                        chunk * CHUNK + j,
                        Particle { s_c: &mut sc[j], s_f: &mut sf[j], v_c: &mut vc[j], v_f: &mut vf[j], rng: &mut rng[j] },
                    );
                }
            });
        self.t += dt;
        self.step += 1;
        if let Some(i) = (0..self.len()).find(|&i| !(self.s_c[i].is_finite() && self.s_f[i].is_finite() && self.v_c[i].is_finite() && self.v_f[i].is_finite())) {
            return Err(Error::numerics(format!("non-finite particle {i} at step {}", self.step)));
        }
        Ok(())
    }
}

enum Ratios {
    Exact(Vec<f64>),
    Binned(KernelRegression),
}

impl Ratios {
    fn get(&self, i: usize, s: f64, v: f64) -> f64 {
        match self {
            Ratios::Exact(r) => r[i],
            Ratios::Binned(k) => k.ratio(s, v),
        }
    }
}

/// The ensemble at the close of one simulation date.
pub struct Snapshot<'a> {
    pub index: usize,
    pub date: NaiveDate,
    pub t: f64,
    pub a: f64,
    pub ensemble: &'a Ensemble,
    pub curve: &'a FuturesCurve,
}

impl Snapshot<'_> {
    /// Futures price of `contract` for every particle; NaN after expiry.
    pub fn futures(&self, contract: usize) -> Vec<f64> {
        let mut out = Vec::new();
        self.futures_into(contract, &mut out);
        out
    }

    pub fn futures_into(&self, contract: usize, out: &mut Vec<f64>) {
        let tau = self.curve.maturity(contract) - self.t;
        let f0 = self.curve.price(contract);
        out.clear();
        if tau < -1e-12 {
            out.resize(self.ensemble.len(), f64::NAN);
            return;
        }
        let tau = tau.max(0.0);
        out.extend(
            self.ensemble
                .factor(factor_of(contract))
                .iter()
                .map(|&s| futures_from_spot(s, tau, f0, self.a)),
        );
    }
}

/// Receives the ensemble at the close of every simulation date, the valuation date included.
pub trait PathObserver {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()>;
}

impl<A: PathObserver, B: PathObserver> PathObserver for (A, B) {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        self.0.observe(snap)?;
        self.1.observe(snap)
    }
}

impl<T: PathObserver + ?Sized> PathObserver for &mut T {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        (**self).observe(snap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimStats {
    pub steps: u64,
    pub seconds: f64,
}

/// Number of Euler sub-steps covering `dt` years.
pub fn substeps(dt: f64, steps_per_year: usize) -> usize {
    ((steps_per_year as f64 * dt - 1e-9).ceil() as usize).max(1)
}

/// Runs the particle system over `grid` and hands every close to `observer`.
pub fn simulate<O: PathObserver + ?Sized>(
    params: &ModelParams,
    eta: &LocalVolSurface,
    curve: &FuturesCurve,
    grid: &SimGrid,
    cfg: &SimConfig,
    observer: &mut O,
) -> Result<SimStats> {
    let started = Instant::now();
    params.validate()?;
    cfg.validate()?;
    if (eta.a - params.a).abs() > 1e-12 {
        return Err(Error::param(format!(
            "local vol surface was built for a={} but the model uses a={}",
            eta.a, params.a
        )));
    }
    if grid.dates[0] != curve.valuation_date() {
        return Err(Error::data(format!(
            "simulation starts {} but the curve is valued {}",
            grid.dates[0],
            curve.valuation_date()
        )));
    }
    let last = curve.maturity(curve.len() - 1);
    if grid.horizon() > last + 1e-12 {
        return Err(Error::range(format!(
            "horizon {} beyond the last futures maturity {last}",
            grid.horizon()
        )));
    }
    let mut ens = Ensemble::new(cfg.n_particles, params.v0, cfg.seed);
    fn snap<'a>(ens: &'a Ensemble, grid: &SimGrid, a: f64, curve: &'a FuturesCurve, index: usize) -> Snapshot<'a> {
        Snapshot { index, date: grid.dates[index], t: grid.times[index], a, ensemble: ens, curve }
    }
    observer.observe(&snap(&ens, grid, params.a, curve, 0))?;
    for d in 1..grid.dates.len() {
        let span = grid.times[d] - grid.times[d - 1];
        let n = substeps(span, cfg.steps_per_year);
        for k in 0..n {
            // Land exactly on the grid time at the last sub-step.
            let dt = if k + 1 == n { grid.times[d] - ens.t } else { span / n as f64 };
            ens.advance(params, eta, dt, cfg)?;
        }
        ens.t = grid.times[d];
        observer.observe(&snap(&ens, grid, params.a, curve, d))?;
    }
    Ok(SimStats { steps: ens.step, seconds: started.elapsed().as_secs_f64() })
}
