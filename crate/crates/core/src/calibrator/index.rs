//! Calibration of `(a, chi, rho_v, rho)` to index option quotes.

use serde::{Deserialize, Serialize};

use super::hybrid::{hybrid_minimize, HybridConfig, HybridResult};
use super::loss::{loss_normalized, loss_p, DenominatorPolicy};
use super::Bounds;
use crate::dupire_lv::{quantize_a, EtaSource};
use crate::error::{Error, Result};
use crate::market_data::{QuoteSet, VanillaQuote};
use crate::pricing::{IndexMarket, OptionSpec};
use crate::slv_mc::{shared_psd, CorrelationCurve, ModelParams, SimConfig, VarianceCoupling};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// The calibrated coordinates, in optimizer order `[a, chi, rho_v, rho]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParam {
    pub a: f64,
    pub chi: f64,
    pub rho_v: f64,
    pub rho: f64,
}

impl ReducedParam {
    pub const NAMES: [&'static str; 4] = ["a", "chi", "rho_v", "rho"];

    pub fn from_slice(x: &[f64]) -> Self {
        Self { a: x[0], chi: x[1], rho_v: x[2], rho: x[3] }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.a, self.chi, self.rho_v, self.rho]
    }

    /// Values fitted to the 16-Dec-2019 WTI market, used as synthetic truth.
    pub fn reference_calibrated() -> Self {
        Self { a: 0.267419, chi: 0.0287296, rho_v: -0.18058, rho: 0.86381 }
    }

    /// Starting point reported alongside the fitted values above.
    pub fn reference_seed() -> Self {
        Self { a: 0.1, chi: 1.0, rho_v: 1.0, rho: 0.0 }
    }
}

/// Parameters held fixed during the index fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub kappa: f64,
    pub theta: f64,
    pub v0: f64,
}

impl Default for FixedParams {
    fn default() -> Self {
        Self { kappa: 1.0, theta: 1.0, v0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub p: f64,
    /// Use the snapshot-normalized loss (needs two dated snapshots).
    pub normalized: bool,
    #[serde(default)]
    pub policy: DenominatorPolicy,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self { p: 2.0, normalized: true, policy: DenominatorPolicy::Floor }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexCalibrationConfig {
    pub bounds: Bounds,
    pub fixed: FixedParams,
    pub loss: LossSpec,
    pub sim: SimConfig,
    pub hybrid: HybridConfig,
    pub coupling: VarianceCoupling,
    /// Loss assigned to infeasible or failing parameter points (plus the size of the violation).
    pub penalty: f64,
}

impl Default for IndexCalibrationConfig {
    fn default() -> Self {
        Self {
            bounds: Bounds::new(vec![0.0, 0.0, -1.0, -1.0], vec![1.0, 1.0, 1.0, 1.0]).expect("valid bounds"),
            fixed: FixedParams::default(),
            loss: LossSpec::default(),
            sim: SimConfig { n_particles: 50_000, ..Default::default() },
            hybrid: HybridConfig::default(),
            coupling: VarianceCoupling::Shared,
            penalty: 1e4,
        }
    }
}

impl IndexCalibrationConfig {
    /// Full model parameters for a reduced point; `a` is quantized to the surface cache grid.
    pub fn model_params(&self, p: &ReducedParam) -> Result<ModelParams> {
        let f = self.fixed;
        ModelParams {
            a: quantize_a(p.a),
            kappa: f.kappa,
            theta: f.theta,
            chi: p.chi,
            rho_v: p.rho_v,
            v0: f.v0,
            rho: CorrelationCurve::constant(p.rho),
            coupling: self.coupling,
        }
        .with_coupling(self.coupling)
    }
}

enum Target {
    Plain(Vec<f64>),
    Snapshots { early: Vec<f64>, late: Vec<f64> },
}

/// Loss of the model index-option prices against the quotes, as a function of the reduced parameters.
pub struct IndexObjective<'a> {
    market: &'a IndexMarket,
    eta: &'a dyn EtaSource,
    specs: Vec<OptionSpec>,
    target: Target,
    cfg: IndexCalibrationConfig,
}

fn spec_for(market: &IndexMarket, q: &VanillaQuote) -> Result<OptionSpec> {
    let m = q.moneyness.unwrap_or(q.strike / market.i0);
    Ok(OptionSpec::index_call(market.date_for_time(q.expiry)?, m))
}

impl<'a> IndexObjective<'a> {
    pub fn new(market: &'a IndexMarket, eta: &'a dyn EtaSource, quotes: &QuoteSet, cfg: IndexCalibrationConfig) -> Result<Self> {
        if cfg.bounds.dim() != 4 {
            return Err(Error::config("index calibration bounds need 4 coordinates"));
        }
        cfg.sim.validate()?;
        let (specs, target) = if cfg.loss.normalized {
            let (early, late) = quotes.index_snapshots()?;
            let specs = early.iter().map(|q| spec_for(market, q)).collect::<Result<Vec<_>>>()?;
            let price = |v: &[VanillaQuote]| v.iter().map(|q| q.price).collect::<Vec<_>>();
            (specs, Target::Snapshots { early: price(&early), late: price(&late) })
        } else {
            let index = quotes.on_index();
            let last = index.iter().map(|q| q.quote_date).max().ok_or_else(|| Error::data("no index quotes"))?;
            let latest: Vec<&VanillaQuote> = index.iter().filter(|q| q.quote_date == last).collect();
            let specs = latest.iter().map(|q| spec_for(market, q)).collect::<Result<Vec<_>>>()?;
            (specs, Target::Plain(latest.iter().map(|q| q.price).collect()))
        };
        if specs.is_empty() {
            return Err(Error::data("no index quotes"));
        }
        Ok(Self { market, eta, specs, target, cfg })
    }

    pub fn config(&self) -> &IndexCalibrationConfig {
        &self.cfg
    }

    pub fn specs(&self) -> &[OptionSpec] {
        &self.specs
    }

    /// Full model parameters for a reduced point.
    pub fn model_params(&self, p: &ReducedParam) -> Result<ModelParams> {
        self.cfg.model_params(p)
    }

    /// Model prices of the quoted options, in quote order.
    pub fn model_prices(&self, p: &ReducedParam) -> Result<Vec<f64>> {
        let params = self.model_params(p)?;
        let eta = self.eta.surface(params.a)?;
        let (priced, _) = self.market.price_index_options(&params, &eta, &self.cfg.sim, &self.specs)?;
        Ok(priced.iter().map(|o| o.price).collect())
    }

    pub fn try_loss(&self, p: &ReducedParam) -> Result<f64> {
        let model = self.model_prices(p)?;
        match &self.target {
            Target::Plain(m) => loss_p(m, &model, self.cfg.loss.p),
            Target::Snapshots { early, late } => loss_normalized(early, late, &model, self.cfg.loss.p, self.cfg.loss.policy),
        }
    }

    /// Loss with infeasible or failing points mapped to a finite penalty.
    pub fn loss(&self, x: &[f64]) -> f64 {
        let p = ReducedParam::from_slice(x);
        if self.cfg.coupling == VarianceCoupling::Shared && !shared_psd(p.rho, p.rho_v) {
            let excess = 2.0 * p.rho_v * p.rho_v - 1.0 - p.rho;
            return self.cfg.penalty * (1.0 + excess.max(0.0));
        }
        match self.try_loss(&p) {
            Ok(v) if v.is_finite() => v,
            _ => self.cfg.penalty * 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub format_version: u32,
    pub params: ReducedParam,
    pub fixed: FixedParams,
    pub loss: f64,
    pub start: ReducedParam,
    pub start_loss: f64,
    pub global: ReducedParam,
    pub global_loss: f64,
    pub loss_trace: Vec<f64>,
    pub n_evals: usize,
    pub seconds: f64,
    pub seed: u64,
    pub n_particles: usize,
    pub coupling: VarianceCoupling,
    pub quote_files: Vec<String>,
    pub eta_file: Option<String>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::data(format!("report serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::data(format!("invalid calibration report: {e}")))?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::data(format!("unsupported report format_version {}", r.format_version)));
        }
        Ok(r)
    }
}

/// Random (or warm) start, ESCH, then Subplex on the index objective.
pub fn hybrid_calibrate(objective: &IndexObjective<'_>) -> Result<CalibrationReport> {
    let cfg = objective.config();
    let r: HybridResult = hybrid_minimize(|x: &[f64]| objective.loss(x), &cfg.bounds, &cfg.hybrid)?;
    Ok(CalibrationReport {
        format_version: REPORT_FORMAT_VERSION,
        params: ReducedParam::from_slice(&r.p2),
        fixed: cfg.fixed,
        loss: r.f2,
        start: ReducedParam::from_slice(&r.p0),
        start_loss: r.f0,
        global: ReducedParam::from_slice(&r.p1),
        global_loss: r.f1,
        loss_trace: r.loss_trace,
        n_evals: r.n_evals,
        seconds: r.seconds,
        seed: cfg.hybrid.seed,
        n_particles: cfg.sim.n_particles,
        coupling: cfg.coupling,
        quote_files: Vec::new(),
        eta_file: None,
    })
}
