//! Run configuration read from a TOML file.
//!
//! Relative paths are resolved against the directory holding the file.
//! Every key is optional; command-line flags override the file.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::calibrator::{Bounds, LossSpec};
use crate::dupire_lv::LvCalibrationConfig;
use crate::error::{Error, Result};
use crate::market_data::calendar::parse_date;
use crate::slv_mc::{Bandwidth, ModelParams, SimConfig, VarianceCoupling};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub valuation_date: Option<String>,
    pub curve: Option<PathBuf>,
    pub discount: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub futures_quotes: Option<PathBuf>,
    pub index_quotes: Option<PathBuf>,
    /// Stored local volatility surface; takes precedence over `futures_quotes`.
    pub eta: Option<PathBuf>,
    /// Flat local volatility used when neither `eta` nor `futures_quotes` is set.
    pub eta_flat: Option<f64>,
    pub index_level: f64,
    pub output: PathBuf,
    pub seed: u64,
    pub model: ModelSection,
    pub sim: SimSection,
    pub lv: LvSection,
    pub loss: LossSpec,
    pub calibration: CalibrationSection,
    pub sensitivity: SensitivitySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            valuation_date: None,
            curve: None,
            discount: None,
            holidays: None,
            futures_quotes: None,
            index_quotes: None,
            eta: None,
            eta_flat: None,
            index_level: crate::index_engine::DEFAULT_INDEX_LEVEL,
            output: PathBuf::from("out"),
            seed: 0,
            model: ModelSection::default(),
            sim: SimSection::default(),
            lv: LvSection::default(),
            loss: LossSpec::default(),
            calibration: CalibrationSection::default(),
            sensitivity: SensitivitySection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub a: f64,
    pub kappa: f64,
    pub theta: f64,
    pub chi: f64,
    pub rho_v: f64,
    pub v0: f64,
    pub rho: f64,
    pub coupling: VarianceCoupling,
}

impl Default for ModelSection {
    fn default() -> Self {
        let r = ModelParams::reference();
        Self {
            a: r.a,
            kappa: r.kappa,
            theta: r.theta,
            chi: r.chi,
            rho_v: r.rho_v,
            v0: r.v0,
            rho: r.rho.values[0],
            coupling: r.coupling,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.a, self.kappa, self.theta, self.chi, self.rho_v, self.v0, self.rho)?
            .with_coupling(self.coupling)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub n_particles: usize,
    pub steps_per_year: usize,
    pub bins: usize,
    pub exact_kernel: bool,
    /// Fixed kernel bandwidth; automatic when absent.
    pub bandwidth: Option<f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_particles: d.n_particles,
            steps_per_year: d.steps_per_year,
            bins: d.bins,
            exact_kernel: d.exact_kernel,
            bandwidth: None,
        }
    }
}

impl SimSection {
    pub fn config(&self, seed: u64) -> Result<SimConfig> {
        let c = SimConfig {
            n_particles: self.n_particles,
            steps_per_year: self.steps_per_year,
            bandwidth: self.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
            seed,
            bins: self.bins,
            exact_kernel: self.exact_kernel,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LvSection {
    pub k_steps: usize,
    pub t_steps_per_year: usize,
    pub strike_knots: Option<usize>,
    pub lambda: f64,
    pub tolerance: f64,
    pub max_evals_per_slice: usize,
}

impl Default for LvSection {
    fn default() -> Self {
        let d = LvCalibrationConfig::default();
        Self {
            k_steps: d.k_steps,
            t_steps_per_year: d.t_steps_per_year,
            strike_knots: d.strike_knots,
            lambda: d.lambda,
            tolerance: d.tolerance,
            max_evals_per_slice: d.max_evals_per_slice,
        }
    }
}

impl LvSection {
    pub fn config(&self) -> LvCalibrationConfig {
        LvCalibrationConfig {
            k_steps: self.k_steps,
            t_steps_per_year: self.t_steps_per_year,
            strike_knots: self.strike_knots,
            lambda: self.lambda,
            tolerance: self.tolerance,
            max_evals_per_slice: self.max_evals_per_slice,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub esch_budget: usize,
    pub subplex_budget: usize,
    pub subplex_scale: f64,
    pub coupling: VarianceCoupling,
    /// Bounds in `[a, chi, rho_v, rho]` order.
    pub lower: [f64; 4],
    pub upper: [f64; 4],
    /// Optimizer expiries extend to this many months.
    pub horizon_months: u32,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            esch_budget: 300,
            subplex_budget: 200,
            subplex_scale: 0.1,
            coupling: VarianceCoupling::Shared,
            lower: [0.0, 0.0, -1.0, -1.0],
            upper: [1.0, 1.0, 1.0, 1.0],
            horizon_months: 12,
        }
    }
}

impl CalibrationSection {
    pub fn bounds(&self) -> Result<Bounds> {
        Bounds::new(self.lower.to_vec(), self.upper.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    pub maturities_months: Vec<u32>,
    pub moneyness: Vec<f64>,
    pub smile_months: u32,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        let g = crate::pricing::ScanGrid::default();
        Self { maturities_months: g.maturities_months, moneyness: g.moneyness, smile_months: g.smile_months }
    }
}

impl RunConfig {
    /// Parses TOML text; relative paths are taken relative to `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(format!("invalid configuration: {e}")))?;
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        resolve(&mut cfg.curve);
        resolve(&mut cfg.discount);
        resolve(&mut cfg.holidays);
        resolve(&mut cfg.futures_quotes);
        resolve(&mut cfg.index_quotes);
        resolve(&mut cfg.eta);
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn valuation(&self) -> Result<NaiveDate> {
        let s = self.valuation_date.as_deref().ok_or_else(|| Error::config("valuation_date is not set"))?;
        parse_date(s)
    }

    pub fn required<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref().ok_or_else(|| Error::config(format!("`{key}` is not set in the configuration")))
    }
}
