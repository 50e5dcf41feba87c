//! One-parameter-at-a-time scans of index implied vols.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::mc::{IndexMarket, OptionSpec};
use crate::dupire_lv::source::EtaSource;
use crate::error::{Error, Result};
use crate::slv_mc::{ModelParams, SimConfig};

pub const SENSITIVITY_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MONEYNESS: [f64; 7] = [0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParam {
    A,
    Rho,
    Kappa,
    Theta,
    Chi,
    RhoV,
    V0,
}

impl ScanParam {
    pub const ALL: [ScanParam; 7] = [Self::A, Self::Rho, Self::Kappa, Self::Theta, Self::Chi, Self::RhoV, Self::V0];

    pub fn name(self) -> &'static str {
        match self {
            Self::A => "a",
            Self::Rho => "rho",
            Self::Kappa => "kappa",
            Self::Theta => "theta",
            Self::Chi => "chi",
            Self::RhoV => "rho_v",
            Self::V0 => "v0",
        }
    }

    /// Copy of `base` with this parameter set to `value`, validated.
    pub fn apply(self, base: &ModelParams, value: f64) -> Result<ModelParams> {
        let mut p = base.clone();
        match self {
            Self::A => p.a = value,
            Self::Rho => p.rho = crate::slv_mc::CorrelationCurve::constant(value),
            Self::Kappa => p.kappa = value,
            Self::Theta => p.theta = value,
            Self::Chi => p.chi = value,
            Self::RhoV => p.rho_v = value,
            Self::V0 => p.v0 = value,
        }
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for ScanParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScanParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown parameter '{s}' (expected one of a, rho, kappa, theta, chi, rho_v, v0)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub maturities_months: Vec<u32>,
    pub moneyness: Vec<f64>,
    pub smile_months: u32,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self { maturities_months: (1..=12).collect(), moneyness: DEFAULT_MONEYNESS.to_vec(), smile_months: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub value: f64,
    /// ATM implied vol per maturity; `null` when the price leaves the Black range.
    pub atm_vols: Vec<Option<f64>>,
    pub atm_stderr: Vec<f64>,
    pub smile_vols: Vec<Option<f64>>,
    pub smile_stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub format_version: u32,
    pub parameter: ScanParam,
    pub base: ModelParams,
    pub grid: ScanGrid,
    pub n_particles: usize,
    pub seed: u64,
    pub entries: Vec<ScanEntry>,
}

impl SensitivityReport {
    pub fn entry(&self, value: f64) -> Option<&ScanEntry> {
        self.entries.iter().find(|e| e.value == value)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::data(format!("report serialization failed: {e}")))
    }

    /// Two whitespace-separated files per scanned value:
    /// `<param>_<value>_atm.dat` (months, vol, price stderr) and
    /// `<param>_<value>_smile.dat` (moneyness, vol, price stderr).
    pub fn write_dat(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let mut out = Vec::new();
        let fmt_vol = |v: &Option<f64>| v.map(|x| format!("{x:.10}")).unwrap_or_else(|| "nan".into());
        for e in &self.entries {
            let stem = format!("{}_{}", self.parameter, e.value);
            let mut atm = String::from("# maturity_months implied_vol price_stderr\n");
            for ((m, v), se) in self.grid.maturities_months.iter().zip(&e.atm_vols).zip(&e.atm_stderr) {
                atm.push_str(&format!("{m} {} {se:.10}\n", fmt_vol(v)));
            }
            let mut smile = String::from("# moneyness implied_vol price_stderr\n");
            for ((m, v), se) in self.grid.moneyness.iter().zip(&e.smile_vols).zip(&e.smile_stderr) {
                smile.push_str(&format!("{m} {} {se:.10}\n", fmt_vol(v)));
            }
            for (suffix, body) in [("atm", atm), ("smile", smile)] {
                let path = dir.join(format!("{stem}_{suffix}.dat"));
                std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
                out.push(path);
            }
        }
        Ok(out)
    }
}

/// ATM term structure and smile of index options for each value of `param`,
/// all simulated with the same seed.
pub fn sensitivity_scan(
    base: &ModelParams,
    eta: &dyn EtaSource,
    market: &IndexMarket,
    param: ScanParam,
    values: &[f64],
    grid: &ScanGrid,
    sim: &SimConfig,
) -> Result<SensitivityReport> {
    if values.is_empty() {
        return Err(Error::Usage("no parameter values to scan".into()));
    }
    let atm_specs: Vec<OptionSpec> = grid
        .maturities_months
        .iter()
        .map(|m| OptionSpec::index_call(market.expiry_after_months(*m), 1.0))
        .collect();
    let smile_expiry = market.expiry_after_months(grid.smile_months);
    let smile_specs: Vec<OptionSpec> = grid.moneyness.iter().map(|m| OptionSpec::index_call(smile_expiry, *m)).collect();
    let all: Vec<OptionSpec> = atm_specs.iter().chain(&smile_specs).copied().collect();

    let mut entries = Vec::with_capacity(values.len());
    for &value in values {
        let params = param.apply(base, value)?;
        let surface = eta.surface(params.a)?;
        let (priced, _) = market.price_index_options(&params, &surface, sim, &all)?;
        let (atm, smile) = priced.split_at(atm_specs.len());
        entries.push(ScanEntry {
            value,
            atm_vols: atm.iter().map(|p| p.implied_vol).collect(),
            atm_stderr: atm.iter().map(|p| p.stderr).collect(),
            smile_vols: smile.iter().map(|p| p.implied_vol).collect(),
            smile_stderr: smile.iter().map(|p| p.stderr).collect(),
        });
    }
    Ok(SensitivityReport {
        format_version: SENSITIVITY_FORMAT_VERSION,
        parameter: param,
        base: base.clone(),
        grid: grid.clone(),
        n_particles: sim.n_particles,
        seed: sim.seed,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in ScanParam::ALL {
            assert_eq!(p.name().parse::<ScanParam>().unwrap(), p);
        }
        assert!(matches!("sigma".parse::<ScanParam>(), Err(Error::Usage(_))));
    }

    #[test]
    fn invalid_values_are_param_errors() {
        let base = ModelParams::reference();
        assert!(matches!(ScanParam::Kappa.apply(&base, -1.0), Err(Error::Param(_))));
        assert!(matches!(ScanParam::RhoV.apply(&base, 1.0), Err(Error::Param(_))));
        assert_eq!(ScanParam::Chi.apply(&base, 0.0).unwrap().chi, 0.0);
    }
}
