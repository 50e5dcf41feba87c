use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the variance process enters the two spot factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceCoupling {
    /// One variance per particle, correlated `rho_v` with both spot factors.
    #[default]
    Shared,
    /// One variance per factor, each correlated `rho_v` with its own spot
    /// driver only; the two variance noises are otherwise independent.
    PerFactor,
}

/// Piecewise-constant correlation between the two spot drivers.
///
/// `values[i]` applies on `(times[i-1], times[i]]`; the last value extends to infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl CorrelationCurve {
    pub fn constant(rho: f64) -> Self {
        Self { times: vec![f64::INFINITY], values: vec![rho] }
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x < t).min(self.values.len() - 1);
        self.values[i]
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.times.len() != self.values.len() {
            return Err(Error::param("correlation curve needs one time per value"));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("correlation curve times must increase"));
        }
        if let Some(r) = self.values.iter().find(|r| !(r.abs() <= 1.0)) {
            return Err(Error::param(format!("correlation {r} outside [-1, 1]")));
        }
        Ok(())
    }
}

/// Parameters of the two-factor stochastic local volatility model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub kappa: f64,
    pub theta: f64,
    pub chi: f64,
    pub rho_v: f64,
    pub v0: f64,
    pub rho: CorrelationCurve,
    #[serde(default)]
    pub coupling: VarianceCoupling,
}

const PSD_SLACK: f64 = 1e-12;

impl ModelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(a: f64, kappa: f64, theta: f64, chi: f64, rho_v: f64, v0: f64, rho: f64) -> Result<Self> {
        let p = Self {
            a,
            kappa,
            theta,
            chi,
            rho_v,
            v0,
            rho: CorrelationCurve::constant(rho),
            coupling: VarianceCoupling::Shared,
        };
        p.validate()?;
        Ok(p)
    }

    /// `a=0.3, rho=0.9, kappa=1, theta=1, chi=0.1, rho_v=0, v0=1`.
    pub fn reference() -> Self {
        Self::new(0.3, 1.0, 1.0, 0.1, 0.0, 1.0, 0.9).expect("reference parameters are valid")
    }

    pub fn with_coupling(mut self, coupling: VarianceCoupling) -> Result<Self> {
        self.coupling = coupling;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("kappa", self.kappa), ("theta", self.theta), ("v0", self.v0)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return Err(Error::param(format!("chi must be >= 0, got {}", self.chi)));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::param(format!("a must be >= 0, got {}", self.a)));
        }
        if !(self.rho_v.abs() <= 1.0) {
            return Err(Error::param(format!("rho_v {} outside [-1, 1]", self.rho_v)));
        }
        self.rho.validate()?;
        if self.coupling == VarianceCoupling::Shared {
            for &r in &self.rho.values {
                if !shared_psd(r, self.rho_v) {
                    return Err(Error::param(format!(
                        "correlation matrix not positive semi-definite: rho={r}, rho_v={} \
                         (shared variance needs rho_v^2 <= (1+rho)/2)",
                        self.rho_v
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `[[1,rho,rv],[rho,1,rv],[rv,rv,1]]` is PSD iff `rv^2 <= (1+rho)/2`.
pub fn shared_psd(rho: f64, rho_v: f64) -> bool {
    rho.abs() <= 1.0 && rho_v.abs() <= 1.0 && 2.0 * rho_v * rho_v <= 1.0 + rho + PSD_SLACK
}

/// Largest `|rho_v|` compatible with a shared variance at front/second correlation `rho`.
pub fn max_shared_rho_v(rho: f64) -> f64 {
    ((1.0 + rho) / 2.0).max(0.0).sqrt().min(1.0)
}

/// Kernel width for the conditional variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `1.5 * std(s) * N^(-1/5)`, recomputed every step.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_particles: usize,
    /// Minimum time steps per year; each business-day interval gets
    /// `ceil(steps_per_year * dt)` sub-steps.
    pub steps_per_year: usize,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    pub seed: u64,
    pub bins: usize,
    /// Use the O(N^2) kernel sum instead of the binned one.
    #[serde(default)]
    pub exact_kernel: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_particles: 10_000,
            steps_per_year: 250,
            bandwidth: Bandwidth::Auto,
            seed: 0,
            bins: 200,
            exact_kernel: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 1000 {
            return Err(Error::config(format!("need at least 1000 particles, got {}", self.n_particles)));
        }
        if self.steps_per_year < 12 {
            return Err(Error::config(format!("need at least 12 steps per year, got {}", self.steps_per_year)));
        }
        if let Bandwidth::Fixed(e) = self.bandwidth {
            if !(e > 0.0) {
                return Err(Error::config(format!("kernel bandwidth must be > 0, got {e}")));
            }
        }
        if self.bins < 2 && !self.exact_kernel {
            return Err(Error::config("need at least 2 kernel bins"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_boundary() {
        assert!(shared_psd(0.9, 0.97));
        assert!(!shared_psd(0.9, 1.0));
        assert!(!shared_psd(0.0, 1.0));
        assert!(shared_psd(1.0, 1.0));
        assert!(shared_psd(-1.0, 0.0));
        assert!(ModelParams::new(0.3, 1.0, 1.0, 0.1, 1.0, 1.0, 0.9).is_err());
        let p = ModelParams::reference();
        let mut q = p.clone();
        q.rho_v = 1.0;
        assert!(q.clone().with_coupling(VarianceCoupling::PerFactor).is_ok());
        assert!(matches!(q.validate(), Err(Error::Param(_))));
    }

    #[test]
    fn rejects_bad_scalars() {
        assert!(ModelParams::new(-0.1, 1.0, 1.0, 0.1, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.1, 0.0, 1.0, 0.1, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 1.0, -0.1, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 1.0, 0.1, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 1.0, 0.1, 0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn piecewise_rho_is_left_continuous() {
        let c = CorrelationCurve { times: vec![0.5, f64::INFINITY], values: vec![0.2, 0.8] };
        assert_eq!(c.at(0.5), 0.2);
        assert_eq!(c.at(0.5000001), 0.8);
    }

    #[test]
    fn config_limits() {
        let ok = SimConfig { n_particles: 1000, ..Default::default() };
        assert!(ok.validate().is_ok());
        assert!(SimConfig { n_particles: 999, ..Default::default() }.validate().is_err());
        assert!(SimConfig { steps_per_year: 11, ..Default::default() }.validate().is_err());
        assert!(SimConfig { bandwidth: Bandwidth::Fixed(0.0), ..Default::default() }.validate().is_err());
    }
}
