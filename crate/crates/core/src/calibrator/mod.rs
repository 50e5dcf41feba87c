//! Losses over index option quotes and the derivative-free optimizers used
//! to fit the residual model parameters.

pub mod esch;
pub mod hybrid;
pub mod index;
pub mod loss;
pub mod subplex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use esch::{esch_minimize, EschConfig};
pub use hybrid::{hybrid_minimize, HybridConfig, HybridResult};
pub use index::{
    hybrid_calibrate, CalibrationReport, FixedParams, IndexCalibrationConfig, IndexObjective, LossSpec, ReducedParam,
};
pub use loss::{loss_normalized, loss_p, DenominatorPolicy};
pub use subplex::{partition_subspaces, subplex_minimize, SubplexConfig};

/// Box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::config("bound vectors differ in length"));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i]) || !upper[i].is_finite() || !lower[i].is_finite()) {
            return Err(Error::config(format!(
                "bound {i} is not a finite interval: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::param(format!("point {x:?} outside bounds")))
        }
    }

    pub(crate) fn sample<R: Rng>(&self, d: usize, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.lower[d] + u * (self.upper[d] - self.lower[d])
    }
}

/// Outcome of a single optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Whether the best point beats the starting point.
    pub improved: bool,
    /// Whether a step-size criterion (not the budget) stopped the run.
    pub converged: bool,
    /// Best-so-far value after every evaluation.
    pub trace: Vec<f64>,
}
