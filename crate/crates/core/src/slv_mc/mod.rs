//! Two-factor stochastic local volatility by interacting particles.
//!
//! Each particle carries two normalized spots `s^c`, `s^f` and a variance.
//! Contracts with even index follow `s^c`, odd ones `s^f`, so the front and
//! second contract of any roll are always driven by different factors. The
//! leverage enters through the ratio `v / E[v | s]`, estimated across the
//! particle cloud with a Gaussian kernel.

pub mod engine;
pub mod kernel;
pub mod leverage;
pub mod params;
pub mod paths;
pub mod rng;

pub use engine::{
    factor_of, simulate, step_spot, step_variance, substeps, Ensemble, Factor, PathObserver, SimGrid, SimStats,
    Snapshot,
};
pub use kernel::{auto_bandwidth, conditional_mean_exact, conditional_variance_ratio, KernelRegression};
pub use leverage::compute_leverage_diagnostic;
pub use params::{max_shared_rho_v, shared_psd, Bandwidth, CorrelationCurve, ModelParams, SimConfig, VarianceCoupling};
pub use paths::{simulate_paths, PathRecorder, PathSet, PATHS_FORMAT_VERSION};
pub use rng::{correlated_increments, derive_seed, CorrelationFactor, Increments, ParticleRng};
