//! Local volatility of the normalized spot: surface storage, the extended
//! Dupire forward PDE, the spot/futures maps and calibration to futures options.

pub mod calibrate;
pub mod maps;
pub mod pde;
pub mod source;
pub mod surface;

pub use calibrate::{calibrate_local_vol, LvCalibration, LvCalibrationConfig};
pub use maps::{effective_strike, futures_floor, futures_from_spot, local_vol_futures};
pub use pde::{solve_normalized_calls, vanilla_price_on_futures, NormalizedCallGrid, PdeGrid};
pub use surface::{LocalVolSurface, DEFAULT_VOL_CAP, SURFACE_FORMAT_VERSION};
pub use source::{quantize_a, CalibratedEta, EtaSource, FlatEta};
