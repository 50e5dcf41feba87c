//! Local volatility surfaces on demand for a given mean reversion `a`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::calibrate::{calibrate_local_vol, LvCalibrationConfig};
use super::surface::LocalVolSurface;
use crate::error::{Error, Result};
use crate::market_data::{DiscountCurve, FuturesCurve, VanillaQuote};

/// Grid on which `a` is quantized before a surface is built.
pub const A_QUANTUM: f64 = 1e-4;

pub fn quantize_a(a: f64) -> f64 {
    (a / A_QUANTUM).round() * A_QUANTUM
}

pub trait EtaSource: Sync {
    fn surface(&self, a: f64) -> Result<Arc<LocalVolSurface>>;
}

/// The same flat `eta` for every `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatEta(pub f64);

impl EtaSource for FlatEta {
    fn surface(&self, a: f64) -> Result<Arc<LocalVolSurface>> {
        Ok(Arc::new(LocalVolSurface::flat(self.0, a)))
    }
}

/// A single stored surface, valid only for its own `a`.
impl EtaSource for LocalVolSurface {
    fn surface(&self, a: f64) -> Result<Arc<LocalVolSurface>> {
        if (a - self.a).abs() > 1e-12 {
            return Err(Error::param(format!("surface is fixed at a={}, requested a={a}", self.a)));
        }
        Ok(Arc::new(self.clone()))
    }
}

/// Calibrates to futures quotes at each requested `a` (quantized), caching results.
/// A fit that misses its tolerance still yields its best surface.
pub struct CalibratedEta {
    quotes: Vec<VanillaQuote>,
    curve: FuturesCurve,
    discount: DiscountCurve,
    cfg: LvCalibrationConfig,
    cache: Mutex<BTreeMap<i64, Arc<LocalVolSurface>>>,
}

impl CalibratedEta {
    pub fn new(quotes: Vec<VanillaQuote>, curve: FuturesCurve, discount: DiscountCurve, cfg: LvCalibrationConfig) -> Self {
        Self { quotes, curve, discount, cfg, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

impl EtaSource for CalibratedEta {
    fn surface(&self, a: f64) -> Result<Arc<LocalVolSurface>> {
        let key = (a / A_QUANTUM).round() as i64;
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let aq = key as f64 * A_QUANTUM;
        let surface = match calibrate_local_vol(&self.quotes, &self.curve, &self.discount, aq, &self.cfg) {
            Ok(c) => c.surface,
            Err(Error::Calibration { best: Some(best), .. }) => *best,
            Err(e) => return Err(e),
        };
        let surface = Arc::new(surface);
        self.cache.lock().expect("cache lock").entry(key).or_insert_with(|| surface.clone());
        Ok(surface)
    }
}
