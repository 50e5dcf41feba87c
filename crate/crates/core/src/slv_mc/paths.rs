//! Stored futures trajectories and their binary file format.
//!
//! Layout (little endian):
//!
//! ```text
//! magic      8 bytes  "SLVPATHS"
//! version    u32      1
//! seed       u64
//! particles  u64
//! steps/yr   u64
//! dates      u64      count D
//! contracts  u64      count C
//! D x i32             days since 0001-01-01 (proleptic Gregorian, day 1)
//! C x u64             contract indices into the futures curve
//! D*C*N x f64         prices, date-major then contract then particle; NaN after expiry
//! ```

use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use super::engine::{simulate, PathObserver, SimGrid, Snapshot};
use super::params::{ModelParams, SimConfig};
use crate::dupire_lv::LocalVolSurface;
use crate::error::{Error, Result};
use crate::market_data::{FuturesCurve, RollSchedule};

pub const PATHS_MAGIC: &[u8; 8] = b"SLVPATHS";
pub const PATHS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub seed: u64,
    pub n_particles: usize,
    pub steps_per_year: usize,
    pub dates: Vec<NaiveDate>,
    pub contracts: Vec<usize>,
    values: Vec<f64>,
}

impl PathSet {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Prices of `contract` at date `date_index` for every particle.
    pub fn prices(&self, date_index: usize, contract: usize) -> Option<&[f64]> {
        let c = self.contracts.iter().position(|&x| x == contract)?;
        let n = self.n_particles;
        let start = (date_index * self.contracts.len() + c) * n;
        self.values.get(start..start + n)
    }

    pub fn price(&self, date_index: usize, contract: usize, particle: usize) -> Option<f64> {
        self.prices(date_index, contract).map(|p| p[particle])
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(PATHS_MAGIC)?;
        w.write_all(&PATHS_FORMAT_VERSION.to_le_bytes())?;
        for x in [
            self.seed,
            self.n_particles as u64,
            self.steps_per_year as u64,
            self.dates.len() as u64,
            self.contracts.len() as u64,
        ] {
            w.write_all(&x.to_le_bytes())?;
        }
        for d in &self.dates {
            w.write_all(&d.num_days_from_ce().to_le_bytes())?;
        }
        for c in &self.contracts {
            w.write_all(&(*c as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * 4096);
        for chunk in self.values.chunks(4096) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::data(format!("path file: {m}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != PATHS_MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let mut u32b = [0u8; 4];
        r.read_exact(&mut u32b).map_err(|_| bad("truncated header"))?;
        let version = u32::from_le_bytes(u32b);
        if version != PATHS_FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut u64s = [0u64; 5];
        for x in &mut u64s {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
            *x = u64::from_le_bytes(b);
        }
        let [seed, n, steps, nd, nc] = u64s;
        let mut dates = Vec::with_capacity(nd as usize);
        for _ in 0..nd {
            r.read_exact(&mut u32b).map_err(|_| bad("truncated dates"))?;
            let days = i32::from_le_bytes(u32b);
            dates.push(NaiveDate::from_num_days_from_ce_opt(days).ok_or_else(|| bad("invalid date"))?);
        }
        let mut contracts = Vec::with_capacity(nc as usize);
        for _ in 0..nc {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|_| bad("truncated contracts"))?;
            contracts.push(u64::from_le_bytes(b) as usize);
        }
        let total = (nd * nc * n) as usize;
        let mut bytes = vec![0u8; total * 8];
        r.read_exact(&mut bytes).map_err(|_| bad("truncated body"))?;
        let values = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            seed,
            n_particles: n as usize,
            steps_per_year: steps as usize,
            dates,
            contracts,
            values,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Observer that stores every date for a fixed list of contracts.
#[derive(Debug, Clone)]
pub struct PathRecorder {
    set: PathSet,
    scratch: Vec<f64>,
}

impl PathRecorder {
    pub fn new(contracts: Vec<usize>, cfg: &SimConfig) -> Self {
        Self {
            set: PathSet {
                seed: cfg.seed,
                n_particles: cfg.n_particles,
                steps_per_year: cfg.steps_per_year,
                dates: Vec::new(),
                contracts,
                values: Vec::new(),
            },
            scratch: Vec::new(),
        }
    }

    pub fn finish(self) -> PathSet {
        self.set
    }
}

impl PathObserver for PathRecorder {
    fn observe(&mut self, snap: &Snapshot<'_>) -> Result<()> {
        self.set.dates.push(snap.date);
        for &c in &self.set.contracts {
            snap.futures_into(c, &mut self.scratch);
            self.set.values.extend_from_slice(&self.scratch);
        }
        Ok(())
    }
}

/// Simulates the contracts an index needs over the schedule's dates.
pub fn simulate_paths(
    params: &ModelParams,
    eta: &LocalVolSurface,
    curve: &FuturesCurve,
    schedule: &RollSchedule,
    cfg: &SimConfig,
) -> Result<PathSet> {
    let grid = SimGrid::from_schedule(schedule)?;
    let contracts = schedule.contracts();
    if let Some(c) = contracts.iter().find(|&&c| c >= curve.len()) {
        return Err(Error::range(format!("schedule uses contract {c} beyond the curve")));
    }
    let mut rec = PathRecorder::new(contracts, cfg);
    simulate(params, eta, curve, &grid, cfg, &mut rec)?;
    Ok(rec.finish())
}
