//! Batch command-line front end.
//!
//! ```text
//! commodity-slv [--config run.toml] [--seed N] [--threads N] [--dry-run] [--output DIR] <command>
//!
//!   calibrate-lv                         local volatility from futures quotes
//!   calibrate-index [--warm-start R]     (a, chi, rho_v, rho) from index quotes
//!                   [--global-budget N] [--local-budget N] [--random-p0]
//!   sensitivity --param P --values v1,v2,...
//!   price --specs FILE [--report R]
//! ```
//!
//! Exit codes: 0 ok, 2 data, 3 numerics, 4 calibration, 64 usage.

pub mod config;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::RunConfig;

use crate::calibrator::{hybrid_calibrate, CalibrationReport, FixedParams, IndexCalibrationConfig, IndexObjective, ReducedParam};
use crate::dupire_lv::{calibrate_local_vol, quantize_a, CalibratedEta, EtaSource, FlatEta, LocalVolSurface};
use crate::error::{Error, Result};
use crate::market_data::calendar::parse_date;
use crate::market_data::{
    load_discount_curve, load_futures_curve, load_quotes, BusinessCalendar, DiscountCurve, FuturesCurve, QuoteContext, QuoteSet,
};
use crate::pricing::{
    price_futures_vanillas, sensitivity_scan, CallPut, IndexMarket, OptionSpec, PricedOption, ScanGrid, ScanParam, StrikeSpec, Underlying,
};
use crate::slv_mc::{derive_seed, ModelParams};

pub const LV_REPORT_FORMAT_VERSION: u32 = 1;
pub const PRICES_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "commodity-slv", version, about = "SLV calibration and pricing for commodity futures and rolling indices")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Load and validate every input, then stop without writing.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    CalibrateLv,
    CalibrateIndex(CalibrateIndexArgs),
    Sensitivity(SensitivityArgs),
    Price(PriceArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateIndexArgs {
    /// Start Subplex (and ESCH, if budgeted) from a previous report's parameters.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// ESCH evaluation budget; 0 runs the local stage only.
    #[arg(long)]
    pub global_budget: Option<usize>,
    #[arg(long)]
    pub local_budget: Option<usize>,
    /// Draw the starting point at random from the seed.
    #[arg(long)]
    pub random_p0: bool,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// One of a, rho, kappa, theta, chi, rho_v, v0.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// CSV with columns `underlying,expiry,strike_type,strike,callput`.
    #[arg(long)]
    pub specs: PathBuf,
    /// Calibration report whose (a, chi, rho_v, rho, kappa, theta, v0) replace the model section.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.output {
        cfg.output = o.clone();
    }
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start {threads} worker threads: {e}")))?;
    let ctx = Context { cfg, dry_run: cli.dry_run };
    pool.install(|| match &cli.command {
        Command::CalibrateLv => cmd_calibrate_lv(&ctx),
        Command::CalibrateIndex(a) => cmd_calibrate_index(&ctx, a),
        Command::Sensitivity(a) => cmd_sensitivity(&ctx, a),
        Command::Price(a) => cmd_price(&ctx, a),
    })
}

struct Context {
    cfg: RunConfig,
    dry_run: bool,
}

struct Market {
    curve: FuturesCurve,
    discount: DiscountCurve,
    calendar: BusinessCalendar,
}

enum Eta {
    Stored(LocalVolSurface),
    Calibrated(CalibratedEta),
    Flat(FlatEta),
}

impl Eta {
    fn source(&self) -> &dyn EtaSource {
        match self {
            Eta::Stored(s) => s,
            Eta::Calibrated(c) => c,
            Eta::Flat(f) => f,
        }
    }
}

impl Context {
    fn market(&self) -> Result<Market> {
        let c = &self.cfg;
        let valuation = c.valuation()?;
        let curve = load_futures_curve(c.required(&c.curve, "curve")?, valuation)?;
        let discount = load_discount_curve(c.required(&c.discount, "discount")?)?;
        let calendar = match &c.holidays {
            Some(p) => BusinessCalendar::load_holidays(p)?,
            None => BusinessCalendar::weekends_only(),
        };
        Ok(Market { curve, discount, calendar })
    }

    fn quotes(&self, m: &Market, path: &Path) -> Result<QuoteSet> {
        load_quotes(path, QuoteContext { curve: &m.curve, discount: &m.discount, index_level: self.cfg.index_level })
    }

    fn futures_quotes(&self, m: &Market) -> Result<QuoteSet> {
        let path = self.cfg.required(&self.cfg.futures_quotes, "futures_quotes")?;
        let q = self.quotes(m, path)?;
        if q.on_futures().is_empty() {
            return Err(Error::data(format!("{} holds no quotes on futures", path.display())));
        }
        Ok(q)
    }

    fn eta(&self, m: &Market) -> Result<Eta> {
        let c = &self.cfg;
        if let Some(p) = &c.eta {
            return Ok(Eta::Stored(LocalVolSurface::load(p)?));
        }
        if c.futures_quotes.is_some() {
            let q = self.futures_quotes(m)?;
            return Ok(Eta::Calibrated(CalibratedEta::new(q.on_futures(), m.curve.clone(), m.discount.clone(), c.lv.config())));
        }
        match c.eta_flat {
            Some(v) if v > 0.0 => Ok(Eta::Flat(FlatEta(v))),
            Some(v) => Err(Error::config(format!("eta_flat must be positive, got {v}"))),
            None => Err(Error::config("no local volatility source: set `eta`, `futures_quotes` or `eta_flat`")),
        }
    }

    fn sim(&self, label: &str) -> Result<crate::slv_mc::SimConfig> {
        self.cfg.sim.config(derive_seed(self.cfg.seed, label))
    }

    fn output_dir(&self) -> Result<&Path> {
        let dir = self.cfg.output.as_path();
        if dir.exists() && !dir.is_dir() {
            return Err(Error::config(format!("output {} is not a directory", dir.display())));
        }
        if !self.dry_run {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(dir)
    }

    fn dry_run_done(&self, what: &str) -> bool {
        if self.dry_run {
            println!("dry run: {what} inputs are valid, nothing written");
        }
        self.dry_run
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::data(format!("serialization failed: {e}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LvResidualRow {
    pub quote: usize,
    pub expiry: f64,
    pub contract: Option<usize>,
    pub strike: f64,
    pub market: f64,
    pub model: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LvReport {
    pub format_version: u32,
    pub a: f64,
    pub converged: bool,
    pub max_abs_residual: f64,
    pub rows: Vec<LvResidualRow>,
    pub excluded: Vec<usize>,
    pub warnings: Vec<String>,
    pub objective_evaluations: usize,
}

fn cmd_calibrate_lv(ctx: &Context) -> Result<()> {
    let m = ctx.market()?;
    let quotes = ctx.futures_quotes(&m)?.on_futures();
    let a = ctx.cfg.model.params()?.a;
    let out = ctx.output_dir()?;
    if ctx.dry_run_done("calibrate-lv") {
        return Ok(());
    }
    let report = |rows_from: &[usize], residuals: &[f64], excluded, warnings, evals, converged| LvReport {
        format_version: LV_REPORT_FORMAT_VERSION,
        a,
        converged,
        max_abs_residual: residuals.iter().fold(0.0, |m: f64, r| m.max(r.abs())),
        rows: rows_from
            .iter()
            .zip(residuals)
            .map(|(&i, r)| LvResidualRow {
                quote: i,
                expiry: quotes[i].expiry,
                contract: quotes[i].underlying,
                strike: quotes[i].strike,
                market: quotes[i].price,
                model: quotes[i].price + r,
            })
            .collect(),
        excluded,
        warnings,
        objective_evaluations: evals,
    };
    match calibrate_local_vol(&quotes, &m.curve, &m.discount, a, &ctx.cfg.lv.config()) {
        Ok(fit) => {
            fit.surface.save(out.join("lv_surface.json"))?;
            println!("wrote {}", out.join("lv_surface.json").display());
            let r = report(&fit.fitted, &fit.residuals, fit.excluded, fit.warnings, fit.objective_evaluations, true);
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            write(&out.join("lv_residuals.json"), &to_json(&r)?)
        }
        Err(Error::Calibration { message, best, residuals }) => {
            if let Some(best) = best {
                best.save(out.join("lv_surface_best.json"))?;
                eprintln!("best surface written to {}", out.join("lv_surface_best.json").display());
            }
            let worst = residuals.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
            eprintln!("largest price residual {worst:.3e}");
            Err(Error::Calibration { message, best: None, residuals })
        }
        Err(e) => Err(e),
    }
}

fn cmd_calibrate_index(ctx: &Context, args: &CalibrateIndexArgs) -> Result<()> {
    if args.warm_start.is_some() && args.random_p0 {
        return Err(Error::Usage("--warm-start and --random-p0 select conflicting starting points".into()));
    }
    let c = &ctx.cfg;
    let m = ctx.market()?;
    let index_path = c.required(&c.index_quotes, "index_quotes")?;
    let quotes = ctx.quotes(&m, index_path)?;
    let eta = ctx.eta(&m)?;
    if matches!(eta, Eta::Stored(_)) {
        return Err(Error::config("index calibration varies `a`; configure `futures_quotes` or `eta_flat` instead of a stored surface"));
    }
    let warm = args.warm_start.as_deref().map(load_report).transpose()?;

    let mut cal = IndexCalibrationConfig {
        bounds: c.calibration.bounds()?,
        fixed: FixedParams { kappa: c.model.kappa, theta: c.model.theta, v0: c.model.v0 },
        loss: c.loss,
        sim: ctx.sim("sim")?,
        coupling: c.calibration.coupling,
        ..Default::default()
    };
    cal.hybrid.seed = derive_seed(c.seed, "hybrid");
    cal.hybrid.esch.budget = args.global_budget.unwrap_or(c.calibration.esch_budget);
    cal.hybrid.subplex.budget = args.local_budget.unwrap_or(c.calibration.subplex_budget);
    cal.hybrid.subplex_scale = c.calibration.subplex_scale;
    cal.hybrid.warm_start = warm.as_ref().map(|r| r.params.to_vec());
    if let Some(x) = &cal.hybrid.warm_start {
        cal.bounds.check(x)?;
    }

    let market = IndexMarket::with_horizon_months(m.curve, m.discount, m.calendar, c.calibration.horizon_months)?;
    let objective = IndexObjective::new(&market, eta.source(), &quotes, cal)?;
    let out = ctx.output_dir()?;
    if ctx.dry_run_done("calibrate-index") {
        return Ok(());
    }
    let mut report = hybrid_calibrate(&objective)?;
    report.seed = c.seed;
    report.quote_files = [c.futures_quotes.as_ref(), Some(&index_path.to_path_buf())]
        .into_iter()
        .flatten()
        .map(|p| p.display().to_string())
        .collect();
    println!(
        "a={:.6} chi={:.6} rho_v={:.6} rho={:.6} loss={:.6e} ({} evaluations, {:.1}s)",
        report.params.a, report.params.chi, report.params.rho_v, report.params.rho, report.loss, report.n_evals, report.seconds
    );
    if let Eta::Calibrated(_) = eta {
        let surface = eta.source().surface(quantize_a(report.params.a))?;
        let path = out.join("lv_surface.json");
        surface.save(&path)?;
        report.eta_file = Some(path.display().to_string());
    }
    write(&out.join("calibration_report.json"), &report.to_json()?)
}

fn load_report(path: &Path) -> Result<CalibrationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CalibrationReport::from_json(&text)
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| Error::Usage(format!("not a number: {v:?}"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Usage("--values needs at least one value".into()));
    }
    Ok(values)
}

fn cmd_sensitivity(ctx: &Context, args: &SensitivityArgs) -> Result<()> {
    let param: ScanParam = args.param.parse()?;
    let values = parse_values(&args.values)?;
    let c = &ctx.cfg;
    let base = c.model.params()?;
    for &v in &values {
        param.apply(&base, v)?;
    }
    let grid = ScanGrid {
        maturities_months: c.sensitivity.maturities_months.clone(),
        moneyness: c.sensitivity.moneyness.clone(),
        smile_months: c.sensitivity.smile_months,
    };
    let horizon = grid.maturities_months.iter().copied().chain([grid.smile_months]).max().unwrap_or(12);
    let m = ctx.market()?;
    let eta = ctx.eta(&m)?;
    let market = IndexMarket::new(
        m.curve.clone(),
        m.discount,
        m.calendar.clone(),
        m.calendar.following(m.curve.valuation_date() + chrono::Months::new(horizon)),
        c.index_level,
    )?;
    let sim = ctx.sim("sim")?;
    let out = ctx.output_dir()?;
    if ctx.dry_run_done("sensitivity") {
        return Ok(());
    }
    let report = sensitivity_scan(&base, eta.source(), &market, param, &values, &grid, &sim)?;
    write(&out.join(format!("sensitivity_{param}.json")), &report.to_json()?)?;
    for p in report.write_dat(out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SpecRow {
    underlying: String,
    expiry: String,
    strike_type: String,
    strike: f64,
    #[serde(default)]
    callput: Option<String>,
}

/// Reads `underlying,expiry,strike_type,strike,callput`. `underlying` is
/// `index`, a contract position on the curve, or a contract maturity date;
/// `strike_type` is `absolute` or `moneyness`.
pub fn load_specs(path: &Path, curve: &FuturesCurve) -> Result<Vec<OptionSpec>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<SpecRow>().enumerate() {
        let row = i + 1;
        let r = rec.map_err(|e| Error::data(format!("{} row {row}: {e}", path.display())))?;
        let underlying = if r.underlying.eq_ignore_ascii_case("index") {
            Underlying::Index
        } else if let Ok(c) = r.underlying.parse::<usize>() {
            Underlying::Futures(c)
        } else {
            let d: NaiveDate = parse_date(&r.underlying)?;
            Underlying::Futures(
                curve.contract_on(d).ok_or_else(|| Error::data(format!("row {row}: no contract matures on {d}")))?,
            )
        };
        let strike = match r.strike_type.as_str() {
            "absolute" | "abs" => StrikeSpec::Absolute(r.strike),
            "moneyness" => StrikeSpec::Moneyness(r.strike),
            other => return Err(Error::data(format!("row {row}: unknown strike_type {other:?}"))),
        };
        let callput = match r.callput.as_deref().unwrap_or("call") {
            "call" | "c" => CallPut::Call,
            "put" | "p" => CallPut::Put,
            other => return Err(Error::data(format!("row {row}: unknown callput {other:?}"))),
        };
        out.push(OptionSpec { callput, expiry: parse_date(&r.expiry)?, strike, underlying });
    }
    if out.is_empty() {
        return Err(Error::data(format!("{} holds no option specs", path.display())));
    }
    Ok(out)
}

fn params_from_report(r: &CalibrationReport, coupling: crate::slv_mc::VarianceCoupling) -> Result<ModelParams> {
    let p: ReducedParam = r.params;
    ModelParams::new(quantize_a(p.a), r.fixed.kappa, r.fixed.theta, p.chi, p.rho_v, r.fixed.v0, p.rho)?.with_coupling(coupling)
}

/// CSV of priced options in input order.
pub fn write_prices<W: std::io::Write>(w: W, priced: &[PricedOption]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::data(format!("csv write failed: {e}"));
    wr.write_record([
        "format_version",
        "underlying",
        "expiry",
        "callput",
        "strike",
        "forward",
        "expiry_time",
        "price",
        "stderr",
        "implied_vol",
    ])
    .map_err(err)?;
    for p in priced {
        let underlying = match p.spec.underlying {
            Underlying::Index => "index".to_string(),
            Underlying::Futures(c) => c.to_string(),
        };
        let cp = match p.spec.callput {
            CallPut::Call => "call",
            CallPut::Put => "put",
        };
        wr.write_record([
            PRICES_FORMAT_VERSION.to_string(),
            underlying,
            p.spec.expiry.to_string(),
            cp.to_string(),
            format!("{}", p.strike),
            format!("{}", p.forward),
            format!("{}", p.expiry_time),
            format!("{}", p.price),
            format!("{}", p.stderr),
            p.implied_vol.map(|v| format!("{v}")).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    wr.flush().map_err(|e| Error::data(format!("csv write failed: {e}")))
}

fn cmd_price(ctx: &Context, args: &PriceArgs) -> Result<()> {
    let c = &ctx.cfg;
    let m = ctx.market()?;
    let specs = load_specs(&args.specs, &m.curve)?;
    let params = match &args.report {
        Some(p) => params_from_report(&load_report(p)?, c.model.coupling)?,
        None => c.model.params()?,
    };
    let eta = ctx.eta(&m)?;
    let surface = eta.source().surface(params.a)?;
    let sim = ctx.sim("sim")?;

    let (index_specs, futures_specs): (Vec<(usize, OptionSpec)>, Vec<(usize, OptionSpec)>) =
        specs.iter().copied().enumerate().partition(|(_, s)| s.underlying == Underlying::Index);
    let market = match index_specs.iter().map(|(_, s)| s.expiry).max() {
        Some(end) => Some(IndexMarket::new(m.curve.clone(), m.discount.clone(), m.calendar.clone(), end, c.index_level)?),
        None => None,
    };
    if let Some(&(_, s)) = futures_specs.iter().find(|(_, s)| matches!(s.underlying, Underlying::Futures(k) if k >= m.curve.len())) {
        return Err(Error::range(format!("option on {:?} is not on the curve", s.underlying)));
    }
    let out = ctx.output_dir()?;
    if ctx.dry_run_done("price") {
        return Ok(());
    }

    let mut priced: Vec<Option<PricedOption>> = vec![None; specs.len()];
    if let Some(market) = &market {
        let only: Vec<OptionSpec> = index_specs.iter().map(|(_, s)| *s).collect();
        let (res, _) = market.price_index_options(&params, &surface, &sim, &only)?;
        for ((i, _), p) in index_specs.iter().zip(res) {
            priced[*i] = Some(p);
        }
    }
    if !futures_specs.is_empty() {
        let only: Vec<OptionSpec> = futures_specs.iter().map(|(_, s)| *s).collect();
        let res = price_futures_vanillas(&params, &surface, &m.curve, &m.discount, &m.calendar, &sim, &only)?;
        for ((i, _), p) in futures_specs.iter().zip(res) {
            priced[*i] = Some(p);
        }
    }
    let priced: Vec<PricedOption> = priced.into_iter().map(|p| p.expect("every spec priced")).collect();
    let path = out.join("prices.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_prices(std::io::BufWriter::new(file), &priced)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("-1, 1").unwrap(), vec![-1.0, 1.0]);
        assert!(matches!(parse_values(""), Err(Error::Usage(_))));
        assert!(matches!(parse_values("1,x"), Err(Error::Usage(_))));
    }

    #[test]
    fn clap_errors_are_usage_exit_codes() {
        assert_eq!(main_with_args(["commodity-slv", "no-such-command"]), 64);
        assert_eq!(main_with_args(["commodity-slv", "sensitivity", "--param", "rho"]), 64);
    }

    #[test]
    fn conflicting_start_flags() {
        let code = main_with_args(["commodity-slv", "calibrate-index", "--warm-start", "r.json", "--random-p0"]);
        assert_eq!(code, 64);
    }
}
