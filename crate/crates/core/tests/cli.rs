use std::path::{Path, PathBuf};
use std::process::Command;

use commodity_slv::calibrator::CalibrationReport;
use commodity_slv::dupire_lv::LocalVolSurface;

const FIXTURES: [&str; 5] = ["curve.csv", "discount.csv", "futures_quotes.csv", "index_quotes.csv", "specs.csv"];

/// Fixtures copied into a scratch directory with a cheap configuration.
fn workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for f in FIXTURES {
        std::fs::copy(src.join(f), dir.path().join(f)).unwrap();
    }
    let toml = std::fs::read_to_string(src.join("run.toml"))
        .unwrap()
        .replace("n_particles = 20000", "n_particles = 3000")
        .replace("esch_budget = 300", "esch_budget = 60")
        .replace("subplex_budget = 200", "subplex_budget = 6");
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, toml).unwrap();
    (dir, cfg)
}

fn run(cfg: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_commodity-slv"))
        .current_dir(cfg.parent().unwrap())
        .arg("--config")
        .arg(cfg)
        .args(args)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn calibrate_lv_recovers_flat_surface() {
    let (dir, cfg) = workspace();
    let (code, err) = run(&cfg, &["calibrate-lv"]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("out/lv_surface.json")).unwrap();
    let s = LocalVolSurface::from_json(&text).unwrap();
    assert!(s.values.iter().flatten().all(|v| (0.245..=0.255).contains(v)));
    assert!(dir.path().join("out/lv_residuals.json").exists());
}

#[test]
fn missing_quote_file_is_a_data_error() {
    let (dir, cfg) = workspace();
    std::fs::remove_file(dir.path().join("futures_quotes.csv")).unwrap();
    assert_eq!(run(&cfg, &["calibrate-lv"]).0, 2);
}

#[test]
fn dry_run_writes_nothing() {
    let (dir, cfg) = workspace();
    let (code, err) = run(&cfg, &["--dry-run", "price", "--specs", "specs.csv"]);
    assert_eq!(code, 0, "{err}");
    assert!(!dir.path().join("out").exists());
}

fn read_prices(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()).collect()
}

#[test]
fn price_is_reproducible_and_zero_strike_call_is_discounted_level() {
    let (dir, cfg) = workspace();
    let specs = dir.path().join("specs.csv");
    let specs = specs.to_str().unwrap();
    assert_eq!(run(&cfg, &["--output", "o1", "price", "--specs", specs]).0, 0);
    assert_eq!(run(&cfg, &["--output", "o2", "--threads", "1", "price", "--specs", specs]).0, 0);
    let a = std::fs::read(dir.path().join("o1/prices.csv")).unwrap();
    let b = std::fs::read(dir.path().join("o2/prices.csv")).unwrap();
    assert_eq!(a, b);

    let rows = read_prices(&dir.path().join("o1/prices.csv"));
    assert_eq!(rows.len(), 6);
    let headers = csv::Reader::from_path(dir.path().join("o1/prices.csv")).unwrap().headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let zero = rows.iter().find(|r| r[col("strike")].parse::<f64>().unwrap() == 0.0).unwrap();
    let price: f64 = zero[col("price")].parse().unwrap();
    let se: f64 = zero[col("stderr")].parse().unwrap();
    let t: f64 = zero[col("expiry_time")].parse().unwrap();
    let level = 100.0 * (-0.02f64 * t).exp();
    assert!((price - level).abs() <= 3.0 * se + 1e-3 * level, "{price} vs {level} (se {se})");
}

#[test]
fn expiry_past_the_curve_is_rejected() {
    let (dir, cfg) = workspace();
    let specs = dir.path().join("late.csv");
    std::fs::write(&specs, "underlying,expiry,strike_type,strike,callput\nindex,2035-01-02,moneyness,1.0,call\n").unwrap();
    assert_eq!(run(&cfg, &["price", "--specs", specs.to_str().unwrap()]).0, 2);
}

#[test]
fn sensitivity_outputs_and_usage_errors() {
    let (dir, cfg) = workspace();
    let (code, err) = run(&cfg, &["sensitivity", "--param", "rho", "--values", "-1,1"]);
    assert_eq!(code, 0, "{err}");
    let dats = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "dat"))
        .count();
    assert_eq!(dats, 4);
    assert!(dir.path().join("out/sensitivity_rho.json").exists());

    assert_eq!(run(&cfg, &["sensitivity", "--param", "rho", "--values", ""]).0, 64);
    assert_eq!(run(&cfg, &["sensitivity", "--param", "sigma", "--values", "1"]).0, 64);
    assert_eq!(run(&cfg, &["sensitivity", "--param", "kappa", "--values", "-1"]).0, 2);
}

#[test]
fn kappa_barely_moves_atm_vols() {
    let (dir, cfg) = workspace();
    assert_eq!(run(&cfg, &["sensitivity", "--param", "kappa", "--values", "0.5,2"]).0, 0);
    let text = std::fs::read_to_string(dir.path().join("out/sensitivity_kappa.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let atm = |i: usize| v["entries"][i]["atm_vols"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect::<Vec<_>>();
    let (lo, hi) = (atm(0), atm(1));
    assert!(lo.iter().zip(&hi).all(|(x, y)| (x - y).abs() < 0.005));
}

#[test]
fn calibrate_index_and_warm_start() {
    let (dir, cfg) = workspace();
    let (code, err) = run(&cfg, &["calibrate-index"]);
    assert_eq!(code, 0, "{err}");
    let first = CalibrationReport::from_json(&std::fs::read_to_string(dir.path().join("out/calibration_report.json")).unwrap()).unwrap();
    assert!(first.loss <= first.global_loss && first.global_loss <= first.start_loss);
    assert!(dir.path().join("out/lv_surface.json").exists());

    let report = dir.path().join("out/calibration_report.json");
    let report = report.to_str().unwrap();
    let (code, err) =
        run(&cfg, &["--output", "warm", "calibrate-index", "--warm-start", report, "--global-budget", "0", "--local-budget", "5"]);
    assert_eq!(code, 0, "{err}");
    let second = CalibrationReport::from_json(&std::fs::read_to_string(dir.path().join("warm/calibration_report.json")).unwrap()).unwrap();
    assert_eq!(second.start, first.params);
    assert_eq!(second.global, second.start);
    assert!(second.n_evals <= 6);

    assert_eq!(run(&cfg, &["calibrate-index", "--warm-start", report, "--random-p0"]).0, 64);
}

#[test]
fn bad_config_and_flags() {
    let (dir, cfg) = workspace();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "valuation_date = \"2019-12-16\"\nparticles = 5\n").unwrap();
    assert_eq!(run(&bad, &["calibrate-lv"]).0, 64);
    assert_eq!(run(&cfg, &["no-such-command"]).0, 64);
}
