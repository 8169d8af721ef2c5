use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn absvol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_absvol"))
        .args(args)
        .output()
        .expect("run absvol")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn error_report(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(file: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(file).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

/// Simulates `days` days into `dir/sim` and returns the tick file.
fn simulate(dir: &Path, days: usize, seed: u64) -> PathBuf {
    let sim = dir.join("sim");
    let out = absvol(&[
        "simulate",
        "--days",
        &days.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path(&sim),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    sim.join("ticks.csv")
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn simulate_then_analyze_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let ticks = simulate(tmp.path(), 120, 3);
    let (header, rows) = csv_rows(&ticks);
    assert_eq!(header, ["timestamp", "price", "volume", "contract"]);
    assert_eq!(rows.len(), 120 * 108);
    assert!(rows.iter().all(|r| r[2] == "1" && r[3] == "SIM"));

    let an = tmp.path().join("an");
    let out = absvol(&["analyze", "--ticks", path(&ticks), "--out", path(&an)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = csv_rows(&an.join("summary.csv"));
    assert_eq!(header[..3], ["panel", "series", "base"]);
    let count = |p: &str| rows.iter().filter(|r| r[0] == p).count();
    assert_eq!((count("A"), count("B"), count("C")), (1, 10, 10));
    assert!(rows.iter().all(|r| r[4] == "120"));

    let (header, rows) = csv_rows(&an.join("returns_acf.csv"));
    assert_eq!(header, ["lag", "rho", "band"]);
    assert_eq!(rows.len(), 20);
    assert_eq!(csv_rows(&an.join("z_abs_1.00_hist.csv")).0, ["bin_left", "bin_right", "count"]);
    assert_eq!(csv_rows(&an.join("z_abs_1.00_qq.csv")).0, ["theoretical", "empirical"]);
    assert_eq!(csv_rows(&an.join("proxy_sq_0.50_series.csv")).0, ["day", "value"]);
    assert_eq!(csv_rows(&an.join("returns_stats.csv")).0, ["stat", "value"]);
    let (header, rows) = csv_rows(&an.join("intraday_returns.csv"));
    assert_eq!(header, ["day", "j", "value"]);
    assert_eq!(rows.len(), 120 * 107);

    // |z| <= 1 for the absolute-value proxy with c = 1.
    let (_, z) = csv_rows(&an.join("z_abs_1.00_series.csv"));
    assert!(z.iter().all(|r| r[1].parse::<f64>().unwrap().abs() <= 1.0));

    // Every output file has a sidecar with the effective config.
    for name in read_dir_bytes(&an).keys().filter(|n| !n.ends_with(".meta.json")) {
        let meta: Value = serde_json::from_slice(&fs::read(an.join(format!("{name}.meta.json"))).unwrap()).unwrap();
        assert_eq!(meta["command"], "analyze");
        assert_eq!(meta["config"]["powers"].as_array().unwrap().len(), 5);
        assert_eq!(meta["config"]["session"]["intervals"], 107);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let ticks = simulate(tmp.path(), 60, 11);
        let an = tmp.path().join("an");
        let out = absvol(&["analyze", "--ticks", path(&ticks), "--out", path(&an), "--powers", "1"]);
        assert_eq!(code(&out), 0);
        let mut files = read_dir_bytes(&tmp.path().join("sim"));
        files.extend(read_dir_bytes(&an).into_iter().map(|(k, v)| (format!("an/{k}"), v)));
        snapshots.push(files);
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn empty_power_list_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let ticks = simulate(tmp.path(), 30, 1);
    let out = absvol(&["analyze", "--ticks", path(&ticks), "--powers", "", "--out", path(&tmp.path().join("a"))]);
    assert_eq!(code(&out), 2);
    let report = error_report(&out);
    assert_eq!(report["error"]["kind"], "usage");
    assert_eq!(report["error"]["exit_code"], 2);
}

#[test]
fn mincap_rows_and_monotone_lambda() {
    let tmp = TempDir::new().unwrap();
    let ticks = simulate(tmp.path(), 400, 5);

    let mc = tmp.path().join("mc");
    let out = absvol(&["mincap", "--ticks", path(&ticks), "--out", path(&mc)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&mc.join("mincap.csv"));
    assert_eq!(
        header,
        ["position", "coverage", "lambda", "ci_low", "ci_high", "z_q", "sigma_hat"]
    );
    assert_eq!(rows.len(), 10);
    for pos in ["long", "short"] {
        let lambdas: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == pos)
            .map(|r| r[2].parse().unwrap())
            .collect();
        assert_eq!(lambdas.len(), 5);
        assert!(lambdas.windows(2).all(|w| w[1] > w[0]), "{pos}: {lambdas:?}");
    }
    for r in &rows {
        let [lo, lambda, hi]: [f64; 3] = [r[3].parse().unwrap(), r[2].parse().unwrap(), r[4].parse().unwrap()];
        assert!(lo <= lambda && lambda <= hi);
    }

    let one = tmp.path().join("one");
    let out = absvol(&["mincap", "--ticks", path(&ticks), "--coverage", "0.95", "--out", path(&one)]);
    assert_eq!(code(&out), 0);
    assert_eq!(csv_rows(&one.join("mincap.csv")).1.len(), 2);
}

#[test]
fn mincap_on_too_short_sample_is_data_quality_error() {
    let tmp = TempDir::new().unwrap();
    let ticks = simulate(tmp.path(), 20, 5);
    let out = absvol(&["mincap", "--ticks", path(&ticks), "--out", path(&tmp.path().join("mc"))]);
    assert_eq!(code(&out), 4);
    let report = error_report(&out);
    assert!(report["error"]["details"]["needed"].as_u64().unwrap() > 20);
}

#[test]
fn output_directory_created_or_io_error() {
    let tmp = TempDir::new().unwrap();
    let ticks = simulate(tmp.path(), 30, 2);
    let nested = tmp.path().join("a/b/c");
    let out = absvol(&["analyze", "--ticks", path(&ticks), "--powers", "1", "--out", path(&nested)]);
    assert_eq!(code(&out), 0);
    assert!(nested.join("summary.csv").is_file());

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = absvol(&["analyze", "--ticks", path(&ticks), "--out", path(&blocker.join("sub"))]);
    assert_eq!(code(&out), 3);
    assert_eq!(error_report(&out)["error"]["kind"], "io");
}

#[test]
fn missing_input_is_io_error_and_empty_day_set_is_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = absvol(&["analyze", "--ticks", path(&tmp.path().join("absent.csv"))]);
    assert_eq!(code(&out), 3);

    let ticks = tmp.path().join("late.csv");
    fs::write(&ticks, "timestamp,price,volume,contract\n2020-01-02T12:00,100,1,H20\n").unwrap();
    let out = absvol(&["analyze", "--ticks", path(&ticks), "--out", path(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 4);
    let report = error_report(&out);
    assert_eq!(report["error"]["details"]["dropped"][0]["reason"], "no_opening_trade");
}

#[test]
fn missing_ticks_flag_is_usage_error() {
    let out = absvol(&["mincap"]);
    assert_eq!(code(&out), 2);
    let out = absvol(&["analyze", "--no-such-flag"]);
    assert_eq!(code(&out), 2);
    assert_eq!(error_report(&out)["error"]["kind"], "usage");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let ticks = simulate(tmp.path(), 60, 4);
    let out_dir = tmp.path().join("cfg");
    let conf = tmp.path().join("run.conf");
    fs::write(
        &conf,
        format!(
            "# analysis settings\nticks = {}\nout = {}\npowers = 0.5, 1.0, 1.5\nbases = abs\nformat = csv\n",
            ticks.display(),
            out_dir.display()
        ),
    )
    .unwrap();
    let out = absvol(&["analyze", "--config", path(&conf), "--powers", "1.0", "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let doc: Value = serde_json::from_slice(&fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(doc["columns"][0], "panel");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
    let meta: Value = serde_json::from_slice(&fs::read(out_dir.join("summary.json.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["powers"], serde_json::json!([1.0]));
    assert_eq!(meta["config"]["format"], "json");

    fs::write(&conf, "unknown_key = 1\n").unwrap();
    assert_eq!(code(&absvol(&["analyze", "--config", path(&conf)])), 2);
}

#[test]
fn simulate_with_other_m_round_trips_through_analyze() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let out = absvol(&["simulate", "--days", "40", "--m", "24", "--out", path(&sim)]);
    assert_eq!(code(&out), 0);
    let an = tmp.path().join("an");
    let ticks = sim.join("ticks.csv");
    let out = absvol(&["analyze", "--ticks", path(&ticks), "--m", "24", "--powers", "1", "--bases", "abs", "--out", path(&an)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&an.join("intraday_returns.csv"));
    assert_eq!(rows.len(), 40 * 24);

    // One truth row per day and default power.
    let (_, truth) = csv_rows(&sim.join("truth.csv"));
    assert_eq!(truth.len(), 40 * 5);
}

#[test]
fn convergence_emits_matrix_with_flags() {
    let tmp = TempDir::new().unwrap();
    let cv = tmp.path().join("cv");
    let out = absvol(&["convergence", "--days", "300", "--out", path(&cv)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&cv.join("convergence.csv"));
    assert_eq!(header, ["p", "m", "mean_abs_rel_error"]);
    assert_eq!(rows.len(), 6);
    let (header, flags) = csv_rows(&cv.join("convergence_flags.csv"));
    assert_eq!(header, ["p", "monotone_decreasing"]);
    assert_eq!(flags, [["1", "true"], ["2", "true"]]);
    let meta: Value = serde_json::from_slice(&fs::read(cv.join("convergence.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["sv"]["fine_steps_per_interval"], 12);

    let out = absvol(&["convergence", "--days", "10", "--m", "24,107", "--fine-steps", "10", "--out", path(&cv)]);
    assert_eq!(code(&out), 2);
}
