use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn pinloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinloc"))
        .args(args)
        .output()
        .expect("spawn pinloc")
}

fn pinloc_threads(threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinloc"))
        .env("PINLOC_THREADS", threads)
        .args(args)
        .output()
        .expect("spawn pinloc")
}

fn ok_json(out: Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_SWEEP: &str =
    "noise_dbm_list = -70, -50\npa_counts = 4, 8\ntrials = 6\ntruth = uniform\nmaster_seed = 11\n";
const SMALL_MAP: &str =
    "grid_spacing_m = 2\ntrials_per_point = 2\nnoise_dbm = -60\nn_pas = 8\nmaster_seed = 5\n";

#[test]
fn crlb_reports_bound_fields() {
    let v = ok_json(pinloc(&["crlb", "--u", "2,4"]));
    assert_eq!(v["singular"], false);
    assert_eq!(v["n_pas"], 8);
    let peb = v["peb_m"].as_f64().unwrap();
    let vx = v["var_x_bound_m2"].as_f64().unwrap();
    let vy = v["var_y_bound_m2"].as_f64().unwrap();
    assert!((peb * peb - vx - vy).abs() < 1e-12 * peb * peb);
    assert_eq!(v["cov"][0][1], v["cov"][1][0]);
    assert_eq!(v["fim"][0][1], v["fim"][1][0]);
}

#[test]
fn crlb_on_waveguide_axis_is_singular() {
    let v = ok_json(pinloc(&["crlb", "--u", "0,3"]));
    assert_eq!(v["singular"], true);
    assert!(v["cov"].is_null());
    assert!(v["peb_m"].is_null());
}

#[test]
fn noise_override_scales_bound() {
    let a = ok_json(pinloc(&["crlb", "--u", "3,6", "--noise-dbm", "-60"]));
    let b = ok_json(pinloc(&["crlb", "--u", "3,6", "--noise-dbm", "-40"]));
    let ratio = b["peb_m"].as_f64().unwrap() / a["peb_m"].as_f64().unwrap();
    assert!((ratio - 10.0).abs() < 1e-9);
}

#[test]
fn gen_then_estimate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let obs = dir.path().join("obs.csv");
    let gen = pinloc(&[
        "gen",
        "--u",
        "2.5,7.0",
        "--seed",
        "42",
        "--noise-dbm",
        "-70",
        "--out",
        path_str(&obs),
    ]);
    assert!(gen.status.success());
    assert!(dir.path().join("obs.csv.manifest.json").exists());

    let args = ["estimate", "--input", path_str(&obs), "--noise-dbm", "-70"];
    let first = pinloc(&args);
    let second = pinloc(&args);
    assert_eq!(first.stdout, second.stdout);
    let v = ok_json(first);
    let dx = v["estimate_x_m"].as_f64().unwrap() - 2.5;
    let dy = v["estimate_y_m"].as_f64().unwrap() - 7.0;
    assert!(dx.hypot(dy) < 0.01, "error {}", dx.hypot(dy));
    assert_eq!(v["converged"], true);
    assert!(v["flags"].as_array().unwrap().is_empty());

    let wls = ok_json(pinloc(&[
        "estimate",
        "--input",
        path_str(&obs),
        "--estimator",
        "wls",
    ]));
    assert_eq!(wls["estimator"], "wls");
}

#[test]
fn estimate_output_manifest_hashes_artifact() {
    let dir = TempDir::new().unwrap();
    let obs = dir.path().join("obs.csv");
    assert!(
        pinloc(&["gen", "--u", "1,1", "--seed", "1", "--out", path_str(&obs)])
            .status
            .success()
    );
    let est = dir.path().join("est.json");
    assert!(pinloc(&[
        "estimate",
        "--input",
        path_str(&obs),
        "--out",
        path_str(&est)
    ])
    .status
    .success());
    let manifest: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("est.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "estimate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(
        manifest["artifacts"][0]["sha256"],
        hex_sha256(&fs::read(&est).unwrap())
    );
    assert_eq!(
        manifest["spec_echo"]["input_sha256"],
        hex_sha256(&fs::read(&obs).unwrap())
    );
}

fn hex_sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn sweep_schema_and_rerun_bytes() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("small.spec");
    fs::write(&spec, SMALL_SWEEP).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(pinloc_threads(
        "1",
        &["mc-sweep", "--spec", path_str(&spec), "--out", path_str(&a)]
    )
    .status
    .success());
    assert!(pinloc_threads(
        "3",
        &["mc-sweep", "--spec", path_str(&spec), "--out", path_str(&b)]
    )
    .status
    .success());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let rows = pinloc::io::parse_sweep_csv(&text).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    for r in &rows {
        assert_eq!(r.trials_ok + r.trials_failed, 6);
        assert!(r.rmse_m >= r.mean_err_m);
    }
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap())
            .unwrap();
    for key in [
        "config_hash",
        "command",
        "spec_echo",
        "tool_version",
        "started",
        "finished",
        "artifacts",
    ] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
}

#[test]
fn map_and_peb_map_rerun_bytes() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("small.map");
    fs::write(&spec, SMALL_MAP).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(pinloc_threads(
        "1",
        &["mc-map", "--spec", path_str(&spec), "--out", path_str(&a)]
    )
    .status
    .success());
    assert!(pinloc_threads(
        "2",
        &["mc-map", "--spec", path_str(&spec), "--out", path_str(&b)]
    )
    .status
    .success());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(
        pinloc::io::parse_error_map_csv(&text).unwrap().len(),
        3 * 5 * 2
    );

    let p = dir.path().join("peb.csv");
    assert!(pinloc(&[
        "peb-map",
        "--spacing",
        "0.5",
        "--bounds",
        "0,2,0,1",
        "--out",
        path_str(&p)
    ])
    .status
    .success());
    let text = fs::read_to_string(&p).unwrap();
    let header: Value =
        serde_json::from_str(text.lines().next().unwrap().trim_start_matches("# ")).unwrap();
    assert_eq!(header["grid"]["nx"], 5);
    assert_eq!(header["grid"]["ny"], 3);
    let cells = pinloc::io::parse_peb_map_csv(&text).unwrap();
    assert_eq!(cells.len(), 15);
    assert!(cells
        .iter()
        .filter(|c| c.0 == 0.0)
        .all(|c| c.2.is_infinite()));
    assert!(cells.iter().filter(|c| c.0 > 0.0).all(|c| c.2.is_finite()));
}

#[test]
fn bad_input_fails_with_message() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "n,re,im\n1,0,0\n2,nan,0\n").unwrap();
    let out = pinloc(&["estimate", "--input", path_str(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "carrier_frequency_hz = 2.8e9\nmystery = 1\n").unwrap();
    let out = pinloc(&["crlb", "--u", "1,1", "--config", path_str(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery"));

    assert!(!pinloc(&["crlb", "--u", "1"]).status.success());
    assert!(!pinloc(&["crlb", "--u", "1,1", "--noise-dbm", "nan"])
        .status
        .success());
    assert!(!pinloc(&["frobnicate"]).status.success());
    let out = pinloc_threads("zero", &["crlb", "--u", "1,1"]);
    assert!(!out.status.success());
}
