use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use magwell::birkhoff::{FStar, FStarDocument};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_magwell"))
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("cli-{name}"));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn odd_dimension_is_a_config_error() {
    let dir = scratch("odd");
    let cfg = write_config(
        &dir,
        r#"{"system": {"dimension": 3, "potential": [[], [], []], "domain": [[-1, 1], [-1, 1], [-1, 1]]}}"#,
    );
    let o = run(&["analyze", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o).to_string().contains("system.dimension"));
}

#[test]
fn unknown_fields_and_missing_input_are_rejected() {
    let dir = scratch("unknown");
    let cfg = write_config(
        &dir,
        r#"{"system": {"dimension": 2, "potential": [[], []], "domain": [[-1, 1], [-1, 1]]}, "colour": 1}"#,
    );
    assert_eq!(run(&["analyze", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(run(&["analyze"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--preset", "nope"]).status.code(), Some(2));
}

#[test]
fn constant_field_fails_the_hypotheses() {
    let dir = scratch("constant");
    let cfg = write_config(
        &dir,
        r#"{"system": {"dimension": 2, "potential": [[], [{"coeff": 1.0, "powers": [1, 0]}]],
            "domain": [[-2, 2], [-2, 2]], "initial_guess": [0.3, 0.1]}}"#,
    );
    let out = dir.join("out");
    let o = run(&["predict", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn predictions_are_deterministic_and_stamped() {
    let dir = scratch("determinism");
    let (a, b) = (dir.join("a"), dir.join("b"));
    for d in [&a, &b] {
        let o = run(&["predict", "--preset", "quadratic-well-2d", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ca = fs::read(a.join("predict.csv")).unwrap();
    assert_eq!(ca, fs::read(b.join("predict.csv")).unwrap());
    let text = String::from_utf8(ca).unwrap();
    let header = text.lines().next().unwrap();
    let prefix = format!("# magwell {} config_sha256=", env!("CARGO_PKG_VERSION"));
    assert!(header.starts_with(&prefix), "{header}");
    let hash = header[prefix.len()..].split_whitespace().next().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(text.lines().nth(1), Some("j,k,coefficient"));
    // the expansion of the reference well: c_{j,4} = 2j - 1 + c0 with c0 = 1
    let rows: Vec<Vec<String>> = text.lines().skip(2).map(|l| l.split(',').map(String::from).collect()).collect();
    for j in 1..=3 {
        let c4: f64 = rows.iter().find(|r| r[0] == j.to_string() && r[1] == "4").unwrap()[2].parse().unwrap();
        assert!((c4 - 2.0 * j as f64).abs() < 1e-9, "{c4}");
    }
    let json: Value = serde_json::from_slice(&fs::read(a.join("predict.json")).unwrap()).unwrap();
    assert_eq!(json["meta"]["config_sha256"], hash);
}

#[test]
fn normal_form_writes_a_readable_fstar_table() {
    let dir = scratch("fstar");
    let o = run(&["normal-form", "--preset", "quadratic-well-2d", "--out", dir.to_str().unwrap(), "--dump-jets"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&fs::read(dir.join("fstar.json")).unwrap()).unwrap();
    let doc: FStarDocument = serde_json::from_value(v["data"].clone()).unwrap();
    let fs = FStar::from_document(&doc).unwrap();
    assert!(!fs.table.is_empty());
    assert!(dir.join("jets/kappa.json").exists());
}

#[test]
fn small_landau_oracle_run() {
    let dir = scratch("landau");
    let cfg = write_config(
        &dir,
        r#"{"system": {"dimension": 2, "potential": [[], [{"coeff": 1.0, "powers": [1, 0]}]],
            "domain": [[-2, 2], [-2, 2]]},
            "oracle": {"hbars": [0.3], "points": 61, "k": 2, "landau_field": 1.0}}"#,
    );
    let out = dir.join("out");
    let o = run(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap(), "--dump-matrix"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("hbar,n_grid,L,j,lambda,residual"));
    assert_eq!(csv.lines().count(), 4);
    let v: Value = serde_json::from_slice(&fs::read(out.join("oracle.json")).unwrap()).unwrap();
    // the lowest level is far from the walls at this size, the second one feels them
    let first = &v["data"]["landau"][0];
    assert_eq!(first["j"], 1);
    assert!(first["relative_error"].as_f64().unwrap() < 0.01, "{first}");
    assert!(out.join("matrices/matrix_0.txt").exists());
}
