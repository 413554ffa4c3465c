use std::path::Path;
use std::process::{Command, Output};

use mpp_cli::commands::{self, Manifest};
use mpp_cli::csvio;
use mpp_core::model;
use tempfile::TempDir;

const MODEL_ONE: &str = r#"{
    "model": {"alpha1": 0.3, "p": 5, "q": 3,
              "means": {"planted": {"singular_values": [4.0], "seed": 1}},
              "row_cov": {"ar1": {"rho": 0.6}}, "col_cov": {"ar1": {"rho": 0.3}}},
    "optimizer": {"restarts": 3},
    "io": {"n": 500, "seed": 7}
}"#;

fn mpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpp")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn simulate(dir: &Path, config: &str, name: &str) -> String {
    let cfg = write(dir, &format!("{name}.json"), config);
    let out = path(dir, name);
    let res = mpp(&["simulate", "--config", &cfg, "--output", &out]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

#[test]
fn simulate_writes_exact_layout_and_manifest() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), MODEL_ONE, "a.mpp");
    let b = simulate(dir.path(), MODEL_ONE, "b.mpp");
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes.len(), 4 + 12 + 8 * 500 * 15 + 4 + 500);
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let manifest = Manifest::load(&commands::manifest_path(Path::new(&a))).unwrap();
    let w = model::w_lda(&model::model_one(0.3, 1).unwrap()).unwrap();
    assert!((manifest.w_lda() - w).amax() < 1e-12);
    assert_eq!(manifest.pairs.len(), 1);
    assert!((manifest.pairs[0].sigma - 4.0).abs() < 1e-10);
}

#[test]
fn extract_is_deterministic_and_reports_truth() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), MODEL_ONE, "d.mpp");
    let manifest = commands::manifest_path(Path::new(&data));
    let cfg_text = MODEL_ONE.replace(
        r#""io": {"n": 500, "seed": 7}"#,
        &format!(r#""io": {{"seed": 3, "manifest": {:?}}}"#, manifest.to_str().unwrap()),
    );
    let cfg = write(dir.path(), "x.json", &cfg_text);
    let (o1, o2) = (path(dir.path(), "r1.json"), path(dir.path(), "r2.json"));
    for o in [&o1, &o2] {
        let res = mpp(&["extract", "--config", &cfg, "--input", &data, "--output", o]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let csv1 = std::fs::read_to_string(Path::new(&o1).with_extension("csv")).unwrap();
    let csv2 = std::fs::read_to_string(Path::new(&o2).with_extension("csv")).unwrap();
    assert_eq!(csv1, csv2);
    assert!(csv1.starts_with("obs,label,score_pair1,score_w_nlda\n"));
    assert_eq!(csv1.lines().count(), 501);

    let report: commands::ExtractReport = serde_json::from_str(&std::fs::read_to_string(&o1).unwrap()).unwrap();
    assert_eq!(report.pairs.len(), 1);
    assert!(report.truth.unwrap().msi_u[0] > 0.8);
}

#[test]
fn pair_cap_violation_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), MODEL_ONE, "d.mpp");
    let cfg = write(dir.path(), "x.json", &MODEL_ONE.replace(r#""restarts": 3"#, r#""restarts": 3, "n_pairs": 3"#));
    let res = mpp(&["extract", "--config", &cfg, "--input", &data]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"optimizer": {"restart": 2}}"#);
    let res = mpp(&["simulate", "--config", &cfg, "--output", &path(dir.path(), "x")]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", MODEL_ONE);
    let res = mpp(&["extract", "--config", &cfg, "--input", &path(dir.path(), "absent.mpp")]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn empty_campaign_has_only_a_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        &MODEL_ONE.replace(r#""io": {"n": 500, "seed": 7}"#, r#""evaluation": {"replications": 0}"#),
    );
    let out = path(dir.path(), "c.csv");
    let res = mpp(&["campaign", "--config", &cfg, "--output", &out]);
    assert!(res.status.success());
    assert_eq!(std::fs::read_to_string(out).unwrap(), format!("{}\n", commands::CAMPAIGN_HEADER));
}

#[test]
fn campaign_records_failures_per_row() {
    let dir = TempDir::new().unwrap();
    // alpha on the regime boundary cannot be reconstructed; the campaign goes on
    let text = MODEL_ONE.replace(
        r#""io": {"n": 500, "seed": 7}"#,
        r#""evaluation": {"replications": 1, "alphas": [0.21132486540518713, 0.3], "sample_sizes": [300]}"#,
    );
    let cfg = write(dir.path(), "c.json", &text);
    let res = mpp(&["campaign", "--config", &cfg, "--seed", "5"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = String::from_utf8(res.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[..3].iter().all(|r| r.contains("error")));
    assert!(rows[3..].iter().all(|r| r.ends_with(",ok")));
}

#[test]
fn import_long_csv() {
    let dir = TempDir::new().unwrap();
    let csv = write(dir.path(), "one.csv", "obs,row,col,value\n0,0,0,1\n0,0,1,2\n0,1,0,3\n0,1,1,4\n");
    let out = path(dir.path(), "one.mpp");
    let res = mpp(&["import-csv", "--input", &csv, "--output", &out]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(std::fs::read(&out).unwrap().len(), 4 + 12 + 32);

    let dup = write(dir.path(), "dup.csv", "obs,row,col,value\n0,0,0,1\n0,0,0,2\n");
    let res = mpp(&["import-csv", "--input", &dup, "--output", &out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}

#[test]
fn export_import_round_trip_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), MODEL_ONE, "d.mpp");
    let sample = mpp_cli::tensorfile::read(Path::new(&data)).unwrap().with_labels(None).unwrap();
    let csv = write(dir.path(), "d.csv", &csvio::export_long(&sample));
    let out = path(dir.path(), "back.mpp");
    assert!(mpp(&["import-csv", "--input", &csv, "--output", &out]).status.success());
    assert_eq!(std::fs::read(out).unwrap(), mpp_cli::tensorfile::encode(&sample).unwrap());
}

#[test]
fn gradcheck_passes_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), MODEL_ONE, "d.mpp");
    let a = mpp(&["gradcheck", "--input", &data, "--seed", "4"]);
    let b = mpp(&["gradcheck", "--input", &data, "--seed", "4"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let report: commands::GradcheckReport = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report.pairs, 20);
    assert!(report.max_rel_error < 1e-5);
}

#[test]
fn gradcheck_excludes_degenerate_pairs() {
    let dir = TempDir::new().unwrap();
    // constant observations center to zero, so every projection is degenerate
    let mut text = String::from("obs,row,col,value\n");
    for i in 0..10 {
        text.push_str(&format!("{i},0,0,1.5\n{i},0,1,-2\n{i},1,0,0.25\n{i},1,1,3\n"));
    }
    let csv = write(dir.path(), "z.csv", &text);
    let data = path(dir.path(), "z.mpp");
    assert!(mpp(&["import-csv", "--input", &csv, "--output", &data]).status.success());
    let cfg = write(dir.path(), "g.json", r#"{"evaluation": {"gradcheck_pairs": 5}}"#);
    let res = mpp(&["gradcheck", "--config", &cfg, "--input", &data]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("excluded"));
    let report: commands::GradcheckReport = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report.excluded, vec![0, 1, 2, 3, 4]);
}

#[test]
fn baselines_on_separated_groups_are_perfect() {
    let dir = TempDir::new().unwrap();
    let text = MODEL_ONE
        .replace("[4.0]", "[40.0]")
        .replace(r#""n": 500"#, r#""n": 2000"#);
    let data = simulate(dir.path(), &text, "s.mpp");
    let cfg = write(dir.path(), "b.json", &text);
    let out = path(dir.path(), "b.csv");
    let res = mpp(&["baselines", "--config", &cfg, "--input", &data, "--output", &out]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let table = std::fs::read_to_string(out).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0, "{row}");
    }
}

#[test]
fn baselines_without_labels_skip_lda() {
    let dir = TempDir::new().unwrap();
    let data = simulate(dir.path(), MODEL_ONE, "d.mpp");
    let sample = mpp_cli::tensorfile::read(Path::new(&data)).unwrap().with_labels(None).unwrap();
    mpp_cli::tensorfile::write(Path::new(&data), &sample).unwrap();
    let cfg = write(dir.path(), "b.json", MODEL_ONE);
    let res = mpp(&["baselines", "--config", &cfg, "--input", &data]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("warning"));
    let table = String::from_utf8(res.stdout).unwrap();
    assert!(!table.lines().any(|r| r.starts_with("lda,")));
    assert!(table.lines().skip(1).all(|r| r.split(',').nth(2) == Some("")));
}
