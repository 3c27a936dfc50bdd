//! End-to-end behaviour of the `hcon` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn hcon(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcon"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

/// Data row of a single-record CSV as column name -> value.
fn csv_row(path: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let row: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    header.into_iter().zip(row).collect()
}

fn field(row: &[(String, String)], key: &str) -> String {
    row.iter().find(|(k, _)| k == key).unwrap().1.clone()
}

#[test]
fn zero_iterations_give_zero_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcon(dir.path(), &["bounds", "--iterations", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let row = csv_row(&dir.path().join("bounds.csv"));
    assert_eq!(field(&row, "kappa0"), "0.0");
    assert_eq!(field(&row, "kappa"), "0.0");
    assert_eq!(field(&row, "iterations"), "0");
}

#[test]
fn identity_hypergraph_has_unit_spectral_norm_in_both_modes() {
    for mode in ["normalized", "raw"] {
        let dir = tempfile::tempdir().unwrap();
        let ds = fixture("identity.hgd.json");
        let out = hcon(dir.path(), &["bounds", "--dataset", ds.to_str().unwrap(), "--normalization", mode]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let row = csv_row(&dir.path().join("bounds.csv"));
        assert_eq!(field(&row, "mu"), "1.0", "{mode}");
    }
}

#[test]
fn overflowing_bound_exits_with_warning_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcon(dir.path(), &["bounds", "--iterations", "1000000000", "--eta", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let row = csv_row(&dir.path().join("bounds.csv"));
    assert_eq!(field(&row, "gap_bound"), "inf");
    assert_eq!(field(&row, "overflow"), "true");
}

#[test]
fn fault_injection_fails_verification_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture("planted200.hgd.json");
    let out = hcon(
        dir.path(),
        &["verify", "--dataset", ds.to_str().unwrap(), "--fault-g-max-scale", "0.01"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("grad_norm_bound"), "{stderr}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(summary["metadata"]["config"].is_object());
}

#[test]
fn verify_passes_on_the_planted_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture("planted200.hgd.json");
    let out = hcon(dir.path(), &["verify", "--dataset", ds.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn norm_compare_writes_both_traces() {
    let dir = tempfile::tempdir().unwrap();
    let ds = fixture("planted200.hgd.json");
    let out = hcon(
        dir.path(),
        &["norm-compare", "--dataset", ds.to_str().unwrap(), "--epochs", "3", "--trials", "2"],
    );
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    for f in ["epochs_normalized.csv", "epochs_raw.csv", "norm_compare.csv", "norm_compare.gp"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let raw = fs::read_to_string(dir.path().join("epochs_raw.csv")).unwrap();
    assert!(raw.lines().any(|l| l == "epoch,train_loss,test_loss"));
    assert_eq!(raw.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn config_echo_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let ds = fixture("planted200.hgd.json");
    let out = hcon(
        first.path(),
        &[
            "gap-sweep",
            "--dataset",
            ds.to_str().unwrap(),
            "--iterations",
            "500",
            "--trials",
            "3",
            "--etas",
            "0.01,0.03",
            "--master-seed",
            "7",
        ],
    );
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    let csv = first.path().join("gap_sweep.csv");
    let second = tempfile::tempdir().unwrap();
    let again = hcon(second.path(), &["gap-sweep", "--config", csv.to_str().unwrap()]);
    assert_eq!(again.status.code(), out.status.code());
    assert_eq!(
        fs::read(&csv).unwrap(),
        fs::read(second.path().join("gap_sweep.csv")).unwrap()
    );
}

#[test]
fn invalid_input_exits_with_error_and_leaves_no_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcon(dir.path(), &["bounds", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("bounds.csv").exists());

    let out = hcon(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));

    let missing = dir.path().join("missing.hgd.json");
    let out = hcon(dir.path(), &["train", "--dataset", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn synth_then_train_on_the_written_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcon(dir.path(), &["synth", "--synth-n", "80", "--synth-m", "80"]);
    assert_eq!(out.status.code(), Some(0));
    let ds = dir.path().join("planted.hgd.json");
    assert!(ds.exists());
    let out = hcon(dir.path(), &["train", "--dataset", ds.to_str().unwrap(), "--iterations", "300"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("train.json")).unwrap()).unwrap();
    assert!(doc["result"].is_object());
}

#[test]
fn edge_feature_normalization_is_a_config_flag() {
    let ds = fixture("triangle.hgd.json");
    let run = |flag: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = hcon(
            dir.path(),
            &["bounds", "--dataset", ds.to_str().unwrap(), "--normalize-edge-features", flag],
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        field(&csv_row(&dir.path().join("bounds.csv")), "g_max")
    };
    assert_ne!(run("true"), run("false"));
}
