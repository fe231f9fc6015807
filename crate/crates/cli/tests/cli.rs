use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bracketflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bracketflow"))
        .args(args)
        .env("BRACKETFLOW_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn manifest(prefix: &Path) -> Value {
    let path = format!("{}.manifest.json", prefix.display());
    serde_json::from_str(&std::fs::read_to_string(path).expect("manifest written")).unwrap()
}

fn read(prefix: &Path, suffix: &str) -> String {
    std::fs::read_to_string(format!("{}{suffix}", prefix.display())).unwrap()
}

#[test]
fn series_radius_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = bracketflow(&["series", "--eps", "0.1", "--q", "2", "--J", "1", "--kmax", "200", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let r = m["summary"]["delta_tilde_radius"].as_f64().unwrap();
    assert!((r - 5.0).abs() < 0.1, "{r}");
    assert!(m["summary"]["jk_radius"].as_f64().unwrap() < 1e-3);
    assert_eq!(m["config"]["eps"], 0.1);
    assert!(m["error"].is_null());
    assert!(read(&out, ".jk.csv").starts_with("# series=jk-recursive mode=log\nk,log_coefficient\n"));
    assert!(read(&out, ".delta_tilde.csv").contains("\nk,coefficient\n"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, format!(r#"{{"n": 2, "out": "{}"}}"#, out.display())).unwrap();
    let o = bracketflow(&["eigencheck", "--config", cfg.to_str().unwrap(), "--n", "3"]);
    assert!(o.status.success());
    let m = manifest(&out);
    assert_eq!(m["config"]["n"], 3);
    assert_eq!(m["summary"]["strings"], 64);
    assert_eq!(m["summary"]["max_abs_error"], 0.0);
    let csv = read(&out, ".csv");
    assert!(csv.starts_with("string,charge,lambda,expected\n"));
    assert_eq!(csv.lines().count(), 65);
}

#[test]
fn eigencheck_n4_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e4");
    assert!(bracketflow(&["eigencheck", "--n", "4", "--out", out.to_str().unwrap()]).status.success());
    for line in read(&out, ".csv").lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2].parse::<f64>().unwrap(), f[3].parse::<f64>().unwrap(), "{line}");
    }
}

#[test]
fn unknown_key_fails_but_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    let o = bracketflow(&["series", "--epsilon", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(&out);
    assert!(m["error"].as_str().unwrap().contains("epsilon"), "{}", m["error"]);
    assert!(m["summary"].is_null());
    assert_eq!(m["config"]["epsilon"], 0.1);
}

#[test]
fn module_errors_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("odd");
    let o = bracketflow(&["dimer-growth", "--n", "33", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(manifest(&out)["error"].as_str().unwrap().contains("even"));
}

#[test]
fn unknown_subcommand_is_rejected() {
    assert!(!bracketflow(&["frobnicate"]).status.success());
}

#[test]
fn lemma1_at_b_zero_passes_with_zero_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l");
    let o = bracketflow(&["lemma1", "--n", "64", "--B", "[0]", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = read(&out, ".instance0.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,R_k,B,measured,bound,pass"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f[0] != "0" {
            assert_eq!(f[3].parse::<f64>().unwrap(), 0.0, "{line}");
        }
        assert_eq!(f[5], "true");
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<String> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = bracketflow(&["imagtime", "--n", "32", "--mmax", "12", "--seed", "9", "--out", out.to_str().unwrap()]);
            assert!(o.status.success());
            read(&out, ".csv")
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0].starts_with("tau,m,norm,bound,tail_beyond_mR\n"));
    // 17 significant digits.
    let first = runs[0].lines().nth(1).unwrap();
    assert_eq!(first.split(',').next().unwrap(), "5.0000000000000000e-1");
}

#[test]
fn small_probe_and_growth_runs() {
    let dir = tempfile::tempdir().unwrap();
    let probe = dir.path().join("p");
    let o = bracketflow(&["spin-probe", "--sizes", "[4,5]", "--B", "0.5", "--out", probe.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(read(&probe, ".weights.csv").starts_with("size,diameter,weight\n"));
    assert_eq!(manifest(&probe)["outputs"].as_array().unwrap().len(), 3);

    let growth = dir.path().join("g");
    let o = bracketflow(&["dimer-growth", "--n", "256", "--B", "[0.05,0.1,0.15]", "--out", growth.to_str().unwrap()]);
    assert!(o.status.code().is_some_and(|c| c == 0 || c == 2));
    assert!(read(&growth, ".csv").starts_with("B,xi,theta_star,abs_cos_theta_star\n"));
}

#[test]
fn bad_thread_cap_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = Command::new(env!("CARGO_BIN_EXE_bracketflow"))
        .args(["eigencheck", "--n", "1", "--out", out.to_str().unwrap()])
        .env("BRACKETFLOW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(manifest(&out)["error"].as_str().unwrap().contains("BRACKETFLOW_THREADS"));
}
