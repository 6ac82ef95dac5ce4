//! Runs the `rlgr` binary and checks outputs and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rlgr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlgr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_quick_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        r#"
name = "cli"
methods = ["mean-impute", "rlgr1"]
missing_levels = [0.2]
replications = 2
tuning_replications = 1
{extra}
[data]
source = "synthetic"
p = 8
tasks = 3
n_per_task = 30
sparsity = 2
noise_std = 0.1
[grid]
mu = [0.01, 0.1]
lambda = [0.1]
delta = [0.0, 0.1]
rank = [2]
"#
    );
    let path = dir.join("cfg.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn sweep_writes_identical_results_twice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path(), "");
    let mut results = Vec::new();
    for out in ["a", "b"] {
        let o = rlgr(&["sweep", "--config", &cfg, "--out", out, "--threads", "2"], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let file = fs::read_dir(dir.path().join(out))
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.to_string_lossy().ends_with("-results.csv"))
            .unwrap();
        results.push(fs::read(file).unwrap());
    }
    assert_eq!(results[0], results[1]);
    assert_eq!(String::from_utf8_lossy(&results[0]).lines().count(), 5);
}

#[test]
fn tune_prints_one_choice_per_method_and_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_quick_config(dir.path(), "");
    let o = rlgr(&["tune", "--config", &cfg, "--method", "rlgr1", "--out", "t"], dir.path());
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("rlgr1,")).count(), 1);
}

#[test]
fn generate_fit_and_weibull_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = rlgr(&["generate", "--kind", "cohort", "--seed", "3", "--out", "data"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<String> = (1..=5).map(|i| format!("data/cohort_task{i}.csv")).collect();
    let mut args = vec!["fit", "--method", "rlgr1", "--delta", "0.1", "--normalize", "--out", "fit"];
    args.extend(files.iter().map(String::as_str));
    let o = rlgr(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("converged"));
    assert!(dir.path().join("fit/model.csv").exists());

    let mut args = vec!["weibull", "--out", "wb", "--points", "50"];
    args.extend(files.iter().map(String::as_str));
    let o = rlgr(&args, dir.path());
    // Synthetic cohort scores can be negative, which a Weibull fit rejects.
    assert!(o.status.success() || o.status.code() == Some(2));
}

#[test]
fn weibull_on_positive_scores() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("f0,target\n");
    for i in 1..=40 {
        body.push_str(&format!("{i},{}\n", 1.0 + (i as f64 * 0.37).sin().abs() * 3.0));
    }
    fs::write(dir.path().join("t.csv"), body).unwrap();
    let o = rlgr(&["weibull", "t.csv", "--out", "wb", "--points", "20"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pdf = fs::read_to_string(dir.path().join("wb/weibull_pdf.csv")).unwrap();
    assert_eq!(pdf.lines().count(), 21);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Usage and config errors exit with 1.
    assert_eq!(rlgr(&["sweep"], dir.path()).status.code(), Some(1));
    fs::write(dir.path().join("bad.toml"), "methods = []").unwrap();
    assert_eq!(rlgr(&["sweep", "--config", "bad.toml"], dir.path()).status.code(), Some(1));
    assert_eq!(rlgr(&["--help"], dir.path()).status.code(), Some(0));

    // Malformed data exits with 2.
    fs::write(dir.path().join("bad.csv"), "f0,target\n1.0,oops\n").unwrap();
    assert_eq!(rlgr(&["fit", "bad.csv"], dir.path()).status.code(), Some(2));

    // A grid where every point fails exits with 3.
    let cfg = write_quick_config(dir.path(), "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace(r#"["mean-impute", "rlgr1"]"#, r#"["mf-lgr"]"#)
        .replace("rank = [2]", "rank = [40]");
    fs::write(&cfg, text).unwrap();
    assert_eq!(rlgr(&["tune", "--config", &cfg], dir.path()).status.code(), Some(3));
}
