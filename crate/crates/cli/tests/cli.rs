use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rvpinn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvpinn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, out: &Path, extra_train: &str) -> std::path::PathBuf {
    let path = dir.join("cfg.json");
    let text = format!(
        r#"{{
  "problem": {{"kind": "smooth"}},
  "space": {{"kind": "spectral", "dimension": 8}},
  "bc": "strong",
  "train": {{"max_epochs": 30, "record_every": 5, "architecture": [1, 6, 6, 1],
             "error_nodes": 500, "seed": 4{extra_train}}},
  "output_dir": "{}"
}}"#,
        out.display()
    );
    fs::write(&path, text).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn train_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = small_config(tmp.path(), &out, "");
    let o = rvpinn(&["train", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.json", "history.csv", "solution.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(
        lines[0],
        "epoch,loss,sqrt_loss,phi_norm,energy_error,penalty,lower_bound_ok"
    );
    assert_eq!(lines.len(), 1 + 7);
    let solution = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(solution.starts_with("x,u_theta,u_exact\n"));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["final_record"]["epoch"], 30);
    assert_eq!(summary["bounds"]["lower_bound_fraction"], 1.0);

    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["problem"]["epsilon"], 1.0);
    assert_eq!(echoed["train"]["learning_rate"], 5e-4);
}

#[test]
fn echoed_config_reproduces_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("a");
    let cfg = small_config(tmp.path(), &first, "");
    assert_eq!(code(&rvpinn(&["train", cfg.to_str().unwrap()])), 0);
    let second = tmp.path().join("b");
    let echoed = first.join("config.json");
    let o = rvpinn(&[
        "train",
        echoed.to_str().unwrap(),
        "--output-dir",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(first.join("history.csv")).unwrap(),
        fs::read(second.join("history.csv")).unwrap()
    );
    assert_eq!(
        fs::read(first.join("solution.csv")).unwrap(),
        fs::read(second.join("solution.csv")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = small_config(tmp.path(), &out, "");
    let o = rvpinn(&["train", cfg.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(code(&o), 0);
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["train"]["seed"], 99);
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    for (name, text) in [
        ("syntax.json", "{ \"bc\": ".to_owned()),
        ("field.json", format!(r#"{{"output_dir": "{}", "train": {{"epochs": 3}}}}"#, out.display())),
        ("value.json", format!(r#"{{"output_dir": "{}", "problem": {{"epsilon": 0}}}}"#, out.display())),
    ] {
        let path = tmp.path().join(name);
        fs::write(&path, text).unwrap();
        let o = rvpinn(&["train", path.to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{name}");
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
        assert!(!out.exists(), "{name}");
    }
    let o = rvpinn(&["train", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn numerical_abort_exits_3_with_history() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = small_config(tmp.path(), &out, r#", "learning_rate": 1e300"#);
    let o = rvpinn(&["train", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.lines().count() >= 2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "aborted");
}

#[test]
fn verify_suites_pass() {
    for suite in ["gram", "grad", "rescale", "consistency"] {
        let o = rvpinn(&["verify", suite]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(code(&o), 0, "{suite}: {stdout}");
        assert!(stdout.lines().count() >= 3, "{suite}");
        assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
    }
}

#[test]
fn unknown_suite_exits_2() {
    assert_eq!(code(&rvpinn(&["verify", "everything"])), 2);
}

#[test]
fn sweep_aggregates_each_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let cfg = small_config(tmp.path(), &out, "");
    let o = rvpinn(&["sweep", cfg.to_str().unwrap(), "--epsilons", "1,0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("eps_1/history.csv").is_file());
    assert!(out.join("eps_0.1/summary.json").is_file());
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("epsilon,status,"));
    assert!(lines[1].contains(",ok,"));
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eps_0.1/config.json")).unwrap()).unwrap();
    assert_eq!(echoed["problem"]["epsilon"], 0.1);
}

#[test]
fn single_epsilon_sweep_matches_train() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep_out = tmp.path().join("sweep");
    let cfg = small_config(tmp.path(), &sweep_out, "");
    assert_eq!(code(&rvpinn(&["sweep", cfg.to_str().unwrap(), "--epsilons", "1"])), 0);
    let train_out = tmp.path().join("train");
    let o = rvpinn(&["train", cfg.to_str().unwrap(), "--output-dir", train_out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(sweep_out.join("eps_1/history.csv")).unwrap(),
        fs::read(train_out.join("history.csv")).unwrap()
    );
    let text = fs::read_to_string(sweep_out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn sweep_rejects_bad_epsilon_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let cfg = small_config(tmp.path(), &out, "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&rvpinn(&["sweep", cfg, "--epsilons", ""])), 2);
    assert_eq!(code(&rvpinn(&["sweep", cfg])), 2);
    assert_eq!(code(&rvpinn(&["sweep", cfg, "--epsilons", "0.1,-1"])), 2);
    assert!(!out.exists());
}
