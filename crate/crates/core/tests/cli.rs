use std::process::{Command, Output};

fn cfcost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfcost")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn expand_prints_digits_and_depth() {
    let o = cfcost(&["expand", "5", "7", "ordinary"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("digits=[1,2,2] depth=3"));
}

#[test]
fn validation_errors_exit_with_one() {
    assert_eq!(cfcost(&["expand", "7", "5", "ordinary"]).status.code(), Some(1));
    assert_eq!(cfcost(&["enumerate"]).status.code(), Some(1));
    assert_eq!(cfcost(&["--cost", "nonsense", "enumerate", "--n", "5"]).status.code(), Some(1));
    assert_eq!(cfcost(&["alpha-calc", "--eta", "1", "--rho", "0.5", "--sup-inv-deriv", "1"]).status.code(), Some(1));
    assert_eq!(cfcost(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn json_output_has_envelope() {
    let o = cfcost(&["--format", "json", "enumerate", "--n", "30"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["tool_version"].is_string());
    assert!(v["config_echo"].is_object());
    assert_eq!(v["results"]["count"], 278);
}

#[test]
fn progress_goes_to_stderr_and_csv_stays_clean() {
    let o = cfcost(&["--format", "csv", "moments", "--n-list", "50,100"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("enumerating"));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("N,E_N,V_N,E_N/logN,V_N/logN"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn dry_run_only_validates() {
    let o = cfcost(&["--dry-run", "--format", "json", "enumerate", "--n", "1000000000"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["results"]["valid"], true);
}

#[test]
fn thread_count_does_not_change_integer_outputs() {
    let one = stdout(&cfcost(&["--threads", "1", "--cost", "log", "--format", "csv", "enumerate", "--n", "300"]));
    let four = stdout(&cfcost(&["--threads", "4", "--cost", "log", "--format", "csv", "enumerate", "--n", "300"]));
    assert_eq!(one, four);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = std::env::temp_dir().join(format!("cfcost-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"cost": "log", "n": 40, "format": "json"}"#).unwrap();
    let o = cfcost(&["--config", cfg.to_str().unwrap(), "enumerate"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["results"]["n"], 40);
    assert_eq!(v["config_echo"]["cost"]["name"], "log");

    std::fs::write(&cfg, r#"{"unknown_key": 1}"#).unwrap();
    assert_eq!(cfcost(&["--config", cfg.to_str().unwrap(), "enumerate", "--n", "5"]).status.code(), Some(1));

    let out = dir.join("out.csv");
    let o = cfcost(&["--output", out.to_str().unwrap(), "--format", "csv", "char-fn", "--n", "50", "--taus", "0,1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("tau,re,im,modulus\n0.000000000000,1.000000000000,"));
    std::fs::remove_dir_all(&dir).unwrap();
}
