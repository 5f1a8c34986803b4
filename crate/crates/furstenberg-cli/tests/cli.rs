//! The binary end to end: outputs, artifacts and exit statuses.

use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_furstenberg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn full_grid_is_a_two_dimensional_set() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.txt");
    let mut text = String::from("{\"scale_exponent\":3,\"count\":64}\n");
    for x in 0..8 {
        for y in 0..8 {
            text.push_str(&format!("3 {x} {y}\n"));
        }
    }
    std::fs::write(&path, text).unwrap();
    let o = bin(&["certify", "--input", path.to_str().unwrap(), "--s", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut rows = csv::Reader::from_reader(out.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "certificate").unwrap();
    let first = rows.records().next().unwrap().unwrap();
    assert_eq!(&first[0], "squares");
    assert_eq!(&first[col], "1");
}

#[test]
fn gen_is_reproducible() {
    let args = ["gen", "--kind", "random-frostman", "--k", "6", "--s", "3/4", "--seed", "9"];
    let (a, b) = (bin(&args), bin(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("{\"scale_exponent\":6"));
}

#[test]
fn bad_configurations_exit_with_three() {
    assert_eq!(bin(&["certify", "--kind", "product", "--k", "4", "--s", "1", "--t", "1"]).status.code(), Some(3));
    assert_eq!(bin(&["certify", "--s", "not-a-number"]).status.code(), Some(3));
    assert_eq!(bin(&["no-such-command"]).status.code(), Some(3));
    let o = bin(&["refine", "--k", "4", "--k-delta", "6"]);
    assert_eq!(o.status.code(), Some(3));
    let witness: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(witness["exit"], 3);
    assert!(bin(&["--help"]).status.success());
}

#[test]
fn failed_checks_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.txt");
    std::fs::write(&path, "{\"scale_exponent\":3,\"count\":0}\n").unwrap();
    let o = bin(&["certify", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let witness: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(witness["error"], "check");
    assert_eq!(bin(&["incidence", "--budget", "0"]).status.code(), Some(3));
}

#[test]
fn config_files_write_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("refine.csv");
    let cfg = dir.path().join("run.json");
    let text = serde_json::json!({
        "version": 1, "command": "refine", "kind": "furstenberg", "k": 8, "s": "1/2", "t": "1",
        "seed": 1, "k_delta": 4, "stage": "both", "output": out,
    });
    std::fs::write(&cfg, text.to_string()).unwrap();
    let o = bin(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body = std::fs::read_to_string(&out).unwrap();
    assert!(body.starts_with("case,metric,value,limit,pass"));
    assert!(body.lines().skip(1).all(|l| l.ends_with(",true")), "{body}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert!(json.is_object());
    let stale = text.to_string().replace("\"version\":1", "\"version\":7");
    std::fs::write(&cfg, stale).unwrap();
    assert_eq!(bin(&["run", cfg.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn cantor_target_incidences() {
    let o = bin(&["incidence", "--kind", "cantor-target", "--k", "8", "--s", "1/2", "--t", "1/2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut r = csv::Reader::from_reader(out.as_bytes());
    let h = r.headers().unwrap().clone();
    let rec = r.records().next().unwrap().unwrap();
    let get = |name: &str| rec[h.iter().position(|x| x == name).unwrap()].to_string();
    assert_eq!(get("upper_holds"), "true");
    assert_eq!(get("lower_holds"), "true");
}

#[test]
fn quick_suite_passes() {
    let o = bin(&["suite", "--quick", "--verify-rerun"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().filter(|l| l.contains(" PASS ")).count(), 13);
}
