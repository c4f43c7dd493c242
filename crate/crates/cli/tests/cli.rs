use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qfnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfnet")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn repo_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const TWO_PARTY: &str = r#"{
  "schema_version": 1,
  "protocol": {"n": 3000000000000, "c": 0.2, "delta": 0.22, "epsilon": EPS, "N": 2},
  "channel": {"sqrt_eta": [0.3, 0.4], "dark_count": 1e-10},
  "optimizer": {"bounds": [LO, HI], "grid": 9}
}"#;

fn two_party(eps: &str, lo: &str, hi: &str) -> String {
    TWO_PARTY.replace("EPS", eps).replace("LO", lo).replace("HI", hi)
}

const DESK: &str = r#"{
  "schema_version": 1,
  "protocol": {"n": 20000, "c": 1.0, "delta": 0.22, "epsilon": 0.001, "N": 4},
  "channel": {"eta": 0.1, "dark_count": DARK},
  "montecarlo": {"m": 20000, "trials": 2500, "seed": 7, "runs": [
    {"alphas": [30, 30, 30, 30]}, {"alphas": [30, 30, 30, 30]}, {"alphas": [30, 30, 30, 30]}
  ]}
}"#;

#[test]
fn decision_tables_match_golden() {
    for n in ["3", "4"] {
        let o = qfnet(&["decision-table", "--n", n]);
        assert_eq!(code(&o), 0);
        assert_eq!(String::from_utf8(o.stdout).unwrap(), golden(&format!("decision_table_{n}.csv")));
    }
}

#[test]
fn reproduce_matches_golden() {
    for t in ["TE1", "TC1", "TV", "T4"] {
        let o = qfnet(&["reproduce", t, "--code-length", "rate"]);
        assert_eq!(code(&o), 0, "{t}");
        assert_eq!(String::from_utf8(o.stdout).unwrap(), golden(&format!("reproduce_{t}.csv")), "{t}");
    }
}

#[test]
fn reproduce_reports_every_parameter_table() {
    for t in ["T3", "T4", "T_asym4", "T_twobit", "T_vis"] {
        let o = qfnet(&["reproduce", t]);
        assert_eq!(code(&o), 0, "{t}");
        let text = String::from_utf8(o.stdout).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# qfnet "));
        assert_eq!(lines.next().unwrap(), "quantity,paper_value,audited_value,optimized_value,relative_difference,feasible");
        let quantities: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
        for q in ["q_r", "p_e", "c_o_ae", "c_l_ae"] {
            assert!(quantities.contains(&q), "{t} lacks {q}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&qfnet(&["reproduce", "T9"])), 2);
    assert_eq!(code(&qfnet(&["decision-table", "--n", "5"])), 2);
    assert_eq!(code(&qfnet(&["no-such-command"])), 2);
    let o = qfnet(&["simulate", &repo_config("desk_simulation.json"), "--relationship", "AAZ1"]);
    assert_eq!(code(&o), 2);
    let o = qfnet(&["simulate", &repo_config("desk_simulation.json"), "--relationship", "AAB"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let body = two_party("1e-5", "0.1", "2000").replace("\"dark_count\"", "\"darkcount\": 1,\n \"dark_count\"");
    let path = write_config(dir.path(), "bad.json", &body);
    let o = qfnet(&["optimize", &path]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("unknown field `darkcount`") && err.contains("line 4"), "{err}");

    let both = two_party("1e-5", "0.1", "2000").replace("\"dark_count\"", "\"eta\": 0.1, \"dark_count\"");
    let path = write_config(dir.path(), "both.json", &both);
    assert_eq!(code(&qfnet(&["optimize", &path])), 2);
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&qfnet(&["optimize", missing.to_str().unwrap()])), 3);
    let unwritable: PathBuf = dir.path().join("no/such/dir/out.csv");
    assert_eq!(code(&qfnet(&["decision-table", "--n", "4", "--out", unwritable.to_str().unwrap()])), 3);
}

#[test]
fn infeasible_bounds_exit_4_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "tight.json", &two_party("1e-5", "0.1", "5.0"));
    let out = dir.path().join("o.json");
    let o = qfnet(&["optimize", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    let v = read_json(&out);
    assert_eq!(v["result"]["feasible"], Value::Bool(false));
    assert!(v["result"]["p_e"].as_f64().unwrap() > 1e-5);
}

#[test]
fn vacuous_budget_gives_minimal_amplitudes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "eps1.json", &two_party("1.0", "0.5", "2000"));
    let out = dir.path().join("o.json");
    assert_eq!(code(&qfnet(&["optimize", &path, "--out", out.to_str().unwrap()])), 0);
    let v = read_json(&out);
    for a in v["result"]["per_run"][0]["alphas"].as_array().unwrap() {
        assert_eq!(a.as_f64().unwrap(), 0.5);
    }
    assert_eq!(v["complexity"], Value::Null);
}

#[test]
fn four_party_optimize_is_feasible_and_cheap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.json");
    let o = qfnet(&["optimize", &repo_config("four_party_symmetric.json"), "--target", "r", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v = read_json(&out);
    assert_eq!(v["result"]["per_run"].as_array().unwrap().len(), 3);
    assert!(v["result"]["q_r"].as_f64().unwrap() <= 2.57e6 * 1.05);
    assert_eq!(v["complexity"]["ordering_satisfied"], Value::Bool(true));

    let ae = dir.path().join("ae.json");
    assert_eq!(code(&qfnet(&["optimize", &repo_config("four_party_symmetric.json"), "--target", "ae", "--out", ae.to_str().unwrap()])), 0);
    assert_eq!(read_json(&ae)["result"]["per_run"].as_array().unwrap().len(), 1);
}

#[test]
fn simulate_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "desk.json", &DESK.replace("DARK", "5e-5"));
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = qfnet(&["simulate", &path, "--relationship", "ABCA", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert!(String::from_utf8(o.stderr).unwrap().contains("Wilson interval"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = read_json(&a);
    let (lo, hi) = (v["report"]["wilson_interval"][0].as_f64().unwrap(), v["report"]["wilson_interval"][1].as_f64().unwrap());
    let rate = v["report"]["correct_rate"].as_f64().unwrap();
    assert!(lo <= rate && rate <= hi);
}

#[test]
fn all_equal_without_dark_counts_is_always_correct() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "dark0.json", &DESK.replace("DARK", "0"));
    let out = dir.path().join("s.json");
    assert_eq!(code(&qfnet(&["simulate", &path, "--relationship", "AAAA", "--out", out.to_str().unwrap()])), 0);
    assert_eq!(read_json(&out)["report"]["correct_rate"].as_f64().unwrap(), 1.0);
}

#[test]
fn desk_scale_campaign_meets_budget() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = qfnet(&["simulate", &repo_config("desk_simulation.json"), "--relationship", "AABC", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v = read_json(&out);
    // Correct rate at least 1 - epsilon, up to the interval width.
    assert!(v["report"]["wilson_interval"][1].as_f64().unwrap() >= 1.0 - 1e-3);
}
