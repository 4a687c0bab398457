use std::io::Write;
use std::process::Command;

use blockgame_cli::report::{
    flatten, from_json, pairs_from_csv, pairs_to_csv, sweep_from_csv, sweep_to_csv, to_json, SWEEP_HEADER,
};
use blockgame_cli::{run, Outcome};
use proptest::prelude::*;
use serde_json::Value;

const LAMBDA: &str = "0.5,0.2,0.3";

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn blockgame(args: &str) -> Outcome {
    run(std::iter::once("blockgame").chain(args.split_whitespace()))
}

fn ok_json(args: &str) -> Value {
    let out = blockgame(args);
    assert_eq!(out.code, 0, "{args}: {}", out.stderr);
    serde_json::from_str(&out.stdout).unwrap()
}

fn config(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

#[test]
fn probability_fixture() {
    let v = ok_json(&format!("comg prob --lambda {LAMBDA} --f1 1 --f2 10 --T 2"));
    assert_eq!(v["result"]["p"], "17/20");
    assert_eq!(v["result"]["p_f64"], 0.85);
    assert_eq!(v["command"], "comg prob");
    assert_eq!(v["provenance"]["inputs"]["T"], "2");
}

#[test]
fn crab_safety_fixture() {
    let v = ok_json("crab safety --lambda 0,0.5,0.5 --c 0.6 --v 1 --T 1");
    assert_eq!(v["result"]["safe"], true);
}

#[test]
fn htlc_zero_timelock_fixture() {
    let v = ok_json(&format!("htlc analyze --lambda {LAMBDA} --T 0 --v 10 --v-a 5 --v-b 5"));
    assert_eq!(v["result"]["verdict"]["holds"], false);
    assert_eq!(v["result"]["indifference"], true);
}

#[test]
fn case_study_commands() {
    let v = ok_json(&format!("two-htlc check --lambda {LAMBDA} --t1 3 --t2 5 --grid 2"));
    assert_eq!(v["result"]["condition"], false);
    assert_eq!(v["result"]["deviation_found"], true);
    let v = ok_json(&format!("wormhole check --lambda {LAMBDA} --v2 1.1 --v3 1"));
    assert_eq!(v["result"]["gain"], "1/10");
    let v = ok_json(&format!("mev solve --lambda {LAMBDA} --s 5 --f 1 --trusted 1"));
    assert_eq!(v["result"]["share_set"], serde_json::json!([1]));
    assert_eq!(v["result"]["user_utility"], "5");
    let v = ok_json("crab game --lambda 0,0.5,0.5 --T 1 --c 0.3 --v 1 --bribe-steps 10");
    assert_eq!(v["result"]["cheat_found"], true);
    assert_eq!(v["result"]["consistent"], true);
    let v = ok_json(&format!("comg min-timelock --lambda {LAMBDA} --f1 1 --f2 10"));
    assert_eq!(v["result"]["min_timelock"], 3);
    let v = ok_json(&format!("comg oracle --lambda {LAMBDA} --f1 1 --f2 10 --T 4"));
    assert_eq!(v["result"]["matches_schedule"], true);
    let v = ok_json(&format!("comg schedule --lambda {LAMBDA} --f1 1 --f2 10 --T 4"));
    assert_eq!(v["result"]["max_depth"], 2);
}

#[test]
fn check_ic_documents() {
    let v = ok_json(&format!("compose check-ic --game {}", fixture("trade_ic.json")));
    assert_eq!(v["result"]["holds"], true);
    let v = ok_json(&format!("compose check-ic --game {}", fixture("trade_not_ic.json")));
    assert_eq!(v["result"]["holds"], false);
    assert_eq!(v["result"]["witness"]["kind"], "strict_gain");
    assert!(!v["result"]["per_eta"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    assert_eq!(blockgame("comg nope").code, 1);
    assert_eq!(blockgame(&format!("comg prob --lambda {LAMBDA} --f1 x --f2 10 --T 2")).code, 1);
    assert_eq!(blockgame(&format!("comg prob --lambda {LAMBDA} --f1 10 --f2 1 --T 2")).code, 2);
    assert_eq!(blockgame("comg prob --lambda 0.5,0.6 --f1 1 --f2 10 --T 2").code, 2);
    assert_eq!(blockgame(&format!("comg oracle --lambda {LAMBDA} --f1 1 --f2 10 --T 40")).code, 3);
    assert_eq!(blockgame(&format!("comg prob --lambda {LAMBDA} --f1 1 --T 2")).code, 4);
    let bad = config("{\"f1\": ");
    assert_eq!(blockgame(&format!("comg prob --config {}", bad.path().display())).code, 5);
    let unknown = config("{\"colour\": 1}");
    assert_eq!(blockgame(&format!("comg prob --config {}", unknown.path().display())).code, 5);
    let bad_value = config("{\"f1\": \"one\"}");
    assert_eq!(blockgame(&format!("comg prob --config {} --lambda {LAMBDA} --f2 10 --T 2", bad_value.path().display())).code, 5);
    assert_eq!(blockgame("--help").code, 0);
}

#[test]
fn flags_override_config() {
    let cfg = config(r#"{"lambda": [0.5, 0.2, 0.3], "f1": 1, "f2": "10", "T": 1, "seed": 9}"#);
    let v = ok_json(&format!("comg prob --config {} --T 2", cfg.path().display()));
    assert_eq!(v["result"]["p"], "17/20");
    assert_eq!(v["provenance"]["seed"], 9);
    let v = ok_json(&format!("comg prob --config {} --seed 3", cfg.path().display()));
    assert_eq!(v["result"]["p"], "1/2");
    assert_eq!(v["provenance"]["seed"], 3);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let cmd = format!("comg sweep --lambda {LAMBDA} --f1 1 --f2 10 --t-max 4 --trials 2000 --seed 11");
    assert_eq!(blockgame(&cmd).stdout, blockgame(&cmd).stdout);
    let other = format!("comg sweep --lambda {LAMBDA} --f1 1 --f2 10 --t-max 4 --trials 2000 --seed 12");
    assert_ne!(blockgame(&cmd).stdout, blockgame(&other).stdout);
}

#[test]
fn json_keys_are_sorted() {
    let out = blockgame(&format!("comg schedule --lambda {LAMBDA} --f1 1 --f2 10"));
    let v: Value = serde_json::from_str(&out.stdout).unwrap();
    let keys: Vec<&String> = v["result"].as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    let pos = |k: &str| out.stdout.find(k).unwrap();
    assert!(pos("\"command\"") < pos("\"provenance\"") && pos("\"provenance\"") < pos("\"result\""));
}

#[test]
fn sweep_csv_round_trip() {
    let out = blockgame(&format!("comg sweep --lambda {LAMBDA} --f1 1 --f2 10 --t-max 5 --trials 500 --seed 1 --format csv"));
    assert_eq!(out.code, 0);
    assert!(out.stdout.starts_with(&(SWEEP_HEADER.join(",") + "\n")));
    assert!(!out.stdout.contains('\r'));
    let rows = sweep_from_csv(&out.stdout).unwrap();
    assert_eq!(rows.len(), 6);
    let report = from_json(&blockgame(&format!("comg sweep --lambda {LAMBDA} --f1 1 --f2 10 --t-max 5 --trials 500 --seed 1")).stdout).unwrap();
    assert_eq!(report.rows.as_ref().unwrap(), &rows);
    assert_eq!(sweep_to_csv(&rows), out.stdout);
}

#[test]
fn empty_sweep_is_header_only() {
    let out = blockgame(&format!("comg sweep --lambda {LAMBDA} --f1 1 --f2 10 --t-min 3 --t-max 2 --format csv"));
    assert_eq!(out.stdout, SWEEP_HEADER.join(",") + "\n");
    assert!(sweep_from_csv(&out.stdout).unwrap().is_empty());
}

#[test]
fn oracle_bound_leaves_column_empty() {
    let out = blockgame(&format!("comg sweep --lambda {LAMBDA} --f1 1 --f2 10 --t-min 33 --t-max 33 --trials 10 --format csv"));
    let rows = sweep_from_csv(&out.stdout).unwrap();
    assert_eq!(rows[0].p_oracle, None);
    assert_eq!(rows[0].p_analytic, 1.0);
}

#[test]
fn reports_round_trip() {
    let commands = [
        format!("comg prob --lambda {LAMBDA} --f1 1 --f2 10 --T 2"),
        format!("comg schedule --lambda {LAMBDA} --f1 1 --f2 10 --T 3 --ties censor"),
        format!("comg simulate --lambda {LAMBDA} --f1 1 --f2 10 --T 2 --trials 1000 --seed 5"),
        format!("htlc analyze --lambda {LAMBDA} --T 1 --v 10 --grid 2 --plan-bound 0"),
        format!("wormhole check --lambda {LAMBDA} --v2 1.1 --v3 1"),
        format!("mev solve --lambda {LAMBDA} --s 1 --f 1"),
        format!("compose check-ic --game {}", fixture("trade_not_ic.json")),
    ];
    for cmd in commands {
        let json = blockgame(&cmd).stdout;
        let report = from_json(&json).unwrap();
        assert_eq!(to_json(&report), json, "{cmd}");
        let csv = blockgame(&format!("{cmd} --format csv")).stdout;
        assert_eq!(pairs_from_csv(&csv).unwrap(), flatten(&report), "{cmd}");
        let text = blockgame(&format!("{cmd} --format text")).stdout;
        assert_eq!(text.lines().count(), flatten(&report).len(), "{cmd}");
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_blockgame");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let ok = status(&["comg", "prob", "--lambda", LAMBDA, "--f1", "1", "--f2", "10", "--T", "2"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("17/20"));
    assert_eq!(status(&["comg", "prob", "--lambda", LAMBDA, "--f1", "10", "--f2", "1", "--T", "2"]).status.code(), Some(2));
    assert_eq!(status(&["bogus"]).status.code(), Some(1));
    assert_eq!(status(&["comg", "prob", "--lambda", LAMBDA]).status.code(), Some(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn csv_pairs_round_trip(pairs in proptest::collection::vec(("[a-z.,\"]{1,8}", "[ -~]{0,12}"), 0..8)) {
        prop_assert_eq!(pairs_from_csv(&pairs_to_csv(&pairs)).unwrap(), pairs);
    }
}
