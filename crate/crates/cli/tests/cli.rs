use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn tsar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsar"))
        .args(args)
        .output()
        .unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn reports_carry_tool_version_and_config() {
    let out = tsar(&[
        "reverse",
        "--net",
        &fixture("f1.json"),
        "--from",
        "A",
        "--to",
        "O",
    ]);
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["tool"], "tsar");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["subcommand"], "reverse");
    assert_eq!(r["config"]["from"], "A");
    assert_eq!(r["stats"]["o_leaves"], 13);
    assert_eq!(r["cpt_sizes"]["A"], 30);
}

#[test]
fn tabular_reversal_reports_full_tables() {
    let out = tsar(&[
        "reverse",
        "--net",
        &fixture("f1.json"),
        "--from",
        "A",
        "--to",
        "O",
        "--tabular",
    ]);
    assert!(out.status.success());
    let r = report(&out);
    assert_eq!(r["method"], "tabular");
    // O gains A's four parents: 7 binary parents in all.
    assert_eq!(r["cpt_sizes"]["O"], 128);
}

#[test]
fn reversed_network_verifies_against_the_original() {
    let dir = tempfile::tempdir().unwrap();
    let reversed = dir.path().join("reversed.json");
    let csv = dir.path().join("stats.csv");
    let out = tsar(&[
        "reverse",
        "--net",
        &fixture("f1.json"),
        "--from",
        "A",
        "--to",
        "O",
        "--net-out",
        path_str(&reversed),
        "--csv",
        path_str(&csv),
    ]);
    assert!(out.status.success());
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("statistic,value\n"));
    assert!(table.contains("eq2_evals,20"));

    let verify = dir.path().join("verify.json");
    let out = tsar(&[
        "verify",
        "--net",
        path_str(&reversed),
        "--against",
        &fixture("f1.json"),
        "--out",
        path_str(&verify),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&verify).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    assert!(r["joint"]["max_deviation"].as_f64().unwrap() < 1e-9);
    assert!(r["csi"]["A"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn failed_verification_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("f1.json")).unwrap();
    let mut doc: Value = serde_json::from_str(&text).unwrap();
    let cpts = doc["cpts"].as_array_mut().unwrap();
    let root = cpts.iter_mut().find(|c| c["child"] == "D").unwrap();
    root["tree"] = serde_json::json!({"leaf": [0.5, 0.5]});
    let altered = dir.path().join("altered.json");
    std::fs::write(&altered, doc.to_string()).unwrap();
    let out = tsar(&[
        "verify",
        "--net",
        path_str(&altered),
        "--against",
        &fixture("f1.json"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out)["passed"], false);
    assert_eq!(error_record(&out)["error"]["kind"], "verification");
}

#[test]
fn integrate_writes_a_loadable_schema() {
    let dir = tempfile::tempdir().unwrap();
    let integrated = dir.path().join("integrated.dpn.json");
    let out = tsar(&[
        "integrate",
        "--dpn",
        &fixture("f2.dpn.json"),
        "--net-out",
        path_str(&integrated),
    ]);
    assert!(out.status.success());
    let r = report(&out);
    let transition = r["steps"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["net"] == "transition")
        .count();
    assert_eq!(transition, 4);
    let schema = tsar::io::parse_dpn_file(&integrated).unwrap();
    assert!(schema.in_slice_parents("O").is_empty());
}

#[test]
fn schedule_names_the_guard_on_f() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("schedule.csv");
    let out = tsar(&[
        "schedule",
        "--dpn",
        &fixture("f2.dpn.json"),
        "--interest",
        "A",
        "--csv",
        path_str(&csv),
    ]);
    assert!(out.status.success());
    let r = report(&out);
    let transition = r["schedule"]["transition"].as_array().unwrap();
    let f = transition.iter().find(|e| e["variable"] == "F").unwrap();
    assert_eq!(f["guard"], "C=true & E=true | D=true & E=true");
    assert_eq!(transition[0]["variable"], "O");
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.lines().any(|l| l.starts_with("transition,6,F,")));
}

#[test]
fn simulate_and_exact_agree_on_the_fixture() {
    // The exact oracle enumerates: three slices keep the joint small.
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev.csv");
    std::fs::write(&ev, "time,variable,value\n1,O,true\n2,O,false\n3,O,true\n").unwrap();
    let dpn = fixture("f2.dpn.json");
    let common = [
        "--dpn",
        &dpn,
        "--evidence",
        path_str(&ev),
        "--horizon",
        "3",
        "--query",
        "A@3",
    ];
    let mut sim = vec!["simulate", "--trials", "50000", "--seed", "5"];
    sim.extend(common);
    let out = tsar(&sim);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = report(&out);
    let mut exact = vec!["exact"];
    exact.extend(common);
    let out = tsar(&exact);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let e = report(&out);
    let p = s["estimate"]["distribution"]["true"].as_f64().unwrap();
    let se = s["estimate"]["standard_errors"]["true"].as_f64().unwrap();
    let q = e["distribution"]["true"].as_f64().unwrap();
    assert!((p - q).abs() < 4.0 * se, "{p} vs {q} (se {se})");
    assert!(s["skip_rates"]["F"].as_f64().unwrap() > 0.0);
    assert_eq!(s["skip_rates"]["A"], 0.0);
}

#[test]
fn thread_count_does_not_change_the_report() {
    let base = [
        "simulate",
        "--dpn",
        &fixture("f2.dpn.json"),
        "--evidence",
        &fixture("f2.evidence.csv"),
        "--horizon",
        "4",
        "--trials",
        "3000",
        "--seed",
        "9",
        "--query",
        "B@2",
    ]
    .map(String::from);
    let run = |extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend(extra.iter().map(|s| s.to_string()));
        Command::new(env!("CARGO_BIN_EXE_tsar"))
            .args(&args)
            .output()
            .unwrap()
            .stdout
    };
    let one = run(&["--threads", "1"]);
    assert_eq!(one, run(&["--threads", "4"]));
    assert_eq!(one, run(&[]));
}

#[test]
fn flat_networks_answer_exact_queries() {
    let out = tsar(&[
        "exact",
        "--net",
        &fixture("f1.json"),
        "--query",
        "A",
        "--given",
        "O=true,D=false",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&out);
    let t = r["distribution"]["true"].as_f64().unwrap();
    let f = r["distribution"]["false"].as_f64().unwrap();
    assert!((t + f - 1.0).abs() < 1e-9);
    assert_eq!(r["evidence"]["O"], "true");
}

#[test]
fn exit_statuses_follow_the_error_kind() {
    let out = tsar(&["reverse", "--net", &fixture("f1.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"]["exit_code"], 1);

    let out = tsar(&[
        "reverse",
        "--net",
        "/nonexistent.json",
        "--from",
        "A",
        "--to",
        "O",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["kind"], "io");

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"variables\": [").unwrap();
    let out = tsar(&[
        "reverse",
        "--net",
        path_str(&broken),
        "--from",
        "A",
        "--to",
        "O",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["kind"], "syntax");

    let out = tsar(&[
        "reverse",
        "--net",
        &fixture("f1.json"),
        "--from",
        "O",
        "--to",
        "A",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = tsar(&[
        "exact",
        "--dpn",
        &fixture("f2.dpn.json"),
        "--horizon",
        "6",
        "--query",
        "A@6",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_record(&out)["error"]["kind"], "too_large");

    let out = tsar(&[
        "simulate",
        "--dpn",
        &fixture("f2.dpn.json"),
        "--horizon",
        "2",
        "--trials",
        "10",
        "--seed",
        "1",
        "--query",
        "A@3",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = tsar(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
}

#[test]
fn simulate_requires_a_seed() {
    let out = tsar(&[
        "simulate",
        "--dpn",
        &fixture("f2.dpn.json"),
        "--horizon",
        "2",
        "--trials",
        "10",
        "--query",
        "A@1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn text_reports_list_one_value_per_line() {
    let out = tsar(&[
        "reverse",
        "--net",
        &fixture("f1.json"),
        "--from",
        "A",
        "--to",
        "O",
        "--format",
        "text",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "stats.eq1_evals: 10"));
    assert!(text.lines().any(|l| l == "config.output.format: text"));
    assert!(text.lines().any(|l| l == "tool: tsar"));
}
