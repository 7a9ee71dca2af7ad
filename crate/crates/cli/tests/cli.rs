use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_surjdisp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn cyclic_clip_demo_fails_on_one_face() {
    let out = run(&["--demo", "cyclic-clip n=3 K={1} L={2}"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["schema"], "surjdisp.report.v1");
    assert_eq!(r["verdict"], "NotSurjective");
    let faces = r["witness"]["faces"].as_array().unwrap();
    assert_eq!(faces.len(), 1);
    assert_eq!(faces[0]["name"], "sup[I={1},J={2}]");
    assert_eq!(r["limit_count"], 26);
    assert_eq!(r["limit_table"].as_array().unwrap().len(), 26);
}

#[test]
fn shrink_sqrt_demo_is_surjective() {
    let out = run(&["--demo", "shrink-sqrt"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["verdict"], "Surjective");
    let out = run(&["--demo", "shrink-sqrt", "--method", "recession"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["verdict"], "SufficientOnly");
}

#[test]
fn subtopical_half_map_uses_fourteen_limits() {
    let path = scratch("half.json");
    fs::write(
        &path,
        r#"{
  "schema": "surjdisp.problem.v1",
  "map": {"op": "convex_combination", "weight": "1/2",
          "first": {"op": "identity", "dim": 3},
          "second": {"op": "constant", "value": [0, 0, 0]}},
  "query": {"kind": "subtopical"}
}"#,
    )
    .unwrap();
    let out = run(&[path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["verdict"], "Surjective");
    assert_eq!(r["limit_count"], 14);
    assert_eq!(r["limit_table"].as_array().unwrap().len(), 14);
}

#[test]
fn subtopical_min_clip_demo() {
    let out = run(&["--demo", "subtopical-min-clip", "--verify"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["witness"]["kind"], "subset_limit");
    assert_eq!(r["witness"]["sign"], "minus");
    assert_eq!(r["oracle"]["consistent"], true);
}

#[test]
fn reports_are_deterministic() {
    let a = run(&["--demo", "cyclic-clip n=3 K={1,3} L={2}", "--verify", "--seed", "7"]);
    let b = run(&["--demo", "cyclic-clip n=3 K={1,3} L={2}", "--verify", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(1));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn emitted_problem_round_trips() {
    let emitted = run(&["--demo", "midpoint n=2", "--emit-problem"]);
    assert_eq!(emitted.status.code(), Some(0));
    let path = scratch("midpoint.json");
    fs::write(&path, &emitted.stdout).unwrap();
    let from_file = run(&[path.to_str().unwrap(), "--verify"]);
    let from_demo = run(&["--demo", "midpoint n=2", "--verify"]);
    assert_eq!(from_file.status.code(), Some(1));
    assert_eq!(from_file.stdout, from_demo.stdout);
    let r = report(&from_file);
    assert_eq!(r["verdict"], "NotUnique");
    assert!(r["oracle"]["fixed_points"].as_array().unwrap().len() >= 2);
}

#[test]
fn parse_errors_carry_position() {
    let path = scratch("bad.json");
    fs::write(&path, "{\n  \"schema\": \"surjdisp.problem.v1\",\n  \"map\": {\"op\": \"identity\", \"dim\": 2, \"oops\": 1},\n  \"query\": {\"kind\": \"surjective\"}\n}").unwrap();
    let out = run(&[path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn precondition_failure_reports_residual() {
    let path = scratch("notfixed.json");
    fs::write(
        &path,
        r#"{"schema": "surjdisp.problem.v1",
            "map": {"op": "constant", "value": [1, 2]},
            "query": {"kind": "unique", "u": [0, 0]}}"#,
    )
    .unwrap();
    let out = run(&[path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("residual"));
}

#[test]
fn graph_export_and_topical_methods() {
    let path = scratch("swap.json");
    fs::write(
        &path,
        r#"{"schema": "surjdisp.problem.v1",
            "map": {"op": "max_plus", "matrix": [["bot", 0], [0, "bot"]]},
            "query": {"kind": "topical", "method": "convex"}}"#,
    )
    .unwrap();
    let dot = scratch("swap.dot");
    let out = run(&[path.to_str().unwrap(), "--export-graph", dot.to_str().unwrap(), "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("digraph") && text.contains("n1 -> n2") && text.contains("n2 -> n1"));
    assert_eq!(report(&out)["oracle"]["consistent"], true);
    for m in ["hypergraph", "hypergraph_reach", "strongly_connected_sufficient"] {
        let out = run(&[path.to_str().unwrap(), "--method", m]);
        assert_eq!(out.status.code(), Some(0), "{m}");
    }
}

#[test]
fn output_flag_and_usage_errors() {
    let path = scratch("report.json");
    let out = run(&["--demo", "shrink-sqrt", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["thresholds"]["max_doublings"], 60);
    assert_eq!(run(&["--demo", "no-such-demo"]).status.code(), Some(3));
    assert_eq!(run(&["--no-such-flag"]).status.code(), Some(3));
    let out = run(&["--demo", "shrink-sqrt", "--tmax", "40", "--tol", "1e-6"]);
    assert_eq!(report(&out)["thresholds"]["max_doublings"], 40);
}
