mod common;

use std::process::{Command, Output};

use serde_json::Value;

use common::{fixture, fixture_path};
use modstan::syntax::{parse, render};

fn modstan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modstan")).args(args).output().expect("binary runs")
}

fn on_fixture(cmd: &str, file: &str, rest: &[&str]) -> Output {
    let path = fixture_path(file);
    let mut args = vec![cmd, path.to_str().unwrap()];
    args.extend_from_slice(rest);
    modstan(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn check_exit_codes() {
    assert_eq!(on_fixture("check", "mean_stddev.stan", &[]).status.code(), Some(0));

    let o = on_fixture("check", "unfilled_hole.stan", &["--json"]);
    assert_eq!(o.status.code(), Some(1));
    let diags: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diags[0]["code"], "UNFILLED_HOLE");
    assert_eq!(json(&o)["moduleGraph"], Value::Null);

    let o = on_fixture("check", "unfilled_hole.stan", &[]);
    assert!(stderr(&o).contains("UNFILLED_HOLE"), "{}", stderr(&o));

    let o = modstan(&["check", "/nonexistent/model.stan"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn concretize_reproduces_the_listings() {
    let o = on_fixture("concretize", "golf.stan", &["NSuccesses:binomial,PSuccess:logistic"]);
    assert_eq!(o.status.code(), Some(0));
    let want = render(&parse(&fixture("golden/golf_logistic.stan")).unwrap());
    assert_eq!(stdout(&o), want);

    let o = on_fixture("concretize", "mean_stddev.stan", &["Mean:normal,Stddev:lognormal,StddevInformative:yes"]);
    assert!(stdout(&o).contains("sigma ~ lognormal(0, 1);"));
}

#[test]
fn concretize_reports_missing_holes() {
    let o = on_fixture("concretize", "mean_stddev.stan", &["Mean:normal"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Stddev"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());

    let o = on_fixture("concretize", "mean_stddev.stan", &["Mean:normal", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["violations"][0]["kind"], "missing_hole");
    assert_eq!(v["violations"][0]["hole"], "Stddev");
    assert_eq!(v["compatibleModels"].as_array().unwrap().len(), 3);

    let o = on_fixture("concretize", "mean_stddev.stan", &["Mean"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SELECTION_SYNTAX"));
}

#[test]
fn concretize_writes_output_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model.stan");
    let o = on_fixture("concretize", "mean_stddev.stan", &["Mean:standard,Stddev:standard", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("x ~ normal(0, 1);"));

    let o = on_fixture("concretize", "mean_stddev.stan", &["Mean:standard,Stddev:standard", "-o", "/nonexistent/dir/m.stan"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn graph_formats() {
    let o = on_fixture("graph", "mean_stddev.stan", &[]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 6);
    assert_eq!(v["edges"].as_array().unwrap().len(), 9);

    let dot = stdout(&on_fixture("graph", "mean_stddev.stan", &["--format", "dot"]));
    assert!(dot.starts_with("graph models {"));
    assert_eq!(dot.matches(" -- ").count(), 9);

    let o = on_fixture("graph", "birthday.stan", &["--nodes-only"]);
    let v = json(&o);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 120);
    assert!(v["edges"].as_array().unwrap().is_empty());
}

#[test]
fn graph_refuses_above_the_cap() {
    let o = on_fixture("graph", "regression_features.stan", &[]);
    assert_eq!(o.status.code(), Some(1));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["code"], "CAP_EXCEEDED");
    assert_eq!(e["count"]["count"], "2^100");

    let o = on_fixture("graph", "birthday.stan", &["--cap", "50"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn output_is_deterministic() {
    let a = on_fixture("graph", "birthday.stan", &[]);
    let b = on_fixture("graph", "birthday.stan", &[]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn neighbors_of_a_selection() {
    let o = on_fixture("neighbors", "mean_stddev.stan", &["Mean:standard,Stddev:standard"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).lines().collect::<Vec<_>>(),
        [
            "Mean:normal,Stddev:standard",
            "Mean:standard,Stddev:lognormal,StddevInformative:no",
            "Mean:standard,Stddev:lognormal,StddevInformative:yes"
        ]
    );
    let v = json(&on_fixture("neighbors", "mean_stddev.stan", &["Mean:standard,Stddev:standard", "--json"]));
    assert_eq!(v["neighbors"].as_array().unwrap().len(), 3);
    assert_eq!(v["neighbors"][0]["selection"][0]["impl"], "normal");

    let o = on_fixture("neighbors", "regression_interactions.stan", &["Feature:[1],FeaturePair:[],FeatureTriplet:[]"]);
    assert_eq!(stdout(&o).lines().count(), 166_750);
}

#[test]
fn module_graph_formats() {
    let v = json(&on_fixture("module-graph", "golf.stan", &[]));
    let text = v.to_string();
    assert!(text.contains("NSuccesses") && text.contains("PSuccess"));
    let dot = stdout(&on_fixture("module-graph", "golf.stan", &["--format", "dot"]));
    assert!(dot.contains("angle_success"));
}

#[test]
fn count_reports_collections() {
    let v = json(&on_fixture("count", "regression_interactions.stan", &[]));
    assert_eq!(v["models"]["count"], "2^166750");
    let total: u64 = v["collections"].as_object().unwrap().values().map(|n| n.as_u64().unwrap()).sum();
    assert_eq!(total, 166_750);
}

#[test]
fn search_with_the_parameter_count() {
    let o = on_fixture("search", "mean_stddev.stan", &["--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["result"]["score"], 2.0);
    assert_eq!(v["path"][0], "Mean:normal,Stddev:lognormal,StddevInformative:no");
    assert_eq!(v["evaluations"], v["visited"].as_array().unwrap().len());
}

#[test]
fn search_with_a_scoring_command() {
    let o = on_fixture(
        "search",
        "mean_stddev.stan",
        &["--start", "Mean:standard,Stddev:standard", "--scorer-cmd", "echo 1", "--json"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["result"]["selection"], "Mean:standard,Stddev:standard");
    assert_eq!(v["evaluations"], 4);

    // Scores the negated line count, so the shortest program wins.
    let o = on_fixture(
        "search",
        "mean_stddev.stan",
        &["--start", "Mean:normal,Stddev:lognormal,StddevInformative:yes", "--scorer-cmd", "sh -c 'echo -$(wc -l < {file})'", "--json"],
    );
    let v = json(&o);
    assert_eq!(v["result"]["selection"], "Mean:standard,Stddev:standard", "{v}");

    let o = on_fixture("search", "mean_stddev.stan", &["--scorer-cmd", "false"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("search stopped"));

    let o = on_fixture("search", "mean_stddev.stan", &["--scorer-cmd", "sh -c 'sleep 5; echo 1' {file}", "--timeout", "0.2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("timed out"), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    assert_eq!(modstan(&["graph"]).status.code(), Some(2));
    assert_eq!(modstan(&["frobnicate"]).status.code(), Some(2));
    let o = on_fixture("graph", "mean_stddev.stan", &["--format", "svg"]);
    assert_eq!(o.status.code(), Some(2));
}
