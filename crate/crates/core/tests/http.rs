mod common;

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{fixture, fixture_path};
use modstan::compile::{compile, DEFAULT_CAP};
use modstan::service::{router, AppState};

struct Server {
    app: Router,
    annotations: PathBuf,
    _dir: tempfile::TempDir,
}

fn server(file: Option<&str>) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let annotations = dir.path().join("model.annotations.json");
    let compiled = file.map(|f| compile(&fixture(f)).unwrap());
    let state = Arc::new(AppState::new(compiled, annotations.clone(), DEFAULT_CAP));
    Server {
        app: router(state),
        annotations,
        _dir: dir,
    }
}

impl Server {
    async fn send(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn json(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, text) = self.send(method, uri, body).await;
        (status, serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}")))
    }
}

fn cli(args: &[&str]) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_modstan")).args(args).output().unwrap();
    String::from_utf8(o.stdout).unwrap()
}

#[tokio::test]
async fn model_graph_of_the_mean_stddev_example() {
    let s = server(Some("mean_stddev.stan"));
    let (status, body) = s.send(Method::GET, "/model-graph", None).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 6);
    assert_eq!(v["edges"].as_array().unwrap().len(), 9);

    let path = fixture_path("mean_stddev.stan");
    assert_eq!(body, cli(&["graph", path.to_str().unwrap()]));
}

#[tokio::test]
async fn partial_selections_list_compatible_models() {
    let s = server(Some("mean_stddev.stan"));
    let (status, v) = s.json(Method::POST, "/concretize", Some(json!({"selection": "Mean:normal"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["program"], Value::Null);
    assert_eq!(v["violations"][0]["hole"], "Stddev");
    let compatible: Vec<&str> = v["compatibleModels"].as_array().unwrap().iter().map(|m| m.as_str().unwrap()).collect();
    assert_eq!(compatible.len(), 3);
    assert!(compatible.iter().all(|m| m.starts_with("Mean:normal,")));

    let full = "Mean:normal,Stddev:lognormal,StddevInformative:yes";
    let (status, body) = s.send(Method::POST, "/concretize", Some(json!({"selection": full}))).await;
    assert_eq!(status, StatusCode::OK);
    let path = fixture_path("mean_stddev.stan");
    assert_eq!(body, cli(&["concretize", path.to_str().unwrap(), full, "--json"]));
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!(v["program"].as_str().unwrap().contains("sigma ~ lognormal(0, 1);"));
    assert_eq!(v["compatibleModels"], json!([full]));
}

#[tokio::test]
async fn bad_selections_are_rejected() {
    let s = server(Some("mean_stddev.stan"));
    let (status, v) = s.json(Method::POST, "/concretize", Some(json!({"selection": "Mean"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "SELECTION_SYNTAX");
    let (status, v) = s.json(Method::POST, "/neighbors", Some(json!({"selection": "Mean:normal"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "INVALID_SELECTION");
    let (status, _) = s.send(Method::POST, "/neighbors", Some(json!({"wrong": 1}))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn neighbours_match_the_command_line() {
    let s = server(Some("mean_stddev.stan"));
    let sel = "Mean:standard,Stddev:standard";
    let (status, body) = s.send(Method::POST, "/neighbors", Some(json!({ "selection": sel }))).await;
    assert_eq!(status, StatusCode::OK);
    let path = fixture_path("mean_stddev.stan");
    assert_eq!(body, cli(&["neighbors", path.to_str().unwrap(), sel, "--json"]));
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["neighbors"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn compile_swaps_the_program() {
    let s = server(None);
    let (status, v) = s.json(Method::GET, "/model-graph", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "NO_PROGRAM");

    let (status, v) = s.json(Method::POST, "/compile", Some(json!({"source": "model { x ~ normal(0, 1) }"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["diagnostics"][0]["code"], "SYNTAX_ERROR");
    assert_eq!(v["moduleGraph"], Value::Null);

    let (status, body) = s.send(Method::POST, "/compile", Some(json!({"source": fixture("golf.stan")}))).await;
    assert_eq!(status, StatusCode::OK);
    let path = fixture_path("golf.stan");
    assert_eq!(body, cli(&["check", path.to_str().unwrap(), "--json"]));
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!(v["diagnostics"].as_array().unwrap().is_empty());
    assert!(v["moduleGraph"].to_string().contains("PSuccess"));

    let (_, v) = s.json(Method::GET, "/model-graph", None).await;
    assert_eq!(v["nodes"].as_array().unwrap().len(), 6);

    // A failed compile keeps the previous program.
    s.send(Method::POST, "/compile", Some(json!({"source": "model {"}))).await;
    let (status, _) = s.send(Method::GET, "/model-graph", None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn huge_graphs_are_refused_with_a_count() {
    let s = server(Some("regression_interactions.stan"));
    let (status, v) = s.json(Method::GET, "/model-graph", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "CAP_EXCEEDED");
    assert_eq!(v["count"]["count"], "2^166750");

    let sel = "Feature:[1,2],FeaturePair:[],FeatureTriplet:[]";
    let (status, v) = s.json(Method::POST, "/concretize", Some(json!({ "selection": sel }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["compatibleModels"], Value::Null);
    assert!(v["program"].as_str().is_some());
    let (status, v) = s.json(Method::POST, "/neighbors", Some(json!({ "selection": sel }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["neighbors"].as_array().unwrap().len(), 166_750);
}

#[tokio::test]
async fn annotations_round_trip() {
    let s = server(Some("golf.stan"));
    let (status, v) = s.json(Method::GET, "/annotations", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!({"models": {}}));

    let id = "NSuccesses:binomial,PSuccess:logistic";
    let note = json!({"label": "model 1", "notes": "poor fit"});
    let (status, _) = s.json(Method::PUT, &format!("/annotations/{id}"), Some(note.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = s.json(Method::GET, &format!("/annotations/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, note);
    let on_disk: Value = serde_json::from_str(&std::fs::read_to_string(&s.annotations).unwrap()).unwrap();
    assert_eq!(on_disk["models"][id], note);

    let (status, v) = s.json(Method::GET, "/annotations/NSuccesses:binomial,PSuccess:angle_success", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "NOT_FOUND");

    let all: Value = serde_json::from_str(&fixture("golf.annotations.json")).unwrap();
    let (status, _) = s.json(Method::PUT, "/annotations", Some(all.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let (_, v) = s.json(Method::GET, "/annotations", None).await;
    assert_eq!(v, all);
    let (status, _) = s.send(Method::PUT, "/annotations", Some(json!({"models": 3}))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn cors_allows_other_origins() {
    let s = server(Some("mean_stddev.stan"));
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/concretize")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = s.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}
