//! HTTP API over one compiled program.
//!
//! The compiled program is shared immutable state; `POST /compile` swaps in a
//! new one only when it compiles.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

use crate::api::{self, Annotation, Annotations, CompileRequest, SelectionRequest};
use crate::compile::{Compiled, QueryError};

pub struct AppState {
    compiled: RwLock<Option<Arc<Compiled>>>,
    annotations: PathBuf,
    /// Serializes annotation read-modify-write cycles.
    annotations_lock: Mutex<()>,
    cap: usize,
}

impl AppState {
    pub fn new(compiled: Option<Compiled>, annotations: PathBuf, cap: usize) -> AppState {
        AppState {
            compiled: RwLock::new(compiled.map(Arc::new)),
            annotations,
            annotations_lock: Mutex::new(()),
            cap,
        }
    }

    #[allow(clippy::result_large_err)]
    fn current(&self) -> Result<Arc<Compiled>, Response> {
        self.compiled.read().expect("state lock").clone().ok_or_else(|| {
            error(
                StatusCode::NOT_FOUND,
                json!({"code": "NO_PROGRAM", "message": "no program has been compiled"}),
            )
        })
    }
}

/// The same bytes the command line prints.
fn body<T: Serialize>(status: StatusCode, v: &T) -> Response {
    (status, [("content-type", "application/json")], api::to_json(v)).into_response()
}

fn error(status: StatusCode, v: serde_json::Value) -> Response {
    body(status, &v)
}

fn query_error(e: &QueryError) -> Response {
    let status = match e {
        QueryError::TooLarge { .. } => StatusCode::NOT_FOUND,
        _ => StatusCode::BAD_REQUEST,
    };
    body(status, e)
}

fn io_error(e: std::io::Error) -> Response {
    error(
        StatusCode::INTERNAL_SERVER_ERROR,
        json!({"code": "IO_ERROR", "message": e.to_string()}),
    )
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/compile", post(compile))
        .route("/model-graph", get(model_graph))
        .route("/concretize", post(concretize))
        .route("/neighbors", post(neighbors))
        .route("/annotations", get(get_annotations).put(put_annotations))
        .route("/annotations/{id}", get(get_annotation).put(put_annotation))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn compile(State(st): State<Arc<AppState>>, Json(req): Json<CompileRequest>) -> Response {
    let cap = st.cap;
    let (compiled, resp) = tokio::task::spawn_blocking(move || api::compile_response(&req.source, cap))
        .await
        .expect("compile task");
    match compiled {
        Some(c) => {
            *st.compiled.write().expect("state lock") = Some(Arc::new(c));
            body(StatusCode::OK, &resp)
        }
        None => body(StatusCode::BAD_REQUEST, &resp),
    }
}

async fn model_graph(State(st): State<Arc<AppState>>) -> Response {
    let c = match st.current() {
        Ok(c) => c,
        Err(r) => return r,
    };
    let cap = st.cap;
    match tokio::task::spawn_blocking(move || api::graph_response(&c, false, cap)).await.expect("graph task") {
        Ok(g) => body(StatusCode::OK, &g),
        Err(e) => query_error(&e),
    }
}

async fn concretize(State(st): State<Arc<AppState>>, Json(req): Json<SelectionRequest>) -> Response {
    let c = match st.current() {
        Ok(c) => c,
        Err(r) => return r,
    };
    let cap = st.cap;
    match tokio::task::spawn_blocking(move || api::concretize_response(&c, &req.selection, cap))
        .await
        .expect("concretize task")
    {
        Ok(r) => body(StatusCode::OK, &r),
        Err(e) => query_error(&e),
    }
}

async fn neighbors(State(st): State<Arc<AppState>>, Json(req): Json<SelectionRequest>) -> Response {
    let c = match st.current() {
        Ok(c) => c,
        Err(r) => return r,
    };
    match tokio::task::spawn_blocking(move || api::neighbors_response(&c, &req.selection))
        .await
        .expect("neighbors task")
    {
        Ok(r) => body(StatusCode::OK, &r),
        Err(e) => query_error(&e),
    }
}

async fn get_annotations(State(st): State<Arc<AppState>>) -> Response {
    let _guard = st.annotations_lock.lock().await;
    match Annotations::load(&st.annotations) {
        Ok(a) => body(StatusCode::OK, &a),
        Err(e) => io_error(e),
    }
}

async fn put_annotations(State(st): State<Arc<AppState>>, Json(a): Json<Annotations>) -> Response {
    let _guard = st.annotations_lock.lock().await;
    match a.save(&st.annotations) {
        Ok(()) => body(StatusCode::OK, &a),
        Err(e) => io_error(e),
    }
}

async fn get_annotation(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let _guard = st.annotations_lock.lock().await;
    match Annotations::load(&st.annotations) {
        Ok(a) => match a.models.get(&id) {
            Some(m) => body(StatusCode::OK, m),
            None => error(
                StatusCode::NOT_FOUND,
                json!({"code": "NOT_FOUND", "message": format!("no annotation for `{id}`")}),
            ),
        },
        Err(e) => io_error(e),
    }
}

async fn put_annotation(State(st): State<Arc<AppState>>, Path(id): Path<String>, Json(m): Json<Annotation>) -> Response {
    let _guard = st.annotations_lock.lock().await;
    let mut a = match Annotations::load(&st.annotations) {
        Ok(a) => a,
        Err(e) => return io_error(e),
    };
    a.models.insert(id, m.clone());
    match a.save(&st.annotations) {
        Ok(()) => body(StatusCode::OK, &m),
        Err(e) => io_error(e),
    }
}
