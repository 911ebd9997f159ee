//! Request and response bodies shared by the command line and the HTTP
//! service, so both print the same JSON for the same query.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checks::{Diagnostic, Signatures};
use crate::compile::{compile, Compiled, QueryError};
use crate::graph::{bindings_json, BindingJson, GraphJson};
use crate::macros::ModelCount;
use crate::program::{canonical, ModuleGraph, Violation};

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("response types serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Deserialize)]
pub struct CompileRequest {
    pub source: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SelectionRequest {
    pub selection: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CompileResponse {
    pub module_graph: Option<ModuleGraph>,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signatures: Option<Signatures>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_count: Option<ModelCount>,
    /// Member counts of collection holes.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub collections: BTreeMap<String, u64>,
}

pub fn compile_response(src: &str, cap: usize) -> (Option<Compiled>, CompileResponse) {
    match compile(src) {
        Ok(c) => {
            let resp = CompileResponse {
                module_graph: Some(c.module_graph()),
                diagnostics: Vec::new(),
                signatures: Some(c.signatures.clone()),
                model_count: Some(c.model_count(cap)),
                collections: c.space.member_counts().into_iter().collect(),
            };
            (Some(c), resp)
        }
        Err(diagnostics) => (
            None,
            CompileResponse {
                module_graph: None,
                diagnostics,
                signatures: None,
                model_count: None,
                collections: BTreeMap::new(),
            },
        ),
    }
}

pub fn graph_response(c: &Compiled, nodes_only: bool, cap: usize) -> Result<GraphJson, QueryError> {
    Ok(c.graph(nodes_only, cap)?.to_json())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcretizeResponse {
    pub selection: String,
    /// Present when the selection is valid.
    pub program: Option<String>,
    pub violations: Vec<Violation>,
    /// Models agreeing with every binding given; absent when the model graph
    /// is too large to list.
    pub compatible_models: Option<Vec<String>>,
}

/// Concretize a full selection, or report what a partial one lacks and which
/// models it is compatible with.
pub fn concretize_response(c: &Compiled, text: &str, cap: usize) -> Result<ConcretizeResponse, QueryError> {
    let (sel, violations) = c.resolve(text)?;
    let program = if violations.is_empty() { Some(c.concretize(text)?) } else { None };
    let compatible_models = match c.compatible(text, cap) {
        Ok(ids) => Some(ids),
        Err(QueryError::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ConcretizeResponse {
        selection: canonical(&c.label(&sel)),
        program,
        violations,
        compatible_models,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NeighborJson {
    pub id: String,
    pub selection: Vec<BindingJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NeighborsResponse {
    pub selection: String,
    pub neighbors: Vec<NeighborJson>,
}

pub fn neighbors_response(c: &Compiled, text: &str) -> Result<NeighborsResponse, QueryError> {
    let sel = c.valid_selection(text)?;
    let neighbors = c
        .neighbors(text)?
        .iter()
        .map(|n| NeighborJson {
            id: canonical(n),
            selection: bindings_json(n),
        })
        .collect();
    Ok(NeighborsResponse {
        selection: canonical(&c.label(&sel)),
        neighbors,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub notes: String,
}

/// Labels and notes keyed by canonical selection string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotations {
    pub models: BTreeMap<String, Annotation>,
}

impl Annotations {
    /// The annotations file next to a source file: `fit.stan` gives
    /// `fit.annotations.json`.
    pub fn path_for(source: &Path) -> PathBuf {
        let stem = source.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        source.with_file_name(format!("{stem}.annotations.json"))
    }

    /// An absent file reads as no annotations.
    pub fn load(path: &Path) -> io::Result<Annotations> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Annotations::default()),
            Err(e) => Err(e),
        }
    }

    /// Write through a temporary file in the same directory, then rename.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        io::Write::write_all(&mut tmp, to_json(self).as_bytes())?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::DEFAULT_CAP;
    use crate::testutil::MEAN_STDDEV;

    #[test]
    fn partial_selections_list_compatible_models() {
        let c = compile(MEAN_STDDEV).unwrap();
        let r = concretize_response(&c, "Mean:normal", DEFAULT_CAP).unwrap();
        assert!(r.program.is_none());
        assert_eq!(r.violations, [Violation::MissingHole { hole: "Stddev".into() }]);
        assert_eq!(r.compatible_models.unwrap().len(), 3);
        let r = concretize_response(&c, "Mean:normal,Stddev:standard", DEFAULT_CAP).unwrap();
        assert!(r.program.unwrap().contains("x ~ normal(mu, 1);"));
        assert_eq!(r.compatible_models.unwrap(), ["Mean:normal,Stddev:standard"]);
    }

    #[test]
    fn compile_reports_counts_and_diagnostics() {
        let (c, r) = compile_response(MEAN_STDDEV, DEFAULT_CAP);
        assert!(c.is_some() && r.diagnostics.is_empty());
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["modelCount"]["count"], "6");
        assert!(v.get("collections").is_none());
        let (c, r) = compile_response("model { x ~ normal(Nope(), 1); }", DEFAULT_CAP);
        assert!(c.is_none());
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["moduleGraph"], serde_json::Value::Null);
        assert_eq!(v["diagnostics"][0]["code"], "UNFILLED_HOLE");
    }

    #[test]
    fn annotations_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = Annotations::path_for(&dir.path().join("golf.stan"));
        assert_eq!(path.file_name().unwrap(), "golf.annotations.json");
        assert_eq!(Annotations::load(&path).unwrap(), Annotations::default());
        let mut a = Annotations::default();
        a.models.insert(
            "NSuccesses:binomial,PSuccess:logistic".into(),
            Annotation {
                label: "model 1".into(),
                notes: "poor fit".into(),
            },
        );
        a.save(&path).unwrap();
        assert_eq!(Annotations::load(&path).unwrap(), a);
        std::fs::write(&path, "{").unwrap();
        assert_eq!(Annotations::load(&path).unwrap_err().kind(), io::ErrorKind::InvalidData);
    }
}
