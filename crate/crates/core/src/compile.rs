//! From source text to the answers the command line and the service give.
//!
//! Programs without macros are answered with the core algorithms directly;
//! programs with macros go through their lazy expansion.

use std::borrow::Cow;
use std::collections::BTreeSet;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::checks::{self, Code, Diagnostic, Signatures};
use crate::concretize::{self, ConcretizeError};
use crate::graph::space::{first_selection, SpaceSelection};
use crate::graph::{self, count_nodes, graph_of, plain_label, GraphError, GraphOptions, ModelGraph};
use crate::macros::{self, count_models, MacroError, MacroErrorKind, MacroProgram, ModelCount};
use crate::program::{canonical, ModularProgram, ModuleGraph, Selection, Validity, Violation};
use crate::syntax::selection::{parse_selection, SelectionError};
use crate::syntax::{parse, SyntaxError};

/// Default bound on materialized model graphs.
pub const DEFAULT_CAP: usize = 5000;

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("{0}")]
    Macro(#[from] MacroError),
    #[error("invalid selection: {}", violation_text(.0))]
    Invalid(Validity),
    #[error(transparent)]
    Graph(GraphError),
    #[error(transparent)]
    Concretize(#[from] ConcretizeError),
    #[error("{count} models is above the cap of {cap}")]
    TooLarge { count: ModelCount, cap: usize },
    #[error("no implementation for hole `{0}`")]
    NoStart(String),
}

fn violation_text(v: &Validity) -> String {
    v.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl From<GraphError> for QueryError {
    fn from(e: GraphError) -> QueryError {
        match e {
            GraphError::InvalidSelection(v) => QueryError::Invalid(v),
            e => QueryError::Graph(e),
        }
    }
}

impl QueryError {
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::Selection(_) => "SELECTION_SYNTAX",
            QueryError::Macro(e) => e.kind.code(),
            QueryError::Invalid(_) => "INVALID_SELECTION",
            QueryError::Concretize(ConcretizeError::InvalidSelection { .. }) => "INVALID_SELECTION",
            QueryError::Concretize(ConcretizeError::HoleRemains(_)) => "HOLE_REMAINS",
            QueryError::Graph(GraphError::Cycle { .. }) => "CYCLE",
            QueryError::Graph(_) | QueryError::TooLarge { .. } => "CAP_EXCEEDED",
            QueryError::NoStart(_) => "UNFILLED_HOLE",
        }
    }

    pub fn violations(&self) -> Option<&[Violation]> {
        match self {
            QueryError::Invalid(v) | QueryError::Concretize(ConcretizeError::InvalidSelection { validity: v, .. }) => {
                Some(&v.violations)
            }
            _ => None,
        }
    }
}

impl Serialize for QueryError {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("code", self.code())?;
        m.serialize_entry("message", &self.to_string())?;
        if let Some(v) = self.violations() {
            m.serialize_entry("violations", v)?;
        }
        if let QueryError::TooLarge { count, cap } = self {
            m.serialize_entry("count", count)?;
            m.serialize_entry("cap", cap)?;
        }
        m.end()
    }
}

pub fn syntax_diagnostic(e: &SyntaxError) -> Diagnostic {
    let mut message = e.message.clone();
    if !e.expected.is_empty() {
        message.push_str(&format!(" (expected one of: {})", e.expected.join(", ")));
    }
    Diagnostic::new(Code::SyntaxError, e.span, message)
}

pub fn macro_diagnostic(e: &MacroError) -> Diagnostic {
    let code = match e.kind {
        MacroErrorKind::Conflict => Code::MacroConflict,
        _ => Code::MacroError,
    };
    Diagnostic::new(code, e.span, e.message.clone())
}

/// A parsed, expanded and checked program.
#[derive(Debug)]
pub struct Compiled {
    pub space: MacroProgram,
    /// The program itself when it uses no macro syntax.
    core: Option<ModularProgram>,
    pub signatures: Signatures,
}

/// Parse, expand and check `src`.
pub fn compile(src: &str) -> Result<Compiled, Vec<Diagnostic>> {
    let ast = parse(src).map_err(|e| vec![syntax_diagnostic(&e)])?;
    let space = macros::expand(&ast).map_err(|e| vec![macro_diagnostic(&e)])?;
    let core = ModularProgram::from_ast(&ast).ok();
    let signatures = match &core {
        Some(p) => checks::check(p)?,
        None => checks::check(&space.core_program())?,
    };
    Ok(Compiled { space, core, signatures })
}

impl Compiled {
    /// The core program answered against: the program itself, or for macro
    /// programs the expansion with a representative choice of members.
    pub fn program(&self) -> Cow<'_, ModularProgram> {
        match &self.core {
            Some(p) => Cow::Borrowed(p),
            None => Cow::Owned(self.space.core_program()),
        }
    }

    pub fn uses_macros(&self) -> bool {
        self.core.is_none()
    }

    pub fn module_graph(&self) -> ModuleGraph {
        self.program().module_graph()
    }

    /// Number of models. Exact for programs that fit under `cap` nodes;
    /// otherwise computed from the hole tree.
    pub fn model_count(&self, cap: usize) -> ModelCount {
        if let Some(p) = &self.core {
            if let Ok(n) = count_nodes(p, cap) {
                return ModelCount::from_u64(n as u64);
            }
        }
        count_models(&self.space)
    }

    /// The model graph, refused when it has more than `cap` nodes.
    pub fn graph(&self, nodes_only: bool, cap: usize) -> Result<ModelGraph, QueryError> {
        let opts = GraphOptions { edges: !nodes_only, cap };
        let too_large = || QueryError::TooLarge {
            count: count_models(&self.space),
            cap,
        };
        if self.space.has_collections() && count_models(&self.space).exceeds(cap as u64) {
            return Err(too_large());
        }
        let g = match &self.core {
            Some(p) => graph_of(p, opts, &|s| plain_label(p, s)),
            None => graph_of(&self.space, opts, &|s| self.space.label(s)),
        };
        match g {
            Ok(g) if g.nodes.len() <= cap => Ok(g),
            Ok(_) | Err(GraphError::CapExceeded { .. }) => Err(too_large()),
            Err(e) => Err(e.into()),
        }
    }

    /// A selection string as bindings of the expanded program, with every
    /// problem that keeps it from being a valid selection.
    pub fn resolve(&self, text: &str) -> Result<(SpaceSelection<MacroProgram>, Vec<Violation>), QueryError> {
        let spec = parse_selection(text)?;
        let (sel, mut violations) = self.space.translate(&spec)?;
        violations.extend(self.space.violations(&sel));
        let violations: BTreeSet<Violation> = violations.into_iter().collect();
        Ok((sel, violations.into_iter().collect()))
    }

    pub fn valid_selection(&self, text: &str) -> Result<SpaceSelection<MacroProgram>, QueryError> {
        let (sel, violations) = self.resolve(text)?;
        if violations.is_empty() {
            Ok(sel)
        } else {
            Err(QueryError::Invalid(Validity { violations }))
        }
    }

    /// The selection as users write it.
    pub fn label(&self, sel: &SpaceSelection<MacroProgram>) -> Selection {
        self.space.label(sel)
    }

    pub fn concretize(&self, text: &str) -> Result<String, QueryError> {
        let sel = self.valid_selection(text)?;
        Ok(match &self.core {
            Some(p) => concretize::concretize(p, &self.label(&sel))?,
            None => {
                let (pick, named) = self.space.materialized_selection(&sel);
                concretize::concretize(&self.space.materialize(&pick), &named)?
            }
        })
    }

    /// Neighbours of a valid selection, ordered by canonical string.
    pub fn neighbors(&self, text: &str) -> Result<Vec<Selection>, QueryError> {
        let sel = self.valid_selection(text)?;
        let mut out = match &self.core {
            Some(p) => graph::model_neighbors(p, &self.label(&sel))?,
            None => self.space.neighbor_labels(&sel),
        };
        out.sort_by_cached_key(canonical);
        out.dedup();
        Ok(out)
    }

    /// Ids of the models that agree with every binding of a partial selection.
    pub fn compatible(&self, text: &str, cap: usize) -> Result<Vec<String>, QueryError> {
        let (sel, _) = self.resolve(text)?;
        let partial = self.label(&sel);
        let g = self.graph(true, cap)?;
        Ok(graph::compatible(&g.nodes, &partial))
    }

    /// The lexicographically first implementation for every reachable hole.
    pub fn default_start(&self) -> Result<Selection, QueryError> {
        match first_selection(&self.space) {
            Some(s) => Ok(self.label(&s)),
            None => Err(QueryError::NoStart(
                self.program().holes().into_iter().find(|h| self.program().impls_of(h).next().is_none()).unwrap_or_default(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::MEAN_STDDEV;

    #[test]
    fn mean_stddev_queries() {
        let c = compile(MEAN_STDDEV).unwrap();
        assert!(!c.uses_macros());
        let g = c.graph(false, DEFAULT_CAP).unwrap();
        assert_eq!((g.nodes.len(), g.edges.len()), (6, 9));
        assert_eq!(c.model_count(DEFAULT_CAP).to_string(), "6");
        let ns: Vec<String> = c.neighbors("Mean:standard,Stddev:standard").unwrap().iter().map(canonical).collect();
        assert_eq!(
            ns,
            [
                "Mean:normal,Stddev:standard",
                "Mean:standard,Stddev:lognormal,StddevInformative:no",
                "Mean:standard,Stddev:lognormal,StddevInformative:yes"
            ]
        );
        assert_eq!(c.compatible("Mean:normal", DEFAULT_CAP).unwrap().len(), 3);
        assert!(c.concretize("Mean:normal,Stddev:lognormal,StddevInformative:yes").unwrap().contains("sigma ~ lognormal(0, 1);"));
        assert_eq!(
            canonical(&c.default_start().unwrap()),
            "Mean:normal,Stddev:lognormal,StddevInformative:no"
        );
    }

    #[test]
    fn errors_carry_codes() {
        let c = compile(MEAN_STDDEV).unwrap();
        let e = c.concretize("Mean:normal").unwrap_err();
        assert_eq!(e.code(), "INVALID_SELECTION");
        assert_eq!(e.violations().unwrap(), [Violation::MissingHole { hole: "Stddev".into() }]);
        let json = serde_json::to_value(&e).unwrap();
        assert_eq!(json["violations"][0]["kind"], "missing_hole");
        assert_eq!(c.concretize("Mean:").unwrap_err().code(), "SELECTION_SYNTAX");
        assert_eq!(c.concretize("Mean:huge,Stddev:standard").unwrap_err().code(), "INVALID_SELECTION");
        let e = c.graph(false, 5).unwrap_err();
        assert_eq!(e.code(), "CAP_EXCEEDED");

        let d = compile("model { x ~ normal(0, 1) }").unwrap_err();
        assert_eq!(d[0].code, Code::SyntaxError);
        let d = compile("model { x ~ normal(H(), 1); }").unwrap_err();
        assert_eq!(d[0].code, Code::UnfilledHole);
    }

    #[test]
    fn macro_programs_refuse_huge_graphs() {
        let c = compile(include_str!("../fixtures/regression_features.stan")).unwrap();
        assert!(c.uses_macros());
        let e = c.graph(true, DEFAULT_CAP).unwrap_err();
        assert_eq!(e.code(), "CAP_EXCEEDED");
        assert_eq!(serde_json::to_value(&e).unwrap()["count"]["count"], "2^100");
        assert_eq!(c.neighbors("Feature:[2]").unwrap().len(), 100);
    }
}
