//! Structural validation, hole-signature inference and semantic checks.

mod infer;
mod structure;
pub mod types;
mod typing;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::program::ModularProgram;
use crate::syntax::{BlockKind, Span};

pub use infer::{infer_signatures, infer_signatures_in, return_type, validate_semantics, TypeEnv};
pub use structure::{hole_dependencies, validate_structure};
pub use types::Ty;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Code {
    SyntaxError,
    MacroError,
    MacroConflict,
    Cycle,
    UnfilledHole,
    DupImpl,
    ArgtypeMismatch,
    RettypeMismatch,
    EffectNotAllowed,
    ScopeNotAllowed,
    TypeError,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::SyntaxError => "SYNTAX_ERROR",
            Code::MacroError => "MACRO_ERROR",
            Code::MacroConflict => "MACRO_CONFLICT",
            Code::Cycle => "CYCLE",
            Code::UnfilledHole => "UNFILLED_HOLE",
            Code::DupImpl => "DUP_IMPL",
            Code::ArgtypeMismatch => "ARGTYPE_MISMATCH",
            Code::RettypeMismatch => "RETTYPE_MISMATCH",
            Code::EffectNotAllowed => "EFFECT_NOT_ALLOWED",
            Code::ScopeNotAllowed => "SCOPE_NOT_ALLOWED",
            Code::TypeError => "TYPE_ERROR",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DiagSpan {
    pub line: u32,
    pub col: u32,
    pub len: usize,
}

impl From<Span> for DiagSpan {
    fn from(s: Span) -> DiagSpan {
        DiagSpan {
            line: s.line,
            col: s.col,
            len: s.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Diagnostic {
    pub code: Code,
    pub span: DiagSpan,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: Code, span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            code,
            span: span.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.col, self.code, self.message)
    }
}

/// Sort by position and drop exact repeats.
pub(crate) fn tidy(mut diags: Vec<Diagnostic>) -> Vec<Diagnostic> {
    diags.sort_by(|a, b| (a.span.line, a.span.col, a.code, &a.message).cmp(&(b.span.line, b.span.col, b.code, &b.message)));
    diags.dedup();
    diags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Effect {
    #[serde(rename = "RNG")]
    Rng,
    #[serde(rename = "LPDF")]
    Lpdf,
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Effect::Rng => "RNG",
            Effect::Lpdf => "LPDF",
        })
    }
}

/// Effects code in a block may perform.
pub fn allowed_effects(b: BlockKind) -> &'static [Effect] {
    match b {
        BlockKind::Model | BlockKind::TransformedParameters => &[Effect::Lpdf],
        BlockKind::GeneratedQuantities => &[Effect::Rng],
        _ => &[],
    }
}

/// Blocks whose variables code in `b` may read, besides `b` itself.
pub fn allowed_scope(b: BlockKind) -> &'static [BlockKind] {
    use BlockKind::*;
    match b {
        TransformedData => &[Data],
        TransformedParameters => &[Data, TransformedData, Parameters],
        Model | GeneratedQuantities => &[Data, TransformedData, Parameters, TransformedParameters],
        _ => &[],
    }
}

/// Argument and return types of one field of a hole.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FieldSignature {
    pub arg_types: Vec<Ty>,
    pub ret_type: Ty,
    /// Filled in `y ~ H(...)` position; `y` is the first argument.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub subject: bool,
}

/// What callers may assume about a hole, whichever implementation fills it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoleSignature {
    /// Keyed by field name; plain holes have the single field `""`.
    pub fields: BTreeMap<String, FieldSignature>,
    pub effects: BTreeSet<Effect>,
    pub scope: BTreeSet<BlockKind>,
}

impl HoleSignature {
    pub fn field(&self, name: &str) -> Option<&FieldSignature> {
        self.fields.get(name)
    }

    pub fn arg_types(&self) -> &[Ty] {
        self.fields.get("").map(|f| f.arg_types.as_slice()).unwrap_or(&[])
    }

    pub fn ret_type(&self) -> &Ty {
        self.fields.get("").map(|f| &f.ret_type).unwrap_or(&Ty::Void)
    }
}

/// Plain holes serialize as `{argTypes, retType, effects, scope}`; holes with
/// named fields carry `fields` instead of the first two.
impl Serialize for HoleSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        match self.fields.get("") {
            Some(f) if self.fields.len() == 1 => {
                m.serialize_entry("argTypes", &f.arg_types)?;
                m.serialize_entry("retType", &f.ret_type)?;
                if f.subject {
                    m.serialize_entry("subject", &true)?;
                }
            }
            _ => m.serialize_entry("fields", &self.fields)?,
        }
        m.serialize_entry("effects", &self.effects)?;
        let scope: Vec<&str> = self.scope.iter().map(|b| b.keyword()).collect();
        m.serialize_entry("scope", &scope)?;
        m.end()
    }
}

pub type Signatures = BTreeMap<String, HoleSignature>;

/// Run all three stages, stopping at the first that reports problems.
pub fn check(p: &ModularProgram) -> Result<Signatures, Vec<Diagnostic>> {
    validate_structure(p)?;
    let sigs = infer_signatures(p)?;
    validate_semantics(p, &sigs)?;
    Ok(sigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn program(src: &str) -> ModularProgram {
        ModularProgram::from_ast(&parse(src).unwrap()).unwrap()
    }

    fn codes(r: Result<Signatures, Vec<Diagnostic>>) -> Vec<Code> {
        r.err().unwrap_or_default().into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn mean_stddev_checks() {
        let sigs = check(&program(crate::testutil::MEAN_STDDEV)).unwrap();
        let mean = &sigs["Mean"];
        assert!(mean.arg_types().is_empty());
        assert_eq!(*mean.ret_type(), Ty::Real);
        assert_eq!(mean.effects, BTreeSet::from([Effect::Lpdf]));
        assert_eq!(mean.scope, BTreeSet::from([BlockKind::Parameters]));
        let inf = &sigs["StddevInformative"];
        assert_eq!(*inf.ret_type(), Ty::Int);
        assert!(inf.effects.is_empty() && inf.scope.is_empty());
        assert_eq!(sigs["Stddev"].effects, BTreeSet::from([Effect::Lpdf]));
    }

    #[test]
    fn signature_json() {
        let sigs = check(&program(crate::testutil::MEAN_STDDEV)).unwrap();
        let v = serde_json::to_value(&sigs["Mean"]).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"argTypes": [], "retType": "real", "effects": ["LPDF"], "scope": ["parameters"]})
        );
    }

    #[test]
    fn argument_mismatch() {
        let src = format!("{}\nmodule \"bad\" Mean(real z) {{ return z; }}", crate::testutil::MEAN_STDDEV);
        assert!(codes(check(&program(&src))).contains(&Code::ArgtypeMismatch));
    }

    #[test]
    fn effect_in_generated_quantities() {
        let src = crate::testutil::MEAN_STDDEV.replace(
            "model { x ~ normal(Mean(), Stddev()); }",
            "model { x ~ normal(Mean(), Stddev()); }\ngenerated quantities { real m = Mean(); }",
        );
        let got = codes(check(&program(&src)));
        assert!(got.contains(&Code::EffectNotAllowed), "{got:?}");
    }

    #[test]
    fn statement_effects_and_scope() {
        let got = codes(check(&program("parameters { real mu; } generated quantities { mu ~ normal(0, 1); }")));
        assert_eq!(got, vec![Code::EffectNotAllowed]);
        let got = codes(check(&program("transformed data { real z = mu; } parameters { real mu; }")));
        assert_eq!(got, vec![Code::ScopeNotAllowed]);
        let got = codes(check(&program("transformed data { real z = normal_rng(0, 1); }")));
        assert_eq!(got, vec![Code::EffectNotAllowed]);
        check(&program("data { int N; } parameters { vector[N] b; } model { b ~ normal(0, 1); }")).unwrap();
        check(&program("parameters { real mu; } generated quantities { real z = normal_rng(mu, 1); }")).unwrap();
    }

    #[test]
    fn type_errors() {
        let got = codes(check(&program("data { vector[3] a; row_vector[3] b; } transformed data { vector[3] c = a + b; }")));
        assert_eq!(got, vec![Code::TypeError]);
        let got = codes(check(&program("model { y ~ normal(0, 1); }")));
        assert_eq!(got, vec![Code::TypeError]);
        let got = codes(check(&program("data { real x; } transformed data { int n = x; }")));
        assert_eq!(got, vec![Code::TypeError]);
        let got = codes(check(&program("data { real x; real x; }")));
        assert_eq!(got, vec![Code::TypeError]);
    }

    #[test]
    fn diagnostics_render() {
        let d = Diagnostic::new(
            Code::UnfilledHole,
            Span {
                start: 4,
                end: 9,
                line: 2,
                col: 3,
            },
            "hole `H` has no implementation",
        );
        assert_eq!(d.to_string(), "2:3: UNFILLED_HOLE: hole `H` has no implementation");
        assert_eq!(
            serde_json::to_value(&d).unwrap(),
            serde_json::json!({"code": "UNFILLED_HOLE", "span": {"line": 2, "col": 3, "len": 5}, "message": "hole `H` has no implementation"})
        );
    }
}
