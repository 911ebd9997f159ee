//! Core program model: base blocks plus module implementations, with the
//! hole/implementation indexes every later stage relies on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::syntax::visit::{hole_calls_in_expr, hole_calls_in_stmts, SiteKind};
use crate::syntax::{Ast, Block, BlockKind, Expr, FieldDecl, Span};

/// A hole-to-implementation map. Keys iterate in lexicographic order, which
/// makes `canonical` deterministic.
pub type Selection = BTreeMap<String, String>;

/// `h1:i1,h2:i2` in hole order.
pub fn canonical(sel: &Selection) -> String {
    let mut out = String::new();
    for (k, (h, i)) in sel.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(h);
        out.push(':');
        out.push_str(i);
    }
    out
}

/// A module implementation after macro expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Implementation {
    pub hole: String,
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub append: Vec<Block>,
    pub span: Span,
    holes: BTreeSet<String>,
}

impl Implementation {
    pub fn new(hole: impl Into<String>, name: impl Into<String>, fields: Vec<FieldDecl>, append: Vec<Block>, span: Span) -> Implementation {
        let mut holes = BTreeSet::new();
        let mut calls = Vec::new();
        for f in &fields {
            hole_calls_in_stmts(&f.body, &mut calls);
            if let Some(r) = &f.ret {
                hole_calls_in_expr(r, &mut calls);
            }
        }
        for b in &append {
            hole_calls_in_stmts(&b.stmts, &mut calls);
        }
        for (hc, _) in calls {
            holes.insert(hc.hole.name().to_string());
        }
        Implementation {
            hole: hole.into(),
            name: name.into(),
            fields,
            append,
            span,
            holes,
        }
    }

    /// Holes referenced anywhere in the fields or append blocks.
    pub fn holes(&self) -> &BTreeSet<String> {
        &self.holes
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn append_block(&self, kind: BlockKind) -> Option<&Block> {
        self.append.iter().find(|b| b.kind == kind)
    }

    /// `hole:name`, the identifier used in module graphs.
    pub fn id(&self) -> String {
        format!("{}:{}", self.hole, self.name)
    }
}

/// Where a hole call sits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Container {
    Base(BlockKind),
    /// A field body (`field` = `Some`) or an append block (`block` = `Some`).
    Impl {
        hole: String,
        name: String,
        field: Option<String>,
        block: Option<BlockKind>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleSite {
    pub hole: String,
    pub field: Option<String>,
    pub args: Vec<Expr>,
    pub kind: SiteKind,
    pub container: Container,
    pub span: Span,
}

impl HoleSite {
    /// The enclosing base block; `None` for sites inside implementations.
    pub fn block(&self) -> Option<BlockKind> {
        match self.container {
            Container::Base(b) => Some(b),
            Container::Impl { .. } => None,
        }
    }
}

/// A program after macro expansion. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularProgram {
    base: Vec<Block>,
    impls: Vec<Implementation>,
    by_hole: BTreeMap<String, Vec<usize>>,
    base_holes: BTreeSet<String>,
}

/// Returned when a program still contains macro decorations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{col}: `{hole}` uses macro syntax; expand macros first")]
pub struct MacroSyntaxPresent {
    pub hole: String,
    pub line: u32,
    pub col: u32,
}

impl ModularProgram {
    pub fn new(mut base: Vec<Block>, mut impls: Vec<Implementation>) -> ModularProgram {
        base.sort_by_key(|b| b.kind);
        impls.sort_by(|a, b| (&a.hole, &a.name).cmp(&(&b.hole, &b.name)));
        let mut by_hole: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (k, i) in impls.iter().enumerate() {
            by_hole.entry(i.hole.clone()).or_default().push(k);
        }
        let mut calls = Vec::new();
        for b in &base {
            hole_calls_in_stmts(&b.stmts, &mut calls);
        }
        let base_holes = calls.iter().map(|(hc, _)| hc.hole.name().to_string()).collect();
        ModularProgram {
            base,
            impls,
            by_hole,
            base_holes,
        }
    }

    /// Build from an AST without macro decorations.
    pub fn from_ast(ast: &Ast) -> Result<ModularProgram, MacroSyntaxPresent> {
        let mut calls = Vec::new();
        for b in &ast.blocks {
            hole_calls_in_stmts(&b.stmts, &mut calls);
        }
        for d in &ast.impls {
            if d.index_params.is_some() {
                return Err(MacroSyntaxPresent {
                    hole: d.hole.clone(),
                    line: d.span.line,
                    col: d.span.col,
                });
            }
            for f in &d.fields {
                hole_calls_in_stmts(&f.body, &mut calls);
                if let Some(r) = &f.ret {
                    hole_calls_in_expr(r, &mut calls);
                }
            }
            for b in &d.append {
                hole_calls_in_stmts(&b.stmts, &mut calls);
            }
        }
        if let Some((hc, _)) = calls.iter().find(|(hc, _)| !hc.hole.is_plain()) {
            return Err(MacroSyntaxPresent {
                hole: crate::syntax::render::render_hole_ref(&hc.hole),
                line: hc.span.line,
                col: hc.span.col,
            });
        }
        let impls = ast
            .impls
            .iter()
            .map(|d| Implementation::new(&d.hole, &d.name, d.fields.clone(), d.append.clone(), d.span))
            .collect();
        Ok(ModularProgram::new(ast.blocks.clone(), impls))
    }

    pub fn base(&self) -> &[Block] {
        &self.base
    }

    pub fn base_block(&self, kind: BlockKind) -> Option<&Block> {
        self.base.iter().find(|b| b.kind == kind)
    }

    /// All implementations, ordered by (hole, name).
    pub fn impls(&self) -> &[Implementation] {
        &self.impls
    }

    pub fn impls_of<'a>(&'a self, hole: &str) -> impl Iterator<Item = &'a Implementation> + 'a {
        self.by_hole
            .get(hole)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |&k| &self.impls[k])
    }

    pub(crate) fn impl_indices(&self, hole: &str) -> &[usize] {
        self.by_hole.get(hole).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn implementation(&self, hole: &str, name: &str) -> Option<&Implementation> {
        self.impls_of(hole).find(|i| i.name == name)
    }

    /// Holes called from the base blocks.
    pub fn base_holes(&self) -> &BTreeSet<String> {
        &self.base_holes
    }

    /// Every hole that is called somewhere or has an implementation.
    pub fn holes(&self) -> BTreeSet<String> {
        let mut out = self.base_holes.clone();
        for i in &self.impls {
            out.insert(i.hole.clone());
            out.extend(i.holes().iter().cloned());
        }
        out
    }

    pub fn has_holes(&self) -> bool {
        !self.base_holes.is_empty() || !self.impls.is_empty()
    }

    /// Every hole call in the program, base first, then implementations in order.
    pub fn sites(&self) -> Vec<HoleSite> {
        let mut out = Vec::new();
        for b in &self.base {
            let mut calls = Vec::new();
            hole_calls_in_stmts(&b.stmts, &mut calls);
            push_sites(&mut out, calls, Container::Base(b.kind));
        }
        for i in &self.impls {
            for f in &i.fields {
                let mut calls = Vec::new();
                hole_calls_in_stmts(&f.body, &mut calls);
                if let Some(r) = &f.ret {
                    hole_calls_in_expr(r, &mut calls);
                }
                let c = Container::Impl {
                    hole: i.hole.clone(),
                    name: i.name.clone(),
                    field: Some(f.name.clone()),
                    block: None,
                };
                push_sites(&mut out, calls, c);
            }
            for b in &i.append {
                let mut calls = Vec::new();
                hole_calls_in_stmts(&b.stmts, &mut calls);
                let c = Container::Impl {
                    hole: i.hole.clone(),
                    name: i.name.clone(),
                    field: None,
                    block: Some(b.kind),
                };
                push_sites(&mut out, calls, c);
            }
        }
        out
    }

    /// A program with the same base and only the implementations `keep` accepts.
    pub fn restrict(&self, keep: impl Fn(&Implementation) -> bool) -> ModularProgram {
        ModularProgram::new(self.base.clone(), self.impls.iter().filter(|i| keep(i)).cloned().collect())
    }

    /// Holes required by the selected implementations that exist in the program.
    pub fn holes_of_selection(&self, sel: &Selection) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (h, i) in sel {
            if let Some(imp) = self.implementation(h, i) {
                out.extend(imp.holes().iter().cloned());
            }
        }
        out
    }

    /// Checks `sel` against the three selection criteria and lists every violation.
    pub fn valid_selection(&self, sel: &Selection) -> Validity {
        let mut violations = Vec::new();
        for (h, i) in sel {
            if self.implementation(h, i).is_none() {
                violations.push(Violation::NotInProgram {
                    hole: h.clone(),
                    implementation: i.clone(),
                });
            }
        }
        let mut required = self.base_holes.clone();
        required.extend(self.holes_of_selection(sel));
        for h in &required {
            if !sel.contains_key(h) {
                violations.push(Violation::MissingHole { hole: h.clone() });
            }
        }
        for (h, i) in sel {
            if !required.contains(h) && self.implementation(h, i).is_some() {
                violations.push(Violation::ExtraImpl {
                    hole: h.clone(),
                    implementation: i.clone(),
                });
            }
        }
        Validity { violations }
    }

    /// The part of `sel` reachable from the base through `sel` itself.
    pub fn close(&self, sel: &Selection) -> Selection {
        let mut out = Selection::new();
        let mut stack: Vec<&String> = self.base_holes.iter().collect();
        let mut seen: BTreeSet<&String> = stack.iter().copied().collect();
        while let Some(h) = stack.pop() {
            let Some(name) = sel.get(h) else { continue };
            let Some(imp) = self.implementation(h, name) else { continue };
            out.insert(h.clone(), name.clone());
            for c in imp.holes() {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        out
    }

    pub fn module_graph(&self) -> ModuleGraph {
        let mut nodes = vec![ModuleNode {
            id: BASE_NODE.to_string(),
            kind: NodeKind::Base,
        }];
        let mut edges = Vec::new();
        for h in &self.base_holes {
            edges.push(ModuleEdge {
                from: BASE_NODE.to_string(),
                to: h.clone(),
            });
        }
        for h in self.holes() {
            nodes.push(ModuleNode {
                id: h.clone(),
                kind: NodeKind::Hole,
            });
            for i in self.impls_of(&h) {
                edges.push(ModuleEdge {
                    from: h.clone(),
                    to: i.id(),
                });
            }
        }
        for i in &self.impls {
            nodes.push(ModuleNode {
                id: i.id(),
                kind: NodeKind::Impl,
            });
            for c in i.holes() {
                edges.push(ModuleEdge {
                    from: i.id(),
                    to: c.clone(),
                });
            }
        }
        ModuleGraph { nodes, edges }
    }
}

fn push_sites(out: &mut Vec<HoleSite>, calls: Vec<(&crate::syntax::HoleCall, SiteKind)>, container: Container) {
    for (hc, kind) in calls {
        out.push(HoleSite {
            hole: hc.hole.name().to_string(),
            field: hc.hole.field().map(str::to_string),
            args: hc.args.clone(),
            kind,
            container: container.clone(),
            span: hc.span,
        });
    }
}

/// Pairs of distinct implementations of the same hole, one from each selection.
pub fn siblings(a: &Selection, b: &Selection) -> Vec<(String, String, String)> {
    a.iter()
        .filter_map(|(h, ia)| match b.get(h) {
            Some(ib) if ib != ia => Some((h.clone(), ia.clone(), ib.clone())),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingHole { hole: String },
    ExtraImpl { hole: String, implementation: String },
    NotInProgram { hole: String, implementation: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingHole { hole } => write!(f, "hole `{hole}` is required but not filled"),
            Violation::ExtraImpl { hole, implementation } => {
                write!(f, "`{hole}:{implementation}` fills a hole that is not required")
            }
            Violation::NotInProgram { hole, implementation } => {
                write!(f, "`{hole}:{implementation}` is not an implementation in the program")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Validity {
    pub violations: Vec<Violation>,
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const BASE_NODE: &str = "base";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Base,
    Hole,
    Impl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleNode {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleEdge {
    pub from: String,
    pub to: String,
}

/// Base, hole and implementation nodes; base and implementations point to the
/// holes they call, holes point to their implementations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleGraph {
    pub nodes: Vec<ModuleNode>,
    pub edges: Vec<ModuleEdge>,
}

impl ModuleGraph {
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph modules {\n");
        for n in &self.nodes {
            let shape = match n.kind {
                NodeKind::Base => "doubleoctagon",
                NodeKind::Hole => "box",
                NodeKind::Impl => "ellipse",
            };
            out.push_str(&format!("  {} [shape={shape}];\n", dot_quote(&n.id)));
        }
        for e in &self.edges {
            out.push_str(&format!("  {} -> {};\n", dot_quote(&e.from), dot_quote(&e.to)));
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;


    fn sel(s: &str) -> Selection {
        s.split(',')
            .filter(|p| !p.is_empty())
            .map(|p| {
                let (h, i) = p.split_once(':').unwrap();
                (h.to_string(), i.to_string())
            })
            .collect()
    }

    fn mean_stddev() -> ModularProgram {
        ModularProgram::from_ast(&parse(crate::testutil::MEAN_STDDEV).unwrap()).unwrap()
    }

    #[test]
    fn indexes() {
        let p = mean_stddev();
        assert_eq!(p.impls().len(), 6);
        assert_eq!(p.base_holes().iter().cloned().collect::<Vec<_>>(), ["Mean", "Stddev"]);
        let ln = p.implementation("Stddev", "lognormal").unwrap();
        assert_eq!(ln.holes().iter().cloned().collect::<Vec<_>>(), ["StddevInformative"]);
        assert_eq!(p.impls_of("Mean").map(|i| i.name.as_str()).collect::<Vec<_>>(), ["normal", "standard"]);
        assert_eq!(p.sites().len(), 3);
        assert!(p.sites().iter().all(|s| s.block().is_some() == matches!(s.container, Container::Base(_))));
    }

    #[test]
    fn selection_validity() {
        let p = mean_stddev();
        assert!(p.valid_selection(&sel("Mean:normal,Stddev:lognormal,StddevInformative:yes")).is_valid());
        let v = p.valid_selection(&sel("Mean:normal,Stddev:standard,StddevInformative:yes"));
        assert_eq!(
            v.violations,
            vec![Violation::ExtraImpl {
                hole: "StddevInformative".into(),
                implementation: "yes".into()
            }]
        );
        let v = p.valid_selection(&sel("Mean:normal"));
        assert_eq!(v.violations, vec![Violation::MissingHole { hole: "Stddev".into() }]);
        let v = p.valid_selection(&sel("Mean:nope,Stddev:standard"));
        assert!(matches!(v.violations[0], Violation::NotInProgram { .. }));
    }

    #[test]
    fn closing() {
        let p = mean_stddev();
        assert_eq!(
            p.close(&sel("Mean:normal,Stddev:standard,StddevInformative:yes")),
            sel("Mean:normal,Stddev:standard")
        );
        assert!(p.close(&Selection::new()).is_empty());
        let full = sel("Mean:normal,Stddev:lognormal,StddevInformative:no");
        assert_eq!(p.close(&full), full);
    }

    #[test]
    fn sibling_pairs() {
        let a = sel("Mean:standard");
        assert_eq!(
            siblings(&a, &sel("Mean:normal")),
            vec![("Mean".into(), "standard".into(), "normal".into())]
        );
        assert!(siblings(&a, &sel("Stddev:standard")).is_empty());
        assert!(siblings(&a, &a).is_empty());
    }

    #[test]
    fn module_graph_shape() {
        let g = mean_stddev().module_graph();
        let has = |f: &str, t: &str| g.edges.iter().any(|e| e.from == f && e.to == t);
        assert!(has("base", "Mean") && has("base", "Stddev"));
        assert!(has("Stddev", "Stddev:lognormal") && has("Stddev", "Stddev:standard"));
        assert!(has("Stddev:lognormal", "StddevInformative"));
        assert_eq!(g.nodes.len(), 1 + 3 + 6);
        let plain = ModularProgram::from_ast(&parse("data { int N; }").unwrap()).unwrap();
        assert_eq!(plain.module_graph().nodes.len(), 1);
        assert!(plain.module_graph().edges.is_empty());
        assert!(g.to_dot().contains("\"Stddev:lognormal\" -> \"StddevInformative\";"));
    }

    #[test]
    fn macro_syntax_is_rejected() {
        let ast = parse("model { y ~ normal(sum(Feature[1..3]+(x)), 1); }").unwrap();
        assert!(ModularProgram::from_ast(&ast).is_err());
    }
}
