//! Rewrites macro sites into core hole calls and builds every implementation
//! that can be built eagerly. Collection members are left for later.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use super::family::{each_call_mut, specialize, Family, Operand, Source};
use super::ranges::IndexSpace;
use super::{Collection, CoreHole, EagerImpl, HoleKind, MacroError, MacroErrorKind, MacroProgram};
use crate::program::Implementation;
use crate::syntax::render::render_hole_ref;
use crate::syntax::visit::{hole_calls_in_expr, hole_calls_in_stmts, map_exprs_in_stmts, map_expr};
use crate::syntax::{ident_part, Ast, Block, Expr, ExprKind, FieldDecl, HoleCall, HoleOperand, HoleRef, ImplDecl, IndexParamKind, Span, Stmt};

/// Families without `+` are built in full; beyond this size that is refused.
pub const EAGER_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Req {
    Plain(String),
    /// Hole, field, instance index.
    Instance(String, String, i64),
    Copy(String, i64),
    /// A product or indexed hole without `+`.
    Eager(String),
}

/// How a core hole name was introduced; one name admits one kind of use.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Use {
    Direct,
    Copy,
    Family(String),
    Collection(String),
}

#[derive(Default)]
struct Draft {
    fields: Vec<FieldDecl>,
    append: Vec<Block>,
    span: Span,
}

struct PendingCollection {
    family: Family,
    arity: usize,
    value: bool,
}

enum Rewrite {
    One(HoleRef),
    Many(Vec<HoleRef>),
}

struct Expander<'a> {
    decls: BTreeMap<&'a str, Vec<&'a ImplDecl>>,
    uses: HashMap<String, (Use, String)>,
    pending: VecDeque<Req>,
    seen: HashSet<Req>,
    sources: HashMap<String, (Vec<Source>, Vec<Source>)>,
    building: HashSet<String>,
    eager: HashMap<String, Family>,
    collections: BTreeMap<String, PendingCollection>,
    drafts: BTreeMap<String, BTreeMap<String, Draft>>,
    instance_appends: HashSet<(String, String, i64)>,
    copies: BTreeMap<String, String>,
}

fn err(kind: MacroErrorKind, span: Span, message: impl Into<String>) -> MacroError {
    MacroError {
        kind,
        span,
        message: message.into(),
    }
}

pub(crate) fn expand(ast: &Ast) -> Result<MacroProgram, MacroError> {
    let mut decls: BTreeMap<&str, Vec<&ImplDecl>> = BTreeMap::new();
    for d in &ast.impls {
        decls.entry(d.hole.as_str()).or_default().push(d);
    }
    for v in decls.values_mut() {
        v.sort_by(|a, b| a.name.cmp(&b.name));
    }
    let mut ex = Expander {
        decls,
        uses: HashMap::new(),
        pending: VecDeque::new(),
        seen: HashSet::new(),
        sources: HashMap::new(),
        building: HashSet::new(),
        eager: HashMap::new(),
        collections: BTreeMap::new(),
        drafts: BTreeMap::new(),
        instance_appends: HashSet::new(),
        copies: BTreeMap::new(),
    };
    let mut base = ast.blocks.clone();
    for b in &mut base {
        ex.rewrite_stmts(&mut b.stmts)?;
    }
    loop {
        while let Some(r) = ex.pending.pop_front() {
            ex.process(r)?;
        }
        // Holes nobody calls still appear in the program if they have plain modules.
        let idle: Vec<String> = ex
            .decls
            .iter()
            .filter(|(h, ds)| !ex.uses.contains_key(**h) && ds.iter().all(|d| d.index_params.is_none()))
            .map(|(h, _)| h.to_string())
            .collect();
        if idle.is_empty() {
            break;
        }
        for h in idle {
            ex.uses.insert(h.clone(), (Use::Direct, h.clone()));
            ex.require(Req::Plain(h));
        }
    }
    ex.finish(base)
}

impl<'a> Expander<'a> {
    fn require(&mut self, r: Req) {
        if self.seen.insert(r.clone()) {
            self.pending.push_back(r);
        }
    }

    fn claim(&mut self, name: &str, u: Use, written: &str, span: Span) -> Result<(), MacroError> {
        match self.uses.get(name) {
            Some((prev, how)) if *prev != u => Err(err(
                MacroErrorKind::Conflict,
                span,
                format!("`{name}` is used in incompatible ways: `{how}` and `{written}`"),
            )),
            Some(_) => Ok(()),
            None => {
                self.uses.insert(name.to_string(), (u, written.to_string()));
                Ok(())
            }
        }
    }

    fn rewrite_stmts(&mut self, stmts: &mut [Stmt]) -> Result<(), MacroError> {
        let mut first_err = None;
        map_exprs_in_stmts(stmts, &mut |e| {
            if first_err.is_none() {
                if let Err(x) = self.rewrite_expr_node(e) {
                    first_err = Some(x);
                }
            }
        });
        each_call_mut(stmts, &mut |hc| {
            if first_err.is_some() {
                return;
            }
            match self.rewrite_ref(hc, true) {
                Ok(Rewrite::One(r)) => hc.hole = r,
                Ok(Rewrite::Many(_)) => {
                    first_err = Some(err(
                        MacroErrorKind::Unsupported,
                        hc.span,
                        "a ranged reference cannot be used after `~`",
                    ))
                }
                Err(x) => first_err = Some(x),
            }
        });
        first_err.map_or(Ok(()), Err)
    }

    fn rewrite_expr(&mut self, e: &mut Expr) -> Result<(), MacroError> {
        let mut first_err = None;
        map_expr(e, &mut |x| {
            if first_err.is_none() {
                if let Err(y) = self.rewrite_expr_node(x) {
                    first_err = Some(y);
                }
            }
        });
        first_err.map_or(Ok(()), Err)
    }

    fn rewrite_expr_node(&mut self, e: &mut Expr) -> Result<(), MacroError> {
        let ExprKind::Hole(hc) = &mut e.kind else { return Ok(()) };
        match self.rewrite_ref(hc, false)? {
            Rewrite::One(r) => hc.hole = r,
            Rewrite::Many(refs) => {
                let calls = refs
                    .into_iter()
                    .map(|r| Expr {
                        kind: ExprKind::Hole(HoleCall {
                            hole: r,
                            args: hc.args.clone(),
                            span: hc.span,
                        }),
                        span: e.span,
                    })
                    .collect();
                e.kind = ExprKind::Array(calls);
            }
        }
        Ok(())
    }

    fn rewrite_field(&mut self, f: &mut FieldDecl) -> Result<(), MacroError> {
        self.rewrite_stmts(&mut f.body)?;
        if let Some(r) = &mut f.ret {
            self.rewrite_expr(r)?;
        }
        Ok(())
    }

    fn rewrite_blocks(&mut self, blocks: &mut [Block]) -> Result<(), MacroError> {
        for b in blocks {
            self.rewrite_stmts(&mut b.stmts)?;
        }
        Ok(())
    }

    fn has_templates(&self, h: &str, kind: IndexParamKind) -> bool {
        self.decls
            .get(h)
            .is_some_and(|ds| ds.iter().any(|d| d.index_params.as_ref().is_some_and(|p| p.kind == kind)))
    }

    fn rewrite_ref(&mut self, hc: &HoleCall, tilde: bool) -> Result<Rewrite, MacroError> {
        let r = &hc.hole;
        let written = render_hole_ref(r);
        if r.is_plain() {
            let h = r.name();
            if self.has_templates(h, IndexParamKind::Bracket) || self.has_templates(h, IndexParamKind::Angle) {
                return Err(err(
                    MacroErrorKind::Unsupported,
                    hc.span,
                    format!("`{h}` has indexed implementations; refer to it with `{h}[..]` or `{h}<..>`"),
                ));
            }
            self.claim(h, Use::Direct, &written, hc.span)?;
            self.require(Req::Plain(h.to_string()));
            return Ok(Rewrite::One(r.clone()));
        }
        if r.collection {
            if tilde {
                return Err(err(MacroErrorKind::Unsupported, hc.span, "a collection cannot be used after `~`"));
            }
            let family = self.family(r, hc.span)?;
            let key = family.key.clone();
            self.claim(&key, Use::Collection(written.clone()), &written, hc.span)?;
            let value = family
                .operands
                .iter()
                .flat_map(|o| o.plain.iter().chain(&o.templates))
                .all(|s| s.field.ret.is_some());
            self.collections.entry(key.clone()).or_insert(PendingCollection {
                family,
                arity: hc.args.len(),
                value,
            });
            return Ok(Rewrite::One(HoleRef::plain(key)));
        }
        if r.operands.len() == 1 && r.operands[0].instance.is_some() {
            let op = &r.operands[0];
            let inst = op.instance.as_ref().unwrap();
            if op.index.is_some() || op.power.is_some() {
                return Err(err(
                    MacroErrorKind::Unsupported,
                    hc.span,
                    format!("`{written}` combines instances with other macros"),
                ));
            }
            let space = IndexSpace::new(&inst.range).map_err(|v| unbound(&v.0, hc.span))?;
            if space.arity() != 1 {
                return Err(err(MacroErrorKind::Unsupported, hc.span, "instance indices take a single value"));
            }
            let h = op.name.clone();
            let field = op.field.clone().unwrap_or_default();
            let mut refs = Vec::new();
            for j in space.all().map(|t| t[0]) {
                let mut o = HoleOperand::plain(&h);
                if inst.copy {
                    let name = format!("{h}<<{j}>>");
                    self.claim(&name, Use::Copy, &written, hc.span)?;
                    self.copies.insert(name.clone(), h.clone());
                    self.require(Req::Copy(h.clone(), j));
                    o.name = name;
                    o.field = op.field.clone();
                } else {
                    self.claim(&h, Use::Direct, &written, hc.span)?;
                    self.require(Req::Instance(h.clone(), field.clone(), j));
                    o.field = Some(format!("{field}<{j}>"));
                }
                refs.push(HoleRef {
                    operands: vec![o],
                    collection: false,
                });
            }
            let ranged = inst.range.iter().any(|i| !matches!(i, crate::syntax::RangeItem::Index(_)));
            return Ok(if ranged { Rewrite::Many(refs) } else { Rewrite::One(refs.pop().unwrap()) });
        }
        let family = self.family(r, hc.span)?;
        let key = family.key.clone();
        self.claim(&key, Use::Family(written.clone()), &written, hc.span)?;
        self.eager.entry(key.clone()).or_insert(family);
        self.require(Req::Eager(key.clone()));
        Ok(Rewrite::One(HoleRef::plain(key)))
    }

    fn family(&mut self, r: &HoleRef, span: Span) -> Result<Family, MacroError> {
        let mut operands = Vec::new();
        let mut key = Vec::new();
        for op in &r.operands {
            if op.instance.is_some() || op.field.is_some() {
                return Err(err(
                    MacroErrorKind::Unsupported,
                    span,
                    format!("`{}` cannot be combined with products or collections", render_hole_ref(r)),
                ));
            }
            let (plain, templates) = self.sources(&op.name, span)?;
            let index = match &op.index {
                Some(items) => Some(IndexSpace::new(items).map_err(|v| unbound(&v.0, span))?),
                None => None,
            };
            match (&index, templates.is_empty()) {
                (None, false) => {
                    return Err(err(
                        MacroErrorKind::Unsupported,
                        span,
                        format!("`{}` has indexed implementations and needs an index range", op.name),
                    ))
                }
                (Some(_), true) => {
                    return Err(err(
                        MacroErrorKind::Unsupported,
                        span,
                        format!("`{}` has no indexed implementation", op.name),
                    ))
                }
                _ => {}
            }
            if let Some(ix) = &index {
                if let Some(t) = templates.iter().find(|t| t.vars.len() != ix.arity()) {
                    return Err(err(
                        MacroErrorKind::Conflict,
                        span,
                        format!("`{}:{}` takes {} indices but the range gives {}", op.name, t.name, t.vars.len(), ix.arity()),
                    ));
                }
            }
            key.push(match op.power {
                Some(p) => format!("{}^{}{}", op.name, p.kind.prefix(), p.n),
                None => op.name.clone(),
            });
            operands.push(Operand {
                hole: op.name.clone(),
                plain,
                templates,
                index,
                power: op.power,
            });
        }
        Ok(Family {
            key: key.join("*"),
            operands,
        })
    }

    /// Plain implementations and bracket templates of `h`, rewritten once.
    fn sources(&mut self, h: &str, span: Span) -> Result<(Vec<Source>, Vec<Source>), MacroError> {
        if let Some(s) = self.sources.get(h) {
            return Ok(s.clone());
        }
        if !self.building.insert(h.to_string()) {
            return Err(err(
                MacroErrorKind::Unsupported,
                span,
                format!("`{h}` refers to itself through a macro"),
            ));
        }
        let decls = self.decls.get(h).cloned().unwrap_or_default();
        let (mut plain, mut templates) = (Vec::new(), Vec::new());
        for d in decls {
            if !d.is_anonymous() {
                return Err(err(
                    MacroErrorKind::Unsupported,
                    d.span,
                    format!("`{h}:{}` has named fields and cannot be used in a product or collection", d.name),
                ));
            }
            let vars = match &d.index_params {
                None => Vec::new(),
                Some(p) if p.kind == IndexParamKind::Bracket => p.vars.clone(),
                Some(_) => {
                    return Err(err(
                        MacroErrorKind::Unsupported,
                        d.span,
                        format!("`{h}:{}` is an instance template and cannot be used in a product or collection", d.name),
                    ))
                }
            };
            let mut field = d.fields[0].clone();
            let mut append = d.append.clone();
            self.rewrite_field(&mut field)?;
            self.rewrite_blocks(&mut append)?;
            let src = Source {
                name: d.name.clone(),
                children: called_holes(std::slice::from_ref(&field), &append),
                child_ids: Vec::new(),
                field,
                append,
                vars,
                span: d.span,
            };
            if src.vars.is_empty() {
                plain.push(src);
            } else {
                templates.push(src);
            }
        }
        self.building.remove(h);
        self.sources.insert(h.to_string(), (plain.clone(), templates.clone()));
        Ok((plain, templates))
    }

    /// Plain implementations and instance templates.
    fn angle_decls(&self, h: &str) -> Vec<&'a ImplDecl> {
        self.decls
            .get(h)
            .map(|ds| {
                ds.iter()
                    .copied()
                    .filter(|d| d.index_params.as_ref().is_none_or(|p| p.kind == IndexParamKind::Angle))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn draft(&mut self, hole: &str, name: &str, span: Span) -> &mut Draft {
        let d = self.drafts.entry(hole.to_string()).or_default().entry(name.to_string()).or_default();
        d.span = span;
        d
    }

    fn process(&mut self, r: Req) -> Result<(), MacroError> {
        match r {
            Req::Plain(h) => {
                self.drafts.entry(h.clone()).or_default();
                for d in self.decls.get(h.as_str()).cloned().unwrap_or_default() {
                    let mut fields = d.fields.clone();
                    let mut append = d.append.clone();
                    for f in &mut fields {
                        self.rewrite_field(f)?;
                    }
                    self.rewrite_blocks(&mut append)?;
                    let dr = self.draft(&h, &d.name, d.span);
                    dr.fields.extend(fields);
                    dr.append.extend(append);
                }
            }
            Req::Instance(h, field, j) => {
                self.drafts.entry(h.clone()).or_default();
                let suffix = format!("{}_{j}", ident_part(&h));
                for d in self.angle_decls(&h) {
                    let (mut fields, mut append) = angle_instance(d, j, &suffix);
                    let Some(k) = fields.iter().position(|f| f.name == field) else { continue };
                    let mut f = fields.swap_remove(k);
                    self.rewrite_field(&mut f)?;
                    f.name = format!("{field}<{j}>");
                    let fresh = self.instance_appends.insert((h.clone(), d.name.clone(), j));
                    if fresh {
                        self.rewrite_blocks(&mut append)?;
                    }
                    let dr = self.draft(&h, &d.name, d.span);
                    dr.fields.push(f);
                    if fresh {
                        dr.append.extend(append);
                    }
                }
            }
            Req::Copy(h, j) => {
                let name = format!("{h}<<{j}>>");
                self.drafts.entry(name.clone()).or_default();
                let suffix = format!("{}_{j}", ident_part(&h));
                for d in self.angle_decls(&h) {
                    let (mut fields, mut append) = angle_instance(d, j, &suffix);
                    for f in &mut fields {
                        self.rewrite_field(f)?;
                    }
                    self.rewrite_blocks(&mut append)?;
                    let dr = self.draft(&name, &d.name, d.span);
                    dr.fields.extend(fields);
                    dr.append.extend(append);
                }
            }
            Req::Eager(key) => {
                let family = self.eager[&key].clone();
                let n = family.count().filter(|&n| n <= EAGER_LIMIT).ok_or_else(|| {
                    err(
                        MacroErrorKind::TooLarge,
                        family.operands[0].plain.first().or(family.operands[0].templates.first()).map(|s| s.span).unwrap_or_default(),
                        format!("`{key}` has more than {EAGER_LIMIT} implementations; use it as a collection (`+`)"),
                    )
                })?;
                self.drafts.entry(key.clone()).or_default();
                for ord in 0..n {
                    let (field, append) = family.instantiate(ord);
                    let span = field.span;
                    let dr = self.draft(&key, &family.display(ord), span);
                    dr.fields.push(field);
                    dr.append.extend(append);
                }
            }
        }
        Ok(())
    }

    fn finish(self, base: Vec<Block>) -> Result<MacroProgram, MacroError> {
        let mut names: BTreeSet<String> = self.drafts.keys().cloned().collect();
        names.extend(self.collections.keys().cloned());
        let by_name: HashMap<String, u32> = names.iter().enumerate().map(|(k, n)| (n.clone(), k as u32)).collect();
        let ids = |hs: &BTreeSet<String>| -> Vec<u32> { hs.iter().filter_map(|h| by_name.get(h).copied()).collect() };

        let mut collections = Vec::new();
        let mut holes = Vec::new();
        let mut drafts = self.drafts;
        let mut pending = self.collections;
        for name in &names {
            let kind = if let Some(mut pc) = pending.remove(name) {
                for o in &mut pc.family.operands {
                    for s in o.plain.iter_mut().chain(o.templates.iter_mut()) {
                        s.child_ids = ids(&s.children);
                    }
                }
                collections.push(Collection {
                    hole: by_name[name],
                    family: pc.family,
                    arity: pc.arity,
                    value: pc.value,
                });
                HoleKind::Collection(collections.len() as u32 - 1)
            } else {
                let impls = drafts
                    .remove(name)
                    .unwrap_or_default()
                    .into_iter()
                    .map(|(iname, mut d)| {
                        d.append.sort_by_key(|b| b.kind);
                        let append = merge_blocks(d.append);
                        let imp = Implementation::new(name, iname, d.fields, append, d.span);
                        let children = ids(imp.holes());
                        EagerImpl { imp, children }
                    })
                    .collect();
                HoleKind::Eager(impls)
            };
            holes.push(CoreHole { name: name.clone(), kind });
        }
        let mut calls = Vec::new();
        for b in &base {
            hole_calls_in_stmts(&b.stmts, &mut calls);
        }
        let base_names: BTreeSet<String> = calls.iter().map(|(hc, _)| hc.hole.name().to_string()).collect();
        let base_holes = ids(&base_names);
        let eager = self.eager.into_iter().map(|(k, f)| (by_name[&k], f)).collect();
        Ok(MacroProgram::from_parts(base, holes, by_name, collections, base_holes, self.copies, eager))
    }
}

fn unbound(v: &str, span: Span) -> MacroError {
    err(
        MacroErrorKind::Unsupported,
        span,
        format!("index variable `{v}` is not bound here; only instance templates (`H<j>`) may pass indices on"),
    )
}

/// All fields and appends of `d` for instance or copy `j`.
fn angle_instance(d: &ImplDecl, j: i64, suffix: &str) -> (Vec<FieldDecl>, Vec<Block>) {
    let mut fields = d.fields.clone();
    let mut append = d.append.clone();
    let vals: HashMap<&str, i64> = match &d.index_params {
        Some(p) if p.kind == IndexParamKind::Angle => p.vars.iter().map(|v| (v.as_str(), j)).collect(),
        _ => HashMap::new(),
    };
    specialize(&mut fields, &mut append, &vals, Some(suffix));
    (fields, append)
}

/// Same-kind append blocks joined in order.
fn merge_blocks(blocks: Vec<Block>) -> Vec<Block> {
    let mut out: Vec<Block> = Vec::new();
    for b in blocks {
        match out.last_mut() {
            Some(last) if last.kind == b.kind => last.stmts.extend(b.stmts),
            _ => out.push(b),
        }
    }
    out
}

pub(crate) fn called_holes(fields: &[FieldDecl], append: &[Block]) -> BTreeSet<String> {
    let mut calls = Vec::new();
    for f in fields {
        hole_calls_in_stmts(&f.body, &mut calls);
        if let Some(r) = &f.ret {
            hole_calls_in_expr(r, &mut calls);
        }
    }
    for b in append {
        hole_calls_in_stmts(&b.stmts, &mut calls);
    }
    calls.into_iter().map(|(hc, _)| hc.hole.name().to_string()).collect()
}
