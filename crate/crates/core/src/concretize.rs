//! Inlining selected implementations into the base program.
//!
//! Each hole site is replaced by a copy of the implementation's field body:
//! argument expressions are substituted for parameters, local declarations
//! get fresh names (`y` becomes `y_Hole`, then `y_Hole_1`, ...), and the body
//! statements are placed before the statement containing the site. Append
//! blocks are added once per implementation, after the base statements, in
//! hole order. Names declared by append blocks keep their names unless they
//! clash with an existing name.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::program::{canonical, Implementation, ModularProgram, Selection, Validity};
use crate::syntax::visit::{all_decls, map_expr, map_exprs_in_stmts, referenced_vars, rename_vars_in_expr, rename_vars_in_stmts, top_level_decls};
use crate::syntax::{ident_part, render_blocks, Block, Distribution, Expr, ExprKind, FieldDecl, ForIter, HoleCall, Span, Stmt, StmtKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConcretizeError {
    #[error("invalid selection {selection}: {}", .validity.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidSelection { selection: String, validity: Validity },
    #[error("hole `{0}` is still present after concretization")]
    HoleRemains(String),
}

/// What gets inlined at a site: one field of one implementation.
#[derive(Debug, Clone)]
pub struct Template<'a> {
    pub hole: &'a str,
    pub params: Vec<&'a str>,
    pub body: &'a [Stmt],
    pub ret: Option<&'a Expr>,
}

impl<'a> Template<'a> {
    pub fn from_field(hole: &'a str, f: &'a FieldDecl) -> Template<'a> {
        Template {
            hole,
            params: f.params.iter().map(|p| p.name.as_str()).collect(),
            body: &f.body,
            ret: f.ret.as_ref(),
        }
    }
}

struct Inliner<'a> {
    /// (hole, field) to inline; the field is `""` for plain holes.
    templates: HashMap<(&'a str, &'a str), Template<'a>>,
    /// Global renames for each selected implementation's append blocks.
    global_renames: HashMap<&'a str, HashMap<String, String>>,
    used: HashSet<String>,
    applied: BTreeSet<&'a str>,
}

impl<'a> Inliner<'a> {
    fn fresh(&mut self, name: &str, hole: &str) -> String {
        let base = format!("{name}_{}", ident_part(hole));
        let mut cand = base.clone();
        let mut k = 1;
        while self.used.contains(&cand) {
            cand = format!("{base}_{k}");
            k += 1;
        }
        self.used.insert(cand.clone());
        cand
    }

    fn expands(&self, hc: &HoleCall) -> bool {
        self.templates.contains_key(&(hc.hole.name(), hc.hole.field().unwrap_or("")))
    }

    fn stmts(&mut self, stmts: Vec<Stmt>) -> Vec<Stmt> {
        let mut out = Vec::with_capacity(stmts.len());
        for s in stmts {
            self.stmt(s, &mut out);
        }
        out
    }

    fn stmt(&mut self, mut s: Stmt, out: &mut Vec<Stmt>) {
        match s.kind {
            StmtKind::Expr(Expr {
                kind: ExprKind::Hole(hc), ..
            }) if self.expands(&hc) => {
                let args = hc.args.iter().map(|a| self.expr(a.clone(), out)).collect();
                self.inline(&hc, args, false, out);
                return;
            }
            StmtKind::Tilde {
                lhs,
                dist: Distribution::Hole(hc),
            } if self.expands(&hc) => {
                let mut args = vec![self.expr(lhs, out)];
                args.extend(hc.args.iter().map(|a| self.expr(a.clone(), out)));
                self.inline(&hc, args, false, out);
                return;
            }
            _ => {}
        }
        match &mut s.kind {
            StmtKind::Decl { ty, dims, init, .. } => {
                for e in ty.sizes.iter_mut().chain(ty.array_dims.iter_mut()).chain(dims.iter_mut()) {
                    self.expr_in_place(e, out);
                }
                for (_, e) in ty.constraint.iter_mut() {
                    self.expr_in_place(e, out);
                }
                if let Some(e) = init {
                    self.expr_in_place(e, out);
                }
            }
            StmtKind::Assign { lhs, rhs, .. } => {
                self.expr_in_place(lhs, out);
                self.expr_in_place(rhs, out);
            }
            StmtKind::Tilde { lhs, dist } => {
                self.expr_in_place(lhs, out);
                match dist {
                    Distribution::Named { args, .. } => args.iter_mut().for_each(|a| self.expr_in_place(a, out)),
                    Distribution::Hole(hc) => hc.args.iter_mut().for_each(|a| self.expr_in_place(a, out)),
                }
            }
            StmtKind::TargetPlus(e) | StmtKind::Expr(e) => self.expr_in_place(e, out),
            StmtKind::Return(Some(e)) => self.expr_in_place(e, out),
            StmtKind::For { iter, body, .. } => {
                match iter {
                    ForIter::Range(a, b) => {
                        self.expr_in_place(a, out);
                        self.expr_in_place(b, out);
                    }
                    ForIter::Each(e) => self.expr_in_place(e, out),
                }
                *body = self.stmts(std::mem::take(body));
            }
            StmtKind::While { cond, body } => {
                self.expr_in_place(cond, out);
                *body = self.stmts(std::mem::take(body));
            }
            StmtKind::If { cond, then, els } => {
                self.expr_in_place(cond, out);
                *then = self.stmts(std::mem::take(then));
                if let Some(e) = els {
                    *e = self.stmts(std::mem::take(e));
                }
            }
            StmtKind::Block(b) => *b = self.stmts(std::mem::take(b)),
            StmtKind::FunDef(fd) => {
                if let Some(b) = &mut fd.body {
                    *b = self.stmts(std::mem::take(b));
                }
            }
            StmtKind::Return(None) | StmtKind::Break | StmtKind::Continue | StmtKind::Inline(_) => {}
        }
        out.push(s);
    }

    fn expr_in_place(&mut self, e: &mut Expr, out: &mut Vec<Stmt>) {
        let taken = std::mem::replace(e, Expr::int(0));
        *e = self.expr(taken, out);
    }

    /// Expand sites inside `e`, innermost first; statements from the
    /// inlined bodies go to `out`.
    fn expr(&mut self, mut e: Expr, out: &mut Vec<Stmt>) -> Expr {
        map_expr(&mut e, &mut |x| {
            if let ExprKind::Hole(hc) = &x.kind {
                if self.expands(hc) {
                    let hc = hc.clone();
                    let span = x.span;
                    if let Some(mut v) = self.inline(&hc, hc.args.clone(), true, out) {
                        if v.span == Span::default() || v.span.line == 0 {
                            v.span = span;
                        }
                        *x = v;
                    }
                }
            }
        });
        e
    }

    /// Inline one site. `args` are already expanded. Returns the value
    /// expression when `want_value` is set.
    fn inline(&mut self, hc: &HoleCall, args: Vec<Expr>, want_value: bool, out: &mut Vec<Stmt>) -> Option<Expr> {
        let key = (hc.hole.name(), hc.hole.field().unwrap_or(""));
        let t = self.templates[&key].clone();
        self.applied.insert(t.hole);
        let mut body: Vec<Stmt> = t.body.to_vec();
        let mut ret: Option<Expr> = t.ret.cloned();

        if let Some(g) = self.global_renames.get(t.hole).filter(|g| !g.is_empty()) {
            let g = g.clone();
            let f = |n: &str| g.get(n).cloned();
            rename_vars_in_stmts(&mut body, &f);
            if let Some(r) = &mut ret {
                rename_vars_in_expr(r, &f);
            }
        }

        let mut locals = Vec::new();
        all_decls(&body, &mut locals);
        let mut renames: HashMap<String, String> = HashMap::new();
        for n in locals {
            if let std::collections::hash_map::Entry::Vacant(e) = renames.entry(n) {
                let fresh = self.fresh(e.key(), t.hole);
                e.insert(fresh);
            }
        }
        if !renames.is_empty() {
            let f = |n: &str| renames.get(n).cloned();
            rename_vars_in_stmts(&mut body, &f);
            if let Some(r) = &mut ret {
                rename_vars_in_expr(r, &f);
            }
        }

        let bind: HashMap<&str, Expr> = t.params.iter().copied().zip(args).collect();
        if !bind.is_empty() {
            let mut subst = |x: &mut Expr| {
                if let ExprKind::Var(n) = &x.kind {
                    if let Some(a) = bind.get(n.as_str()) {
                        *x = a.clone();
                    }
                }
            };
            map_exprs_in_stmts(&mut body, &mut subst);
            if let Some(r) = &mut ret {
                map_expr(r, &mut subst);
            }
        }

        let flat = self.stmts(body);
        out.extend(flat);
        if want_value {
            ret.map(|r| self.expr(r, out))
        } else {
            None
        }
    }
}

/// Inline every site of `hole` (field `field`, `""` for plain holes) in
/// `stmts` with the given body, parameters and return expression.
pub fn inline_function(stmts: &[Stmt], hole: &str, field: &str, body: &[Stmt], params: &[&str], ret: Option<&Expr>) -> Vec<Stmt> {
    let t = Template {
        hole,
        params: params.to_vec(),
        body,
        ret,
    };
    let mut used = HashSet::new();
    collect_names(stmts, &mut used);
    let mut inl = Inliner {
        templates: HashMap::from([((hole, field), t)]),
        global_renames: HashMap::new(),
        used,
        applied: BTreeSet::new(),
    };
    inl.stmts(stmts.to_vec())
}

fn collect_names(stmts: &[Stmt], used: &mut HashSet<String>) {
    let mut decls = Vec::new();
    all_decls(stmts, &mut decls);
    used.extend(decls);
    let mut refs = BTreeSet::new();
    referenced_vars(stmts, &mut refs);
    used.extend(refs);
}

fn collect_impl_names(i: &Implementation, used: &mut HashSet<String>) {
    for f in &i.fields {
        collect_names(&f.body, used);
        used.extend(f.params.iter().map(|p| p.name.clone()));
        if let Some(r) = &f.ret {
            collect_names(std::slice::from_ref(&Stmt::new(StmtKind::Expr(r.clone()))), used);
        }
    }
    for b in &i.append {
        collect_names(&b.stmts, used);
    }
}

/// Inline the given implementations wherever their holes are called, in
/// the base and in every other implementation. At most one implementation
/// per hole is used; the result depends only on the set, not the order.
pub fn apply_impls(p: &ModularProgram, impls: &[&Implementation]) -> ModularProgram {
    let mut chosen: BTreeMap<&str, &Implementation> = BTreeMap::new();
    for i in impls {
        chosen.entry(i.hole.as_str()).or_insert(i);
    }
    let is_chosen = |i: &Implementation| chosen.get(i.hole.as_str()).is_some_and(|c| c.name == i.name);

    let mut used = HashSet::new();
    for b in p.base() {
        collect_names(&b.stmts, &mut used);
    }
    // Alternatives to a chosen implementation are dropped, so only other
    // holes' implementations can still be inlined later.
    for i in p.impls().iter().filter(|i| !chosen.contains_key(i.hole.as_str())) {
        collect_impl_names(i, &mut used);
    }

    let mut templates = HashMap::new();
    let mut global_renames: HashMap<&str, HashMap<String, String>> = HashMap::new();
    for (hole, imp) in &chosen {
        for f in &imp.fields {
            templates.insert((*hole, f.name.as_str()), Template::from_field(hole, f));
        }
        let mut renames = HashMap::new();
        for b in &imp.append {
            for n in top_level_decls(&b.stmts) {
                if used.contains(&n) {
                    let base = format!("{n}_{}", ident_part(hole));
                    let mut cand = base.clone();
                    let mut k = 1;
                    while used.contains(&cand) {
                        cand = format!("{base}_{k}");
                        k += 1;
                    }
                    used.insert(cand.clone());
                    renames.insert(n, cand);
                } else {
                    used.insert(n);
                }
            }
        }
        global_renames.insert(hole, renames);
    }

    let mut inl = Inliner {
        templates,
        global_renames,
        used,
        applied: BTreeSet::new(),
    };

    let mut base: Vec<Block> = p
        .base()
        .iter()
        .map(|b| Block {
            kind: b.kind,
            stmts: inl.stmts(b.stmts.clone()),
            span: b.span,
        })
        .collect();

    let rest: Vec<Implementation> = p
        .impls()
        .iter()
        .filter(|i| !is_chosen(i))
        .map(|i| {
            let fields = i
                .fields
                .iter()
                .map(|f| {
                    let mut f = f.clone();
                    let mut pre = Vec::new();
                    let ret = f.ret.take().map(|r| inl.expr(r, &mut pre));
                    let mut body = inl.stmts(std::mem::take(&mut f.body));
                    body.extend(pre);
                    f.body = body;
                    f.ret = ret;
                    f
                })
                .collect();
            let append = i
                .append
                .iter()
                .map(|b| Block {
                    kind: b.kind,
                    stmts: inl.stmts(b.stmts.clone()),
                    span: b.span,
                })
                .collect();
            Implementation::new(&i.hole, &i.name, fields, append, i.span)
        })
        .collect();

    // Append blocks of implementations that were actually inlined somewhere.
    // Inlining an append block can apply further implementations, so repeat
    // until nothing new is applied.
    let mut appended: BTreeSet<&str> = BTreeSet::new();
    loop {
        let pending: Vec<&str> = inl.applied.iter().copied().filter(|h| !appended.contains(h)).collect();
        let Some(&next) = pending.iter().min() else { break };
        appended.insert(next);
        let imp = chosen[next];
        let renames = inl.global_renames.get(next).cloned().unwrap_or_default();
        for b in &imp.append {
            let mut stmts = b.stmts.clone();
            if !renames.is_empty() {
                rename_vars_in_stmts(&mut stmts, &|n: &str| renames.get(n).cloned());
            }
            let stmts = inl.stmts(stmts);
            match base.iter_mut().find(|x| x.kind == b.kind) {
                Some(x) => x.stmts.extend(stmts),
                None => base.push(Block {
                    kind: b.kind,
                    stmts,
                    span: Span::default(),
                }),
            }
        }
    }
    ModularProgram::new(base, rest)
}

pub fn apply_impl(p: &ModularProgram, i: &Implementation) -> ModularProgram {
    apply_impls(p, &[i])
}

/// The concrete program for a valid selection, as canonical text.
pub fn concretize(p: &ModularProgram, sel: &Selection) -> Result<String, ConcretizeError> {
    Ok(render_blocks(concretize_blocks(p, sel)?.base()))
}

/// The concrete program for a valid selection.
pub fn concretize_blocks(p: &ModularProgram, sel: &Selection) -> Result<ModularProgram, ConcretizeError> {
    let validity = p.valid_selection(sel);
    if !validity.is_valid() {
        return Err(ConcretizeError::InvalidSelection {
            selection: canonical(sel),
            validity,
        });
    }
    let impls: Vec<&Implementation> = sel.iter().filter_map(|(h, i)| p.implementation(h, i)).collect();
    let out = apply_impls(p, &impls);
    if let Some(h) = out.base_holes().iter().next() {
        return Err(ConcretizeError::HoleRemains(h.clone()));
    }
    Ok(ModularProgram::new(out.base().to_vec(), Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_expr, render, BlockKind};

    fn program(src: &str) -> ModularProgram {
        ModularProgram::from_ast(&parse(src).unwrap()).unwrap()
    }

    fn sel(s: &str) -> Selection {
        s.split(',')
            .map(|p| {
                let (h, i) = p.split_once(':').unwrap();
                (h.to_string(), i.to_string())
            })
            .collect()
    }

    /// Canonical text of a program given as source.
    fn canon(src: &str) -> String {
        render(&parse(src).unwrap())
    }

    #[test]
    fn bare_return() {
        let stmts = parse("model { x ~ normal(Mean(), 1); }").unwrap().blocks[0].stmts.clone();
        let zero = parse_expr("0").unwrap();
        let out = inline_function(&stmts, "Mean", "", &[], &[], Some(&zero));
        assert_eq!(render_blocks(&[Block { kind: BlockKind::Model, stmts: out, span: Span::default() }]), canon("model { x ~ normal(0, 1); }"));
    }

    #[test]
    fn freshened_local() {
        let stmts = parse("model { x ~ normal(H(2+3), 1); }").unwrap().blocks[0].stmts.clone();
        let body = parse("model { real y = a; }").unwrap().blocks[0].stmts.clone();
        let y = parse_expr("y").unwrap();
        let out = inline_function(&stmts, "H", "", &body, &["a"], Some(&y));
        let text = render_blocks(&[Block { kind: BlockKind::Model, stmts: out, span: Span::default() }]);
        assert_eq!(text, canon("model { real y_H = 2 + 3; x ~ normal(y_H, 1); }"));
    }

    #[test]
    fn void_statement_site() {
        let stmts = parse("model { H(); }").unwrap().blocks[0].stmts.clone();
        let body = parse("model { target += 1; }").unwrap().blocks[0].stmts.clone();
        let out = inline_function(&stmts, "H", "", &body, &[], None);
        assert_eq!(out.len(), 1);
        assert!(matches!(out[0].kind, StmtKind::TargetPlus(_)));
    }

    #[test]
    fn mean_stddev_full_selection() {
        let p = program(crate::testutil::MEAN_STDDEV);
        let got = concretize(&p, &sel("Mean:normal,Stddev:lognormal,StddevInformative:yes")).unwrap();
        let want = canon(
            "data { int N; vector[N] x; }
             parameters { real mu; real<lower=0> sigma; }
             model { mu ~ normal(0, 1); sigma ~ lognormal(0, 1); x ~ normal(mu, sigma); }",
        );
        assert_eq!(got, want);
    }

    #[test]
    fn mean_stddev_standard() {
        let p = program(crate::testutil::MEAN_STDDEV);
        let got = concretize(&p, &sel("Mean:standard,Stddev:standard")).unwrap();
        assert_eq!(got, canon("data { int N; vector[N] x; } model { x ~ normal(0, 1); }"));
    }

    #[test]
    fn invalid_selection() {
        let p = program(crate::testutil::MEAN_STDDEV);
        let err = concretize(&p, &sel("Mean:normal")).unwrap_err();
        assert!(matches!(err, ConcretizeError::InvalidSelection { .. }));
        assert!(err.to_string().contains("Stddev"));
    }

    #[test]
    fn apply_single_impl() {
        let p = program(crate::testutil::MEAN_STDDEV);
        let std = p.implementation("Mean", "standard").unwrap();
        let q = apply_impl(&p, std);
        assert!(!q.base_holes().contains("Mean"));
        assert!(q.implementation("Mean", "standard").is_none());
        assert!(q.implementation("Mean", "normal").is_some());
        let yes = p.implementation("StddevInformative", "yes").unwrap();
        let r = apply_impl(&p, yes);
        // Only the lognormal body changes; nothing is appended to the base.
        assert_eq!(render_blocks(r.base()), render_blocks(p.base()));
        let ln = r.implementation("Stddev", "lognormal").unwrap();
        assert!(ln.holes().is_empty());
    }

    #[test]
    fn order_independence() {
        let p = program(crate::testutil::MEAN_STDDEV);
        let a = p.implementation("Stddev", "lognormal").unwrap();
        let b = p.implementation("StddevInformative", "yes").unwrap();
        let x = apply_impls(&p, &[a, b]);
        let y = apply_impls(&p, &[b, a]);
        assert_eq!(render_blocks(x.base()), render_blocks(y.base()));
        assert_eq!(render_blocks(apply_impls(&p, &[]).base()), render_blocks(p.base()));
    }

    #[test]
    fn repeated_sites_share_parameters() {
        let src = r#"
data { real y; real z; }
model { y ~ normal(M(), 1); z ~ normal(M(), 1); }
module "m" M() { parameters { real mu; } real t = mu * 2; return t; }
"#;
        let got = concretize(&program(src), &sel("M:m")).unwrap();
        let want = canon(
            "data { real y; real z; } parameters { real mu; }
             model { real t_M = mu * 2; y ~ normal(t_M, 1); real t_M_1 = mu * 2; z ~ normal(t_M_1, 1); }",
        );
        assert_eq!(got, want);
    }

    #[test]
    fn append_name_clash() {
        let src = r#"
data { real y; }
parameters { real mu; }
model { y ~ normal(mu + M(), 1); }
module "m" M() { parameters { real mu; } return mu; }
"#;
        let got = concretize(&program(src), &sel("M:m")).unwrap();
        let want = canon("data { real y; } parameters { real mu; real mu_M; } model { y ~ normal(mu + mu_M, 1); }");
        assert_eq!(got, want);
    }

    #[test]
    fn subject_and_arguments() {
        let src = r#"
data { int J; vector[J] x; array[J] int n; array[J] int y; }
model { y ~ NSuccesses(n, PSuccess(x)); }
module "binomial" NSuccesses(y | n, p) { y ~ binomial(n, p); }
module "logistic" PSuccess(x) { parameters { real a; real b; } return logit(a + b*x); }
"#;
        let got = concretize(&program(src), &sel("NSuccesses:binomial,PSuccess:logistic")).unwrap();
        let want = canon(
            "data { int J; vector[J] x; array[J] int n; array[J] int y; }
             parameters { real a; real b; }
             model { y ~ binomial(n, logit(a + b*x)); }",
        );
        assert_eq!(got, want);
    }

    #[test]
    fn fields_share_appends() {
        let src = r#"
data { real y; }
model { y ~ normal(T.fwd(1), T.back(2)); }
module "e" T { parameters { real s; } field fwd(real v) { return v + s; } field back(real v) { return v - s; } }
"#;
        let got = concretize(&program(src), &sel("T:e")).unwrap();
        assert_eq!(got, canon("data { real y; } parameters { real s; } model { y ~ normal(1 + s, 2 - s); }"));
    }
}
