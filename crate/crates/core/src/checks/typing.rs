//! Statement and expression typing with effect and scope tracking.

use std::collections::{BTreeSet, HashMap};

use super::types::{self, assignable, IndexUse, Ty};
use super::{allowed_effects, allowed_scope, Code, Diagnostic, Effect, Signatures};
use crate::syntax::visit::SiteKind;
use crate::syntax::{AssignOp, BinOp, BlockKind, Distribution, Expr, ExprKind, ForIter, ForVar, HoleCall, Index, Span, Stmt, StmtKind, TypeExpr};

#[derive(Debug, Clone)]
pub(crate) struct Var {
    pub ty: Ty,
    /// Declaring block for globals; `None` for locals and parameters.
    pub origin: Option<BlockKind>,
}

/// Where the code being typed lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Context {
    /// A base block or an implementation's append block: effects and scope
    /// are checked against the block's allowance.
    Block(BlockKind),
    /// An implementation field body: effects and scope are only collected.
    Body,
}

#[derive(Debug, Default, Clone)]
pub(crate) struct Usage {
    pub effects: BTreeSet<Effect>,
    pub scope: BTreeSet<BlockKind>,
}

pub(crate) struct Typer<'a> {
    sigs: &'a Signatures,
    functions: &'a HashMap<String, Ty>,
    scopes: Vec<HashMap<String, Var>>,
    ctx: Context,
    /// Reject declarations that shadow a visible name.
    strict: bool,
    in_size: bool,
    pub usage: Usage,
    pub diags: Vec<Diagnostic>,
}

impl<'a> Typer<'a> {
    pub fn new(sigs: &'a Signatures, functions: &'a HashMap<String, Ty>, globals: HashMap<String, Var>, ctx: Context) -> Typer<'a> {
        Typer {
            sigs,
            functions,
            scopes: vec![globals],
            ctx,
            strict: matches!(ctx, Context::Block(_)),
            in_size: false,
            usage: Usage::default(),
            diags: Vec::new(),
        }
    }

    pub fn push(&mut self) {
        self.scopes.push(HashMap::new());
    }

    pub fn pop(&mut self) {
        self.scopes.pop();
    }

    fn error(&mut self, code: Code, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::new(code, span, msg));
    }

    fn lookup(&self, name: &str) -> Option<&Var> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    /// Declare in the innermost scope. Top-level declarations of a globals
    /// block pass the block as `origin`.
    pub fn declare(&mut self, name: &str, ty: Ty, origin: Option<BlockKind>, span: Span) {
        let clash = if self.strict {
            self.lookup(name).is_some()
        } else {
            self.scopes.last().is_some_and(|s| s.contains_key(name))
        };
        if clash {
            self.error(Code::TypeError, span, format!("`{name}` is already declared"));
        }
        self.scopes.last_mut().unwrap().insert(name.to_string(), Var { ty, origin });
    }

    fn effect(&mut self, e: Effect, span: Span) {
        self.usage.effects.insert(e);
        if let Context::Block(b) = self.ctx {
            if !allowed_effects(b).contains(&e) {
                self.error(Code::EffectNotAllowed, span, format!("{e} effect is not allowed in the {b} block"));
            }
        }
    }

    fn scope_ok(&self, b: BlockKind, used: BlockKind) -> bool {
        used == b
            || allowed_scope(b).contains(&used)
            || (self.in_size && matches!(used, BlockKind::Data | BlockKind::TransformedData))
    }

    /// Typecheck statements at the top level of a block; globals blocks
    /// record their declarations as globals.
    pub fn block(&mut self, kind: BlockKind, stmts: &[Stmt]) {
        let origin = kind.declares_globals().then_some(kind);
        for s in stmts {
            match &s.kind {
                StmtKind::Decl { .. } => self.decl(s, origin),
                _ => self.stmt(s),
            }
        }
    }

    pub fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn scoped(&mut self, stmts: &[Stmt]) {
        self.push();
        self.stmts(stmts);
        self.pop();
    }

    pub fn decl_type(&mut self, ty: &TypeExpr, dims: &[Expr]) -> Ty {
        let was = self.in_size;
        self.in_size = true;
        for e in ty.sizes.iter().chain(&ty.array_dims).chain(dims) {
            let t = self.expr(e);
            if !matches!(t, Ty::Int | Ty::Unknown) {
                self.error(Code::TypeError, e.span, format!("size must be int, found {t}"));
            }
        }
        for (_, e) in &ty.constraint {
            let t = self.expr(e);
            if !(t.is_scalar() || t.is_linalg() || t.is_unknown()) {
                self.error(Code::TypeError, e.span, format!("bound must be numeric, found {t}"));
            }
        }
        self.in_size = was;
        Ty::from_type_expr(ty).with_dims(dims.len())
    }

    fn decl(&mut self, s: &Stmt, origin: Option<BlockKind>) {
        let StmtKind::Decl { ty, name, dims, init } = &s.kind else {
            return;
        };
        let declared = self.decl_type(ty, dims);
        if let Some(init) = init {
            let t = self.expr(init);
            if !assignable(&declared, &t) {
                self.error(Code::TypeError, init.span, format!("cannot initialize {declared} `{name}` with {t}"));
            }
        }
        self.declare(name, declared, origin, s.span);
    }

    pub fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl { .. } => self.decl(s, None),
            StmtKind::Assign { lhs, op, rhs } => {
                let lt = self.lvalue(lhs);
                let rt = self.expr(rhs);
                let ok = match op {
                    AssignOp::Assign => assignable(&lt, &rt),
                    _ => {
                        let bop = match op {
                            AssignOp::Add => BinOp::Add,
                            AssignOp::Sub => BinOp::Sub,
                            AssignOp::Mul => BinOp::Mul,
                            _ => BinOp::Div,
                        };
                        types::binary(bop, &lt, &rt).is_some_and(|t| assignable(&lt, &t))
                    }
                };
                if !ok {
                    self.error(Code::TypeError, s.span, format!("cannot assign {rt} to {lt} with `{}`", op.symbol()));
                }
            }
            StmtKind::Tilde { lhs, dist } => {
                self.effect(Effect::Lpdf, s.span);
                match dist {
                    Distribution::Named { args, .. } => {
                        let lt = self.expr(lhs);
                        self.value(&lt, lhs.span);
                        for a in args {
                            let t = self.expr(a);
                            self.value(&t, a.span);
                        }
                    }
                    Distribution::Hole(hc) => {
                        self.hole(hc, SiteKind::Tilde, Some(lhs));
                    }
                }
            }
            StmtKind::TargetPlus(e) => {
                self.effect(Effect::Lpdf, s.span);
                let t = self.expr(e);
                self.value(&t, e.span);
            }
            StmtKind::Expr(e) => match &e.kind {
                ExprKind::Hole(hc) => {
                    self.hole(hc, SiteKind::Stmt, None);
                }
                _ => {
                    self.expr(e);
                }
            },
            StmtKind::For { var, iter, body } => {
                self.push();
                match iter {
                    ForIter::Range(lo, hi) => {
                        for b in [lo, hi] {
                            let t = self.expr(b);
                            if !matches!(t, Ty::Int | Ty::Unknown) {
                                self.error(Code::TypeError, b.span, format!("loop bound must be int, found {t}"));
                            }
                        }
                        for n in var.names() {
                            self.declare(n, Ty::Int, None, s.span);
                        }
                    }
                    ForIter::Each(e) => {
                        let t = self.expr(e);
                        let elem = match t.element() {
                            Some(el) => el,
                            None => {
                                self.error(Code::TypeError, e.span, format!("cannot iterate over {t}"));
                                Ty::Unknown
                            }
                        };
                        match var {
                            ForVar::Single(n) => self.declare(n, elem, None, s.span),
                            ForVar::Tuple(ns) => {
                                let parts = match elem {
                                    Ty::Tuple(ts) if ts.len() == ns.len() => ts,
                                    Ty::Unknown => vec![Ty::Unknown; ns.len()],
                                    other => {
                                        self.error(Code::TypeError, e.span, format!("cannot unpack {other} into {} names", ns.len()));
                                        vec![Ty::Unknown; ns.len()]
                                    }
                                };
                                for (n, t) in ns.iter().zip(parts) {
                                    self.declare(n, t, None, s.span);
                                }
                            }
                        }
                    }
                }
                self.stmts(body);
                self.pop();
            }
            StmtKind::While { cond, body } => {
                self.condition(cond);
                self.scoped(body);
            }
            StmtKind::If { cond, then, els } => {
                self.condition(cond);
                self.scoped(then);
                if let Some(els) = els {
                    self.scoped(els);
                }
            }
            StmtKind::Block(ss) => self.scoped(ss),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            StmtKind::Break | StmtKind::Continue | StmtKind::FunDef(_) | StmtKind::Inline(_) => {}
        }
    }

    fn condition(&mut self, e: &Expr) {
        let t = self.expr(e);
        if !(t.is_scalar() || t.is_unknown()) {
            self.error(Code::TypeError, e.span, format!("condition must be int or real, found {t}"));
        }
    }

    fn value(&mut self, t: &Ty, span: Span) {
        if matches!(t, Ty::Void) {
            self.error(Code::TypeError, span, "expression has no value");
        }
    }

    /// Type an assignment target and check that it may be written here.
    fn lvalue(&mut self, e: &Expr) -> Ty {
        let root = match &e.kind {
            ExprKind::Var(n) => Some(n),
            ExprKind::Index { base, .. } => match &base.kind {
                ExprKind::Var(n) => Some(n),
                _ => None,
            },
            _ => None,
        };
        let Some(root) = root else {
            self.error(Code::TypeError, e.span, "left-hand side is not assignable");
            return self.expr(e);
        };
        if let (Context::Block(b), Some(v)) = (self.ctx, self.lookup(root)) {
            if let Some(o) = v.origin {
                if o != b {
                    let msg = format!("`{root}` is declared in the {o} block and cannot be assigned in the {b} block");
                    self.error(Code::TypeError, e.span, msg);
                }
            }
        }
        self.expr(e)
    }

    pub fn expr(&mut self, e: &Expr) -> Ty {
        match &e.kind {
            ExprKind::Int(_) => Ty::Int,
            ExprKind::Real(_) => Ty::Real,
            ExprKind::Str(_) => Ty::Str,
            ExprKind::Var(n) => self.var(n, e.span),
            ExprKind::Call { name, args } => {
                let ts: Vec<Ty> = args.iter().map(|a| self.expr(a)).collect();
                if name.ends_with("_rng") {
                    self.effect(Effect::Rng, e.span);
                } else if name.ends_with("_lp") {
                    self.effect(Effect::Lpdf, e.span);
                }
                if let Some(t) = self.functions.get(name) {
                    return t.clone();
                }
                if name == "target" {
                    return Ty::Real;
                }
                types::builtin(name, &ts).unwrap_or(Ty::Unknown)
            }
            ExprKind::Hole(hc) => self.hole(hc, SiteKind::Expr, None),
            ExprKind::Index { base, indices } => {
                let bt = self.expr(base);
                let mut uses = Vec::with_capacity(indices.len());
                for ix in indices {
                    match ix {
                        Index::Single(i) => {
                            let t = self.expr(i);
                            match t {
                                Ty::Int | Ty::Unknown => uses.push(IndexUse::Drop),
                                Ty::Array(ref el) if matches!(**el, Ty::Int | Ty::Unknown) => uses.push(IndexUse::Keep),
                                _ => {
                                    self.error(Code::TypeError, i.span, format!("index must be int, found {t}"));
                                    uses.push(IndexUse::Drop);
                                }
                            }
                        }
                        Index::Slice(lo, hi) => {
                            for b in [lo, hi].into_iter().flatten() {
                                let t = self.expr(b);
                                if !matches!(t, Ty::Int | Ty::Unknown) {
                                    self.error(Code::TypeError, b.span, format!("slice bound must be int, found {t}"));
                                }
                            }
                            uses.push(IndexUse::Keep);
                        }
                    }
                }
                match types::index(&bt, &uses) {
                    Some(t) => t,
                    None => {
                        self.error(Code::TypeError, e.span, format!("cannot index {bt} with {} indices", uses.len()));
                        Ty::Unknown
                    }
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.expr(lhs);
                let b = self.expr(rhs);
                match types::binary(*op, &a, &b) {
                    Some(t) => t,
                    None => {
                        self.error(Code::TypeError, e.span, format!("operator `{}` does not apply to {a} and {b}", op.symbol()));
                        Ty::Unknown
                    }
                }
            }
            ExprKind::Unary { op, operand } => {
                let a = self.expr(operand);
                types::unary(*op, &a).unwrap_or_else(|| {
                    self.error(Code::TypeError, e.span, format!("operator `{}` does not apply to {a}", op.symbol()));
                    Ty::Unknown
                })
            }
            ExprKind::Transpose(x) => {
                let a = self.expr(x);
                types::transpose(&a).unwrap_or_else(|| {
                    self.error(Code::TypeError, e.span, format!("cannot transpose {a}"));
                    Ty::Unknown
                })
            }
            ExprKind::Cond { cond, then, els } => {
                self.condition(cond);
                let a = self.expr(then);
                let b = self.expr(els);
                types::join(&a, &b).unwrap_or_else(|| {
                    self.error(Code::TypeError, e.span, format!("branches have different types {a} and {b}"));
                    Ty::Unknown
                })
            }
            ExprKind::Array(items) => {
                let mut acc: Option<Ty> = None;
                for it in items {
                    let t = self.expr(it);
                    acc = Some(match acc {
                        None => t,
                        Some(prev) => types::join(&prev, &t).unwrap_or_else(|| {
                            self.error(Code::TypeError, it.span, format!("array elements have different types {prev} and {t}"));
                            Ty::Unknown
                        }),
                    });
                }
                Ty::Array(Box::new(acc.unwrap_or(Ty::Unknown)))
            }
            ExprKind::Tuple(items) => Ty::Tuple(items.iter().map(|i| self.expr(i)).collect()),
            ExprKind::Let(_) => Ty::Unknown,
        }
    }

    fn var(&mut self, n: &str, span: Span) -> Ty {
        let Some(v) = self.lookup(n).cloned() else {
            self.error(Code::TypeError, span, format!("`{n}` is not declared"));
            return Ty::Unknown;
        };
        if let Some(o) = v.origin {
            if !self.in_size {
                self.usage.scope.insert(o);
            }
            if let Context::Block(b) = self.ctx {
                if !self.scope_ok(b, o) {
                    self.error(Code::ScopeNotAllowed, span, format!("`{n}` from the {o} block is not visible in the {b} block"));
                }
            }
        }
        v.ty
    }

    /// Type a hole site against the hole's signature. `subject` is the
    /// left-hand side of a `~` site.
    fn hole(&mut self, hc: &HoleCall, kind: SiteKind, subject: Option<&Expr>) -> Ty {
        let mut args: Vec<(Ty, Span)> = Vec::new();
        if let Some(s) = subject {
            args.push((self.expr(s), s.span));
        }
        for a in &hc.args {
            args.push((self.expr(a), a.span));
        }
        let name = hc.hole.name();
        let Some(sig) = self.sigs.get(name) else {
            return Ty::Unknown;
        };
        let field = hc.hole.field().unwrap_or("");
        let Some(fs) = sig.field(field) else {
            self.error(Code::UnfilledHole, hc.span, format!("hole `{name}` has no field `{field}`"));
            return Ty::Unknown;
        };
        let shown = if field.is_empty() { name.to_string() } else { format!("{name}.{field}") };
        if fs.subject != subject.is_some() {
            let msg = if fs.subject {
                format!("`{shown}` fills a distribution and must be used as `y ~ {shown}(...)`")
            } else {
                format!("`{shown}` does not fill a distribution")
            };
            self.error(Code::ArgtypeMismatch, hc.span, msg);
        } else if fs.arg_types.len() != args.len() {
            let msg = format!("`{shown}` takes {} arguments but {} were given", fs.arg_types.len(), args.len());
            self.error(Code::ArgtypeMismatch, hc.span, msg);
        } else {
            for (k, (want, (got, sp))) in fs.arg_types.iter().zip(&args).enumerate() {
                if !assignable(want, got) {
                    self.error(Code::ArgtypeMismatch, *sp, format!("argument {} of `{shown}` expects {want}, found {got}", k + 1));
                }
            }
        }
        let (effects, scope) = (sig.effects.clone(), sig.scope.clone());
        let ret = fs.ret_type.clone();
        self.usage.effects.extend(effects.iter().copied());
        self.usage.scope.extend(scope.iter().copied());
        if let Context::Block(b) = self.ctx {
            for e in &effects {
                if !allowed_effects(b).contains(e) {
                    self.error(Code::EffectNotAllowed, hc.span, format!("`{shown}` has the {e} effect, which the {b} block does not allow"));
                }
            }
            for o in &scope {
                if !self.scope_ok(b, *o) {
                    self.error(Code::ScopeNotAllowed, hc.span, format!("`{shown}` reads {o} variables, which the {b} block cannot see"));
                }
            }
        }
        if kind == SiteKind::Expr && ret == Ty::Void {
            self.error(Code::TypeError, hc.span, format!("`{shown}` returns no value"));
        }
        ret
    }
}
