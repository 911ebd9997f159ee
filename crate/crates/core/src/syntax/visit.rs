//! Tree traversals shared by the checker, concretizer and macro expander.

use super::ast::*;

/// How a hole call is used at its site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteKind {
    /// Inside an expression.
    Expr,
    /// `H(args);`
    Stmt,
    /// `y ~ H(args);` where `y` becomes the first argument.
    Tilde,
}

/// Visit every expression in pre-order, descending into statements.
pub fn each_expr_in_stmts<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Expr)) {
    for s in stmts {
        each_expr_in_stmt(s, f);
    }
}

pub fn each_expr_in_stmt<'a>(s: &'a Stmt, f: &mut impl FnMut(&'a Expr)) {
    match &s.kind {
        StmtKind::Decl { ty, dims, init, .. } => {
            each_expr_in_type(ty, f);
            dims.iter().for_each(|e| each_expr(e, f));
            if let Some(e) = init {
                each_expr(e, f);
            }
        }
        StmtKind::Assign { lhs, rhs, .. } => {
            each_expr(lhs, f);
            each_expr(rhs, f);
        }
        StmtKind::Tilde { lhs, dist } => {
            each_expr(lhs, f);
            match dist {
                Distribution::Named { args, .. } => args.iter().for_each(|e| each_expr(e, f)),
                Distribution::Hole(hc) => hc.args.iter().for_each(|e| each_expr(e, f)),
            }
        }
        StmtKind::TargetPlus(e) | StmtKind::Expr(e) => each_expr(e, f),
        StmtKind::Return(e) => {
            if let Some(e) = e {
                each_expr(e, f);
            }
        }
        StmtKind::For { iter, body, .. } => {
            match iter {
                ForIter::Range(a, b) => {
                    each_expr(a, f);
                    each_expr(b, f);
                }
                ForIter::Each(e) => each_expr(e, f),
            }
            each_expr_in_stmts(body, f);
        }
        StmtKind::While { cond, body } => {
            each_expr(cond, f);
            each_expr_in_stmts(body, f);
        }
        StmtKind::If { cond, then, els } => {
            each_expr(cond, f);
            each_expr_in_stmts(then, f);
            if let Some(e) = els {
                each_expr_in_stmts(e, f);
            }
        }
        StmtKind::Block(b) => each_expr_in_stmts(b, f),
        StmtKind::FunDef(fd) => {
            if let Some(b) = &fd.body {
                each_expr_in_stmts(b, f);
            }
        }
        StmtKind::Break | StmtKind::Continue => {}
        StmtKind::Inline(inl) => each_expr_in_inlined(inl, f),
    }
}

fn each_expr_in_inlined<'a>(inl: &'a Inlined, f: &mut impl FnMut(&'a Expr)) {
    for (_, a) in &inl.bindings {
        each_expr(a, f);
    }
    each_expr_in_stmts(&inl.stmts, f);
    if let Some(v) = &inl.value {
        each_expr(v, f);
    }
}

pub fn each_expr_in_type<'a>(t: &'a TypeExpr, f: &mut impl FnMut(&'a Expr)) {
    t.constraint.iter().for_each(|(_, e)| each_expr(e, f));
    t.sizes.iter().for_each(|e| each_expr(e, f));
    t.array_dims.iter().for_each(|e| each_expr(e, f));
}

pub fn each_expr<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
    f(e);
    match &e.kind {
        ExprKind::Int(_) | ExprKind::Real(_) | ExprKind::Str(_) | ExprKind::Var(_) => {}
        ExprKind::Call { args, .. } => args.iter().for_each(|a| each_expr(a, f)),
        ExprKind::Hole(hc) => hc.args.iter().for_each(|a| each_expr(a, f)),
        ExprKind::Index { base, indices } => {
            each_expr(base, f);
            for ix in indices {
                match ix {
                    Index::Single(e) => each_expr(e, f),
                    Index::Slice(a, b) => {
                        if let Some(a) = a {
                            each_expr(a, f);
                        }
                        if let Some(b) = b {
                            each_expr(b, f);
                        }
                    }
                }
            }
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            each_expr(lhs, f);
            each_expr(rhs, f);
        }
        ExprKind::Unary { operand, .. } => each_expr(operand, f),
        ExprKind::Transpose(x) => each_expr(x, f),
        ExprKind::Cond { cond, then, els } => {
            each_expr(cond, f);
            each_expr(then, f);
            each_expr(els, f);
        }
        ExprKind::Array(items) | ExprKind::Tuple(items) => items.iter().for_each(|a| each_expr(a, f)),
        ExprKind::Let(inl) => each_expr_in_inlined(inl, f),
    }
}

/// Every hole call in `stmts` with how it is used, in source order.
pub fn hole_calls_in_stmts<'a>(stmts: &'a [Stmt], out: &mut Vec<(&'a HoleCall, SiteKind)>) {
    for s in stmts {
        hole_calls_in_stmt(s, out);
    }
}

pub fn hole_calls_in_stmt<'a>(s: &'a Stmt, out: &mut Vec<(&'a HoleCall, SiteKind)>) {
    let exprs = |e: &'a Expr, out: &mut Vec<(&'a HoleCall, SiteKind)>| {
        each_expr(e, &mut |x| {
            if let ExprKind::Hole(hc) = &x.kind {
                out.push((hc, SiteKind::Expr));
            }
        })
    };
    match &s.kind {
        StmtKind::Expr(Expr {
            kind: ExprKind::Hole(hc),
            ..
        }) => {
            out.push((hc, SiteKind::Stmt));
            for a in &hc.args {
                exprs(a, out);
            }
        }
        StmtKind::Tilde {
            lhs,
            dist: Distribution::Hole(hc),
        } => {
            exprs(lhs, out);
            out.push((hc, SiteKind::Tilde));
            for a in &hc.args {
                exprs(a, out);
            }
        }
        StmtKind::For { iter, body, .. } => {
            match iter {
                ForIter::Range(a, b) => {
                    exprs(a, out);
                    exprs(b, out);
                }
                ForIter::Each(e) => exprs(e, out),
            }
            hole_calls_in_stmts(body, out);
        }
        StmtKind::While { cond, body } => {
            exprs(cond, out);
            hole_calls_in_stmts(body, out);
        }
        StmtKind::If { cond, then, els } => {
            exprs(cond, out);
            hole_calls_in_stmts(then, out);
            if let Some(e) = els {
                hole_calls_in_stmts(e, out);
            }
        }
        StmtKind::Block(b) => hole_calls_in_stmts(b, out),
        StmtKind::FunDef(fd) => {
            if let Some(b) = &fd.body {
                hole_calls_in_stmts(b, out);
            }
        }
        StmtKind::Inline(inl) => {
            for (_, a) in &inl.bindings {
                exprs(a, out);
            }
            hole_calls_in_stmts(&inl.stmts, out);
            if let Some(v) = &inl.value {
                exprs(v, out);
            }
        }
        _ => each_expr_in_stmt(s, &mut |x| {
            if let ExprKind::Hole(hc) = &x.kind {
                out.push((hc, SiteKind::Expr));
            }
        }),
    }
}

pub fn hole_calls_in_expr<'a>(e: &'a Expr, out: &mut Vec<(&'a HoleCall, SiteKind)>) {
    each_expr(e, &mut |x| {
        if let ExprKind::Hole(hc) = &x.kind {
            out.push((hc, SiteKind::Expr));
        }
    });
}

/// Apply `f` to every expression slot bottom-up. `f` may replace the node.
pub fn map_exprs_in_stmts(stmts: &mut [Stmt], f: &mut impl FnMut(&mut Expr)) {
    for s in stmts {
        map_exprs_in_stmt(s, f);
    }
}

pub fn map_exprs_in_stmt(s: &mut Stmt, f: &mut impl FnMut(&mut Expr)) {
    match &mut s.kind {
        StmtKind::Decl { ty, dims, init, .. } => {
            map_exprs_in_type(ty, f);
            dims.iter_mut().for_each(|e| map_expr(e, f));
            if let Some(e) = init {
                map_expr(e, f);
            }
        }
        StmtKind::Assign { lhs, rhs, .. } => {
            map_expr(lhs, f);
            map_expr(rhs, f);
        }
        StmtKind::Tilde { lhs, dist } => {
            map_expr(lhs, f);
            match dist {
                Distribution::Named { args, .. } => args.iter_mut().for_each(|e| map_expr(e, f)),
                Distribution::Hole(hc) => hc.args.iter_mut().for_each(|e| map_expr(e, f)),
            }
        }
        StmtKind::TargetPlus(e) | StmtKind::Expr(e) => map_expr(e, f),
        StmtKind::Return(e) => {
            if let Some(e) = e {
                map_expr(e, f);
            }
        }
        StmtKind::For { iter, body, .. } => {
            match iter {
                ForIter::Range(a, b) => {
                    map_expr(a, f);
                    map_expr(b, f);
                }
                ForIter::Each(e) => map_expr(e, f),
            }
            map_exprs_in_stmts(body, f);
        }
        StmtKind::While { cond, body } => {
            map_expr(cond, f);
            map_exprs_in_stmts(body, f);
        }
        StmtKind::If { cond, then, els } => {
            map_expr(cond, f);
            map_exprs_in_stmts(then, f);
            if let Some(e) = els {
                map_exprs_in_stmts(e, f);
            }
        }
        StmtKind::Block(b) => map_exprs_in_stmts(b, f),
        StmtKind::FunDef(fd) => {
            if let Some(b) = &mut fd.body {
                map_exprs_in_stmts(b, f);
            }
        }
        StmtKind::Break | StmtKind::Continue => {}
        StmtKind::Inline(inl) => map_exprs_in_inlined(inl, f),
    }
}

fn map_exprs_in_inlined(inl: &mut Inlined, f: &mut impl FnMut(&mut Expr)) {
    for (_, a) in &mut inl.bindings {
        map_expr(a, f);
    }
    map_exprs_in_stmts(&mut inl.stmts, f);
    if let Some(v) = &mut inl.value {
        map_expr(v, f);
    }
}

pub fn map_exprs_in_type(t: &mut TypeExpr, f: &mut impl FnMut(&mut Expr)) {
    t.constraint.iter_mut().for_each(|(_, e)| map_expr(e, f));
    t.sizes.iter_mut().for_each(|e| map_expr(e, f));
    t.array_dims.iter_mut().for_each(|e| map_expr(e, f));
}

pub fn map_expr(e: &mut Expr, f: &mut impl FnMut(&mut Expr)) {
    match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Real(_) | ExprKind::Str(_) | ExprKind::Var(_) => {}
        ExprKind::Call { args, .. } => args.iter_mut().for_each(|a| map_expr(a, f)),
        ExprKind::Hole(hc) => hc.args.iter_mut().for_each(|a| map_expr(a, f)),
        ExprKind::Index { base, indices } => {
            map_expr(base, f);
            for ix in indices {
                match ix {
                    Index::Single(e) => map_expr(e, f),
                    Index::Slice(a, b) => {
                        if let Some(a) = a {
                            map_expr(a, f);
                        }
                        if let Some(b) = b {
                            map_expr(b, f);
                        }
                    }
                }
            }
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            map_expr(lhs, f);
            map_expr(rhs, f);
        }
        ExprKind::Unary { operand, .. } => map_expr(operand, f),
        ExprKind::Transpose(x) => map_expr(x, f),
        ExprKind::Cond { cond, then, els } => {
            map_expr(cond, f);
            map_expr(then, f);
            map_expr(els, f);
        }
        ExprKind::Array(items) | ExprKind::Tuple(items) => items.iter_mut().for_each(|a| map_expr(a, f)),
        ExprKind::Let(inl) => map_exprs_in_inlined(inl, f),
    }
    f(e);
}

/// Rename variables (uses and declarations) according to `rename`.
/// Function names are left alone unless listed in `functions`.
pub fn rename_vars_in_stmts(stmts: &mut [Stmt], rename: &dyn Fn(&str) -> Option<String>) {
    for s in stmts.iter_mut() {
        rename_in_stmt(s, rename);
    }
}

fn rename_in_stmt(s: &mut Stmt, rename: &dyn Fn(&str) -> Option<String>) {
    match &mut s.kind {
        StmtKind::Decl { name, .. } => {
            if let Some(n) = rename(name) {
                *name = n;
            }
        }
        StmtKind::For { var, body, .. } => {
            match var {
                ForVar::Single(n) => {
                    if let Some(r) = rename(n) {
                        *n = r;
                    }
                }
                ForVar::Tuple(ns) => {
                    for n in ns {
                        if let Some(r) = rename(n) {
                            *n = r;
                        }
                    }
                }
            }
            rename_vars_in_stmts(body, rename);
        }
        StmtKind::While { body, .. } => rename_vars_in_stmts(body, rename),
        StmtKind::If { then, els, .. } => {
            rename_vars_in_stmts(then, rename);
            if let Some(e) = els {
                rename_vars_in_stmts(e, rename);
            }
        }
        StmtKind::Block(b) => rename_vars_in_stmts(b, rename),
        StmtKind::FunDef(fd) => {
            if let Some(n) = rename(&fd.name) {
                fd.name = n;
            }
        }
        StmtKind::Inline(inl) => rename_vars_in_stmts(&mut inl.stmts, rename),
        _ => {}
    }
    map_exprs_in_stmt(s, &mut |e| rename_expr_node(e, rename));
}

pub fn rename_vars_in_expr(e: &mut Expr, rename: &dyn Fn(&str) -> Option<String>) {
    map_expr(e, &mut |x| rename_expr_node(x, rename));
}

fn rename_expr_node(e: &mut Expr, rename: &dyn Fn(&str) -> Option<String>) {
    match &mut e.kind {
        ExprKind::Var(n) => {
            if let Some(r) = rename(n) {
                *n = r;
            }
        }
        ExprKind::Call { name, .. } => {
            if let Some(r) = rename(name) {
                *name = r;
            }
        }
        ExprKind::Let(inl) => rename_vars_in_stmts(&mut inl.stmts, rename),
        _ => {}
    }
}

/// Names declared at the top level of `stmts` (declarations and function definitions).
pub fn top_level_decls(stmts: &[Stmt]) -> Vec<String> {
    stmts
        .iter()
        .filter_map(|s| match &s.kind {
            StmtKind::Decl { name, .. } => Some(name.clone()),
            StmtKind::FunDef(f) => Some(f.name.clone()),
            _ => None,
        })
        .collect()
}

/// Every name declared anywhere in `stmts`, including nested scopes and loop variables.
pub fn all_decls(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Decl { name, .. } => out.push(name.clone()),
            StmtKind::For { var, body, .. } => {
                out.extend(var.names().into_iter().map(String::from));
                all_decls(body, out);
            }
            StmtKind::While { body, .. } => all_decls(body, out),
            StmtKind::If { then, els, .. } => {
                all_decls(then, out);
                if let Some(e) = els {
                    all_decls(e, out);
                }
            }
            StmtKind::Block(b) => all_decls(b, out),
            StmtKind::Inline(inl) => all_decls(&inl.stmts, out),
            _ => {}
        }
    }
}

/// Every variable name referenced in `stmts`.
pub fn referenced_vars(stmts: &[Stmt], out: &mut std::collections::BTreeSet<String>) {
    each_expr_in_stmts(stmts, &mut |e| {
        if let ExprKind::Var(n) = &e.kind {
            out.insert(n.clone());
        }
    });
}
