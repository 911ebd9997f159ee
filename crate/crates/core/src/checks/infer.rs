//! Signature inference over the hole dependency order, and the semantic
//! checks that use the inferred signatures.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::structure::hole_dependencies;
use super::types::{join, Ty};
use super::typing::{Context, Typer, Usage, Var};
use super::{tidy, Code, Diagnostic, FieldSignature, HoleSignature, Signatures};
use crate::program::{Implementation, ModularProgram};
use crate::syntax::{BlockKind, Expr, FieldDecl, Stmt, StmtKind};

/// Variable types visible to a body, for `return_type`.
pub type TypeEnv = HashMap<String, Ty>;

/// Type of `ret` after running `body` under `env`; void when there is no
/// return expression.
pub fn return_type(env: &TypeEnv, sigs: &Signatures, body: &[Stmt], ret: Option<&Expr>) -> Result<Ty, Diagnostic> {
    let globals = env
        .iter()
        .map(|(k, t)| (k.clone(), Var { ty: t.clone(), origin: None }))
        .collect();
    let functions = HashMap::new();
    let mut t = Typer::new(sigs, &functions, globals, Context::Body);
    t.push();
    t.stmts(body);
    let ty = ret.map(|e| t.expr(e)).unwrap_or(Ty::Void);
    match t.diags.into_iter().next() {
        Some(d) => Err(d),
        None => Ok(ty),
    }
}

struct Globals {
    base: HashMap<String, Var>,
    functions: HashMap<String, Ty>,
}

fn decl_types(stmts: &[Stmt], origin: BlockKind, out: &mut HashMap<String, Var>) {
    for s in stmts {
        if let StmtKind::Decl { ty, name, dims, .. } = &s.kind {
            out.insert(
                name.clone(),
                Var {
                    ty: Ty::from_type_expr(ty).with_dims(dims.len()),
                    origin: Some(origin),
                },
            );
        }
    }
}

fn function_types(stmts: &[Stmt], out: &mut HashMap<String, Ty>) {
    for s in stmts {
        if let StmtKind::FunDef(f) = &s.kind {
            out.insert(f.name.clone(), Ty::from_type_expr(&f.ret));
        }
    }
}

impl Globals {
    fn new(p: &ModularProgram) -> Globals {
        let mut base = HashMap::new();
        let mut functions = HashMap::new();
        for b in p.base() {
            if b.kind.declares_globals() {
                decl_types(&b.stmts, b.kind, &mut base);
            }
            if b.kind == BlockKind::Functions {
                function_types(&b.stmts, &mut functions);
            }
        }
        for i in p.impls() {
            if let Some(b) = i.append_block(BlockKind::Functions) {
                function_types(&b.stmts, &mut functions);
            }
        }
        Globals { base, functions }
    }

    /// Base globals plus the implementation's own append-block globals,
    /// leaving out the append block `skip` (declared progressively instead).
    fn for_impl(&self, imp: &Implementation, skip: Option<BlockKind>) -> HashMap<String, Var> {
        let mut g = self.base.clone();
        for b in &imp.append {
            if b.kind.declares_globals() && Some(b.kind) != skip {
                decl_types(&b.stmts, b.kind, &mut g);
            }
        }
        g
    }

    /// Base globals outside block `kind`.
    fn for_block(&self, kind: BlockKind) -> HashMap<String, Var> {
        self.base
            .iter()
            .filter(|(_, v)| v.origin != Some(kind))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

/// Declared parameter types, falling back to `fallback` for untyped ones.
fn param_types(f: &FieldDecl, fallback: Option<&[Ty]>) -> Vec<Ty> {
    f.params
        .iter()
        .enumerate()
        .map(|(k, prm)| match &prm.ty {
            Some(t) => Ty::from_type_expr(t),
            None => fallback.and_then(|fb| fb.get(k)).cloned().unwrap_or(Ty::Unknown),
        })
        .collect()
}

struct FieldResult {
    ret: Ty,
    usage: Usage,
    diags: Vec<Diagnostic>,
}

fn type_field(g: &Globals, sigs: &Signatures, imp: &Implementation, f: &FieldDecl, args: &[Ty]) -> FieldResult {
    let mut t = Typer::new(sigs, &g.functions, g.for_impl(imp, None), Context::Body);
    t.push();
    for (prm, ty) in f.params.iter().zip(args) {
        t.declare(&prm.name, ty.clone(), None, prm.span);
    }
    t.push();
    t.stmts(&f.body);
    let ret = f.ret.as_ref().map(|e| t.expr(e)).unwrap_or(Ty::Void);
    FieldResult {
        ret,
        usage: t.usage,
        diags: t.diags,
    }
}

/// Holes ordered so every hole precedes the holes its implementations call,
/// breaking ties by name. Assumes the dependencies are acyclic.
fn default_order(p: &ModularProgram) -> Vec<String> {
    let deps = hole_dependencies(p);
    let mut indeg: BTreeMap<&str, usize> = deps.keys().map(|k| (k.as_str(), 0)).collect();
    for cs in deps.values() {
        for c in cs {
            *indeg.get_mut(c.as_str()).unwrap() += 1;
        }
    }
    let mut ready: BTreeSet<&str> = indeg.iter().filter(|(_, &d)| d == 0).map(|(k, _)| *k).collect();
    let mut out = Vec::new();
    while let Some(h) = ready.pop_first() {
        out.push(h.to_string());
        for c in &deps[h] {
            let d = indeg.get_mut(c.as_str()).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(c);
            }
        }
    }
    out
}

pub fn infer_signatures(p: &ModularProgram) -> Result<Signatures, Vec<Diagnostic>> {
    infer_signatures_in(p, &default_order(p))
}

/// Inference visiting holes in `order`, which must list every hole after
/// all holes whose implementations call it.
pub fn infer_signatures_in(p: &ModularProgram, order: &[String]) -> Result<Signatures, Vec<Diagnostic>> {
    let g = Globals::new(p);
    let mut sigs = Signatures::new();
    let mut diags = Vec::new();
    for h in order.iter().rev() {
        let impls: Vec<&Implementation> = p.impls_of(h).collect();
        let Some(first) = impls.first() else { continue };
        let mut fields: BTreeMap<String, FieldSignature> = BTreeMap::new();
        let mut effects = BTreeSet::new();
        let mut scope = BTreeSet::new();
        for f in &first.fields {
            fields.insert(
                f.name.clone(),
                FieldSignature {
                    arg_types: param_types(f, None),
                    ret_type: Ty::Void,
                    subject: f.has_subject,
                },
            );
        }
        for (k, imp) in impls.iter().enumerate() {
            for f in &imp.fields {
                let fallback = fields.get(&f.name).map(|s| s.arg_types.clone());
                let args = param_types(f, fallback.as_deref());
                let r = type_field(&g, &sigs, imp, f, &args);
                diags.extend(r.diags);
                effects.extend(r.usage.effects);
                scope.extend(r.usage.scope);
                if let Some(fs) = fields.get_mut(&f.name) {
                    if k == 0 {
                        fs.ret_type = r.ret;
                    } else if let Some(j) = join(&fs.ret_type, &r.ret) {
                        fs.ret_type = j;
                    }
                }
            }
        }
        sigs.insert(h.clone(), HoleSignature { fields, effects, scope });
    }
    if diags.is_empty() {
        Ok(sigs)
    } else {
        Err(tidy(diags))
    }
}

pub fn validate_semantics(p: &ModularProgram, sigs: &Signatures) -> Result<(), Vec<Diagnostic>> {
    let g = Globals::new(p);
    let mut diags = Vec::new();

    for imp in p.impls() {
        let Some(sig) = sigs.get(&imp.hole) else { continue };
        let mine: BTreeSet<&String> = imp.fields.iter().map(|f| &f.name).collect();
        let theirs: BTreeSet<&String> = sig.fields.keys().collect();
        if mine != theirs {
            let msg = format!("`{}` does not have the same fields as the other implementations of `{}`", imp.id(), imp.hole);
            diags.push(Diagnostic::new(Code::ArgtypeMismatch, imp.span, msg));
        }
        for f in &imp.fields {
            let Some(fs) = sig.field(&f.name) else { continue };
            let shown = if f.name.is_empty() { imp.id() } else { format!("{}.{}", imp.id(), f.name) };
            let own = param_types(f, Some(&fs.arg_types));
            if own.len() != fs.arg_types.len() || f.has_subject != fs.subject {
                let msg = format!("`{shown}` takes {} arguments but the signature of `{}` has {}", own.len(), imp.hole, fs.arg_types.len());
                diags.push(Diagnostic::new(Code::ArgtypeMismatch, f.span, msg));
            } else {
                for (k, (a, b)) in own.iter().zip(&fs.arg_types).enumerate() {
                    if !a.is_unknown() && !b.is_unknown() && a != b {
                        let msg = format!("parameter {} of `{shown}` is {a} but the signature of `{}` has {b}", k + 1, imp.hole);
                        diags.push(Diagnostic::new(Code::ArgtypeMismatch, f.params[k].span, msg));
                    }
                }
            }
            let r = type_field(&g, sigs, imp, f, &own);
            diags.extend(r.diags);
            let agrees = match (&fs.ret_type, &r.ret) {
                (Ty::Void, Ty::Void) => true,
                (Ty::Void, _) | (_, Ty::Void) => false,
                (a, b) => join(a, b).is_some(),
            };
            if !agrees {
                let span = f.ret.as_ref().map(|e| e.span).unwrap_or(f.span);
                let msg = format!("`{shown}` returns {} but the signature of `{}` returns {}", r.ret, imp.hole, fs.ret_type);
                diags.push(Diagnostic::new(Code::RettypeMismatch, span, msg));
            }
        }
        for b in &imp.append {
            let mut t = Typer::new(sigs, &g.functions, g.for_impl(imp, Some(b.kind)), Context::Block(b.kind));
            t.push();
            t.block(b.kind, &b.stmts);
            diags.extend(t.diags);
        }
    }

    for b in p.base() {
        let mut t = Typer::new(sigs, &g.functions, g.for_block(b.kind), Context::Block(b.kind));
        t.push();
        t.block(b.kind, &b.stmts);
        diags.extend(t.diags);
    }

    if diags.is_empty() {
        Ok(())
    } else {
        Err(tidy(diags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::Effect;
    use crate::syntax::{parse, parse_expr};

    fn program(src: &str) -> ModularProgram {
        ModularProgram::from_ast(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn literal_and_indexing_return_types() {
        let sigs = Signatures::new();
        let env = TypeEnv::new();
        let zero = parse_expr("0").unwrap();
        assert_eq!(return_type(&env, &sigs, &[], Some(&zero)), Ok(Ty::Int));
        let env = TypeEnv::from([("theta".to_string(), Ty::Real), ("x".to_string(), Ty::Matrix), ("n".to_string(), Ty::Int)]);
        let e = parse_expr("theta*x[n,:]").unwrap();
        assert_eq!(return_type(&env, &sigs, &[], Some(&e)), Ok(Ty::RowVector));
        assert_eq!(return_type(&env, &sigs, &[], None), Ok(Ty::Void));
        let bad = parse_expr("x * x[n]").unwrap();
        assert_eq!(return_type(&env, &sigs, &[], Some(&bad)).unwrap_err().code, Code::TypeError);
    }

    #[test]
    fn order_independence() {
        let src = r#"
data { real x; }
model { x ~ normal(A(), B()); }
module "a1" A() { return C() + D(); }
module "b1" B() { return D(); }
module "c1" C() { real z = normal_rng(0, 1); return z; }
module "d1" D() { parameters { real<lower=0> s; } s ~ normal(0, 1); return s; }
"#;
        let p = program(src);
        let a = infer_signatures(&p).unwrap();
        for order in [["A", "B", "C", "D"], ["B", "A", "D", "C"], ["A", "C", "B", "D"]] {
            let order: Vec<String> = order.iter().map(|s| s.to_string()).collect();
            assert_eq!(infer_signatures_in(&p, &order).unwrap(), a);
        }
        assert_eq!(a["A"].effects, BTreeSet::from([Effect::Rng, Effect::Lpdf]));
        assert_eq!(a["B"].scope, BTreeSet::from([BlockKind::Parameters]));
    }

    #[test]
    fn return_type_disagreement() {
        let src = "data { vector[3] v; } model { H(); } module \"a\" H() { return 1; } module \"b\" H() { return v; }";
        let p = program(src);
        let sigs = infer_signatures(&p).unwrap();
        let err = validate_semantics(&p, &sigs).unwrap_err();
        assert_eq!(err.iter().map(|d| d.code).collect::<Vec<_>>(), vec![Code::RettypeMismatch]);
    }

    #[test]
    fn int_and_real_returns_agree() {
        let src = "data { real r; } model { r ~ normal(H(), 1); } module \"a\" H() { return 1; } module \"b\" H() { return 2.5; }";
        let p = program(src);
        let sigs = infer_signatures(&p).unwrap();
        assert_eq!(*sigs["H"].ret_type(), Ty::Real);
        validate_semantics(&p, &sigs).unwrap();
    }

    #[test]
    fn subject_sites() {
        let src = r#"
data { int y; int n; }
model { y ~ Lik(n); }
module "binomial" Lik(y | n) { y ~ binomial(n, 0.5); }
"#;
        let p = program(src);
        let sigs = infer_signatures(&p).unwrap();
        validate_semantics(&p, &sigs).unwrap();
        let bad = program(&src.replace("y ~ Lik(n);", "Lik(n);"));
        let sigs = infer_signatures(&bad).unwrap();
        assert_eq!(validate_semantics(&bad, &sigs).unwrap_err()[0].code, Code::ArgtypeMismatch);
    }

    #[test]
    fn typed_argument_checks() {
        let src = "data { vector[2] v; } model { v ~ normal(H(v), 1); } module \"a\" H(real z) { return z; }";
        let p = program(src);
        let sigs = infer_signatures(&p).unwrap();
        assert_eq!(validate_semantics(&p, &sigs).unwrap_err()[0].code, Code::ArgtypeMismatch);
    }

    #[test]
    fn scope_of_hole_in_transformed_data() {
        let src = r#"
transformed data { real z = Mean(); }
module "p" Mean() { parameters { real mu; } return mu; }
"#;
        let p = program(src);
        let sigs = infer_signatures(&p).unwrap();
        assert_eq!(validate_semantics(&p, &sigs).unwrap_err()[0].code, Code::ScopeNotAllowed);
    }
}
