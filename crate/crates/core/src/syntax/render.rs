//! Canonical text form: two-space indentation, one statement per line,
//! blocks in grammar order, minimal parentheses, comments dropped.

use std::fmt::Write;

use super::ast::*;

pub fn render(ast: &Ast) -> String {
    let mut r = Renderer::default();
    let mut blocks: Vec<&Block> = ast.blocks.iter().collect();
    blocks.sort_by_key(|b| b.kind);
    for b in blocks {
        r.block(b);
    }
    for i in &ast.impls {
        if !r.out.is_empty() {
            r.out.push('\n');
        }
        r.impl_decl(i);
    }
    r.out
}

pub fn render_blocks(blocks: &[Block]) -> String {
    let mut r = Renderer::default();
    for b in blocks {
        r.block(b);
    }
    r.out
}

pub fn render_stmt(s: &Stmt) -> String {
    let mut r = Renderer::default();
    r.stmt(s);
    r.out.trim_end().to_string()
}

pub fn render_expr(e: &Expr) -> String {
    let mut out = String::new();
    expr(&mut out, e);
    out
}

pub fn render_type(t: &TypeExpr) -> String {
    let mut out = String::new();
    type_expr(&mut out, t);
    out
}

pub fn render_hole_ref(h: &HoleRef) -> String {
    let mut out = String::new();
    hole_ref(&mut out, h);
    out
}

pub fn render_multi_range(items: &[RangeItem]) -> String {
    let mut out = String::new();
    multi_range(&mut out, items);
    out
}

#[derive(Default)]
struct Renderer {
    out: String,
    indent: usize,
}

impl Renderer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block(&mut self, b: &Block) {
        self.line(&format!("{} {{", b.kind.keyword()));
        self.indent += 1;
        for s in &b.stmts {
            self.stmt(s);
        }
        self.indent -= 1;
        self.line("}");
    }

    fn impl_decl(&mut self, i: &ImplDecl) {
        let mut head = format!("module \"{}\" {}", i.name, i.hole);
        if let Some(ip) = &i.index_params {
            let (open, close) = match ip.kind {
                IndexParamKind::Bracket => ("[", "]"),
                IndexParamKind::Angle => ("<", ">"),
            };
            let _ = write!(head, "{open}{}{close}", ip.vars.join(", "));
        }
        if i.is_anonymous() {
            let f = &i.fields[0];
            head.push_str(&params(f));
            head.push_str(" {");
            self.line(&head);
            self.indent += 1;
            self.appends(i);
            self.field_body(f);
            self.indent -= 1;
            self.line("}");
        } else {
            head.push_str(" {");
            self.line(&head);
            self.indent += 1;
            self.appends(i);
            for f in &i.fields {
                let name = if f.name.is_empty() {
                    String::new()
                } else {
                    format!(" {}", f.name)
                };
                self.line(&format!("field{name}{} {{", params(f)));
                self.indent += 1;
                self.field_body(f);
                self.indent -= 1;
                self.line("}");
            }
            self.indent -= 1;
            self.line("}");
        }
    }

    fn appends(&mut self, i: &ImplDecl) {
        let mut blocks: Vec<&Block> = i.append.iter().collect();
        blocks.sort_by_key(|b| b.kind);
        for b in blocks {
            self.block(b);
        }
    }

    fn field_body(&mut self, f: &FieldDecl) {
        for s in &f.body {
            self.stmt(s);
        }
        if let Some(r) = &f.ret {
            self.line(&format!("return {};", render_expr(r)));
        }
    }

    fn body(&mut self, stmts: &[Stmt]) {
        self.indent += 1;
        for s in stmts {
            self.stmt(s);
        }
        self.indent -= 1;
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl { ty, name, dims, init } => {
                let mut t = render_type(ty);
                t.push(' ');
                t.push_str(name);
                if !dims.is_empty() {
                    t.push('[');
                    expr_list(&mut t, dims);
                    t.push(']');
                }
                if let Some(e) = init {
                    t.push_str(" = ");
                    expr(&mut t, e);
                }
                t.push(';');
                self.line(&t);
            }
            StmtKind::Assign { lhs, op, rhs } => {
                self.line(&format!("{} {} {};", render_expr(lhs), op.symbol(), render_expr(rhs)));
            }
            StmtKind::Tilde { lhs, dist } => {
                let d = match dist {
                    Distribution::Named { name, args } => {
                        let mut d = format!("{name}(");
                        expr_list(&mut d, args);
                        d.push(')');
                        d
                    }
                    Distribution::Hole(hc) => hole_call(hc),
                };
                self.line(&format!("{} ~ {};", render_expr(lhs), d));
            }
            StmtKind::TargetPlus(e) => self.line(&format!("target += {};", render_expr(e))),
            StmtKind::Expr(e) => self.line(&format!("{};", render_expr(e))),
            StmtKind::For { var, iter, body } => {
                let v = match var {
                    ForVar::Single(n) => n.clone(),
                    ForVar::Tuple(ns) => format!("({})", ns.join(", ")),
                };
                let it = match iter {
                    ForIter::Range(lo, hi) => format!("{}:{}", render_expr(lo), render_expr(hi)),
                    ForIter::Each(e) => render_expr(e),
                };
                self.line(&format!("for ({v} in {it}) {{"));
                self.body(body);
                self.line("}");
            }
            StmtKind::While { cond, body } => {
                self.line(&format!("while ({}) {{", render_expr(cond)));
                self.body(body);
                self.line("}");
            }
            StmtKind::If { cond, then, els } => {
                self.line(&format!("if ({}) {{", render_expr(cond)));
                self.body(then);
                let mut els = els.as_deref();
                loop {
                    match els {
                        None => {
                            self.line("}");
                            break;
                        }
                        Some([Stmt {
                            kind: StmtKind::If { cond, then, els: next },
                            ..
                        }]) => {
                            self.line(&format!("}} else if ({}) {{", render_expr(cond)));
                            self.body(then);
                            els = next.as_deref();
                        }
                        Some(stmts) => {
                            self.line("} else {");
                            self.body(stmts);
                            self.line("}");
                            break;
                        }
                    }
                }
            }
            StmtKind::Block(stmts) => {
                self.line("{");
                self.body(stmts);
                self.line("}");
            }
            StmtKind::Return(None) => self.line("return;"),
            StmtKind::Return(Some(e)) => self.line(&format!("return {};", render_expr(e))),
            StmtKind::Break => self.line("break;"),
            StmtKind::Continue => self.line("continue;"),
            StmtKind::FunDef(f) => {
                let mut head = format!("{} {}(", render_type(&f.ret), f.name);
                for (k, (t, n)) in f.params.iter().enumerate() {
                    if k > 0 {
                        head.push_str(", ");
                    }
                    let _ = write!(head, "{} {n}", render_type(t));
                }
                head.push(')');
                match &f.body {
                    None => self.line(&format!("{head};")),
                    Some(body) => {
                        self.line(&format!("{head} {{"));
                        self.body(body);
                        self.line("}");
                    }
                }
            }
            StmtKind::Inline(inl) => {
                self.line(&format!("{{ // inlined {}", inl.hole));
                self.body(&inl.stmts);
                self.line("}");
            }
        }
    }
}

fn params(f: &FieldDecl) -> String {
    let mut s = String::from("(");
    for (k, p) in f.params.iter().enumerate() {
        if k > 0 {
            s.push_str(if k == 1 && f.has_subject { " | " } else { ", " });
        }
        if let Some(t) = &p.ty {
            s.push_str(&render_type(t));
            s.push(' ');
        }
        s.push_str(&p.name);
    }
    if f.has_subject && f.params.len() == 1 {
        s.push_str(" |");
    }
    s.push(')');
    s
}

fn type_expr(out: &mut String, t: &TypeExpr) {
    if t.data_only {
        out.push_str("data ");
    }
    if !t.array_dims.is_empty() {
        out.push_str("array[");
        expr_list(out, &t.array_dims);
        out.push_str("] ");
    } else if t.unsized_array > 0 {
        out.push_str("array[");
        for _ in 1..t.unsized_array {
            out.push(',');
        }
        out.push_str("] ");
    }
    out.push_str(t.base.keyword());
    if !t.constraint.is_empty() {
        out.push('<');
        for (k, (key, v)) in t.constraint.iter().enumerate() {
            if k > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{key}=");
            expr(out, v);
        }
        out.push('>');
    }
    if !t.sizes.is_empty() {
        out.push('[');
        expr_list(out, &t.sizes);
        out.push(']');
    }
}

fn expr_list(out: &mut String, es: &[Expr]) {
    for (k, e) in es.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        expr(out, e);
    }
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Unary { .. } => PREFIX_PRECEDENCE,
        ExprKind::Cond { .. } => COND_PRECEDENCE,
        ExprKind::Let(inl) => match &inl.value {
            Some(v) => prec(v),
            None => POSTFIX_PRECEDENCE,
        },
        _ => POSTFIX_PRECEDENCE,
    }
}

fn wrapped(out: &mut String, e: &Expr, paren: bool) {
    if paren {
        out.push('(');
        expr(out, e);
        out.push(')');
    } else {
        expr(out, e);
    }
}

fn expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Real(s) => out.push_str(s),
        ExprKind::Str(s) => {
            let _ = write!(out, "\"{s}\"");
        }
        ExprKind::Var(n) => out.push_str(n),
        ExprKind::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            expr_list(out, args);
            out.push(')');
        }
        ExprKind::Hole(hc) => out.push_str(&hole_call(hc)),
        ExprKind::Index { base, indices } => {
            wrapped(out, base, prec(base) < POSTFIX_PRECEDENCE);
            out.push('[');
            for (k, ix) in indices.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                match ix {
                    Index::Single(e) => expr(out, e),
                    Index::Slice(lo, hi) => {
                        if let Some(lo) = lo {
                            expr(out, lo);
                        }
                        out.push(':');
                        if let Some(hi) = hi {
                            expr(out, hi);
                        }
                    }
                }
            }
            out.push(']');
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let lp = prec(lhs);
            let rp = prec(rhs);
            wrapped(out, lhs, lp < p || (lp == p && op.right_assoc()));
            let _ = write!(out, " {} ", op.symbol());
            wrapped(out, rhs, rp < p || (rp == p && !op.right_assoc()));
        }
        ExprKind::Unary { op, operand } => {
            out.push_str(op.symbol());
            let nested_sign = matches!(operand.kind, ExprKind::Unary { .. });
            wrapped(out, operand, prec(operand) < PREFIX_PRECEDENCE || nested_sign);
        }
        ExprKind::Transpose(inner) => {
            wrapped(out, inner, prec(inner) < POSTFIX_PRECEDENCE);
            out.push('\'');
        }
        ExprKind::Cond { cond, then, els } => {
            wrapped(out, cond, prec(cond) <= COND_PRECEDENCE);
            out.push_str(" ? ");
            expr(out, then);
            out.push_str(" : ");
            expr(out, els);
        }
        ExprKind::Array(items) => {
            out.push('{');
            expr_list(out, items);
            out.push('}');
        }
        ExprKind::Tuple(items) => {
            out.push('(');
            expr_list(out, items);
            out.push(')');
        }
        ExprKind::Let(inl) => {
            let _ = write!(out, "__inline_{}(", inl.hole);
            if let Some(v) = &inl.value {
                expr(out, v);
            }
            out.push(')');
        }
    }
}

fn hole_call(hc: &HoleCall) -> String {
    let mut s = render_hole_ref(&hc.hole);
    s.push('(');
    expr_list(&mut s, &hc.args);
    s.push(')');
    s
}

fn hole_ref(out: &mut String, h: &HoleRef) {
    for (k, op) in h.operands.iter().enumerate() {
        if k > 0 {
            out.push('*');
        }
        out.push_str(&op.name);
        if let Some(f) = &op.field {
            out.push('.');
            out.push_str(f);
        }
        if let Some(r) = &op.index {
            out.push('[');
            multi_range(out, r);
            out.push(']');
        }
        if let Some(inst) = &op.instance {
            out.push_str(if inst.copy { "<<" } else { "<" });
            multi_range(out, &inst.range);
            out.push_str(if inst.copy { ">>" } else { ">" });
        }
        if let Some(p) = &op.power {
            power(out, p);
        }
    }
    if h.collection {
        out.push('+');
    }
}

fn power(out: &mut String, p: &Power) {
    let _ = write!(out, "^{}{}", p.kind.prefix(), p.n);
}

fn multi_range(out: &mut String, items: &[RangeItem]) {
    for (k, it) in items.iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        match it {
            RangeItem::Range { lo, hi } => {
                let _ = write!(out, "{lo}..{hi}");
            }
            RangeItem::Index(v) => {
                let _ = write!(out, "{v}");
            }
            RangeItem::Var(v) => out.push_str(v),
            RangeItem::Power { lo, hi, power: p } => {
                let _ = write!(out, "({lo}..{hi})");
                power(out, p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse, parse_expr};
    use super::*;

    fn roundtrip_expr(s: &str) -> String {
        render_expr(&parse_expr(s).unwrap())
    }

    #[test]
    fn parentheses_follow_precedence() {
        assert_eq!(roundtrip_expr("a + b*x"), "a + b * x");
        assert_eq!(roundtrip_expr("(a + b)*x"), "(a + b) * x");
        assert_eq!(roundtrip_expr("a - (b - c)"), "a - (b - c)");
        assert_eq!(roundtrip_expr("(a - b) - c"), "a - b - c");
        assert_eq!(roundtrip_expr("(-a)^2"), "(-a) ^ 2");
        assert_eq!(roundtrip_expr("-a^2"), "-a ^ 2");
        assert_eq!(roundtrip_expr("a^b^c"), "a ^ b ^ c");
        assert_eq!(roundtrip_expr("(a^b)^c"), "(a ^ b) ^ c");
        assert_eq!(roundtrip_expr("(1.68 / 2) / 12"), "1.68 / 2 / 12");
        assert_eq!(roundtrip_expr("x[n,:]"), "x[n, :]");
        assert_eq!(roundtrip_expr("(a + b)'"), "(a + b)'");
    }

    #[test]
    fn mean_stddev_model_line() {
        let ast = parse("data { int N; vector[N] x; } model { x ~ normal(Mean(), Stddev()); }").unwrap();
        let text = render(&ast);
        assert!(text.contains("  x ~ normal(Mean(), Stddev());\n"), "{text}");
    }

    #[test]
    fn no_modules_renders_no_module_keyword() {
        let ast = parse("data { int N; } model { }").unwrap();
        assert!(!render(&ast).contains("module"));
    }

    #[test]
    fn blocks_and_modules_roundtrip() {
        let src = r#"
functions { real twice(real x) { return 2 * x; } }
data { int J; int n[J]; array[J] int y; matrix[100, J] x; }
parameters { real<lower=0, upper=10> s; }
model {
  if (J > 1) { s ~ normal(0, 1); } else if (J < 0) { target += 1; } else { s ~ normal(1, 1); }
  for (j in 1:J) { y[j] ~ binomial(n[j], 0.5); }
  for ((t, r) in Theta*Col[1..3]+()) { target += t; }
  y ~ NS(n, P.fwd(x[1, :]));
}
module "b" NS(y | n, p) { y ~ binomial(n, p); }
module "a" P { parameters { real a; } field fwd(row_vector v) { return a * v; } }
module "f" Col[n]() { return n; }
module "t" Theta() { return 1; }
"#;
        let ast = parse(src).unwrap();
        let text = render(&ast);
        let again = parse(&text).unwrap();
        assert_eq!(ast, again, "{text}");
        assert_eq!(render(&again), text);
    }
}
