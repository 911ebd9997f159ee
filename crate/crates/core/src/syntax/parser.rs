//! Recursive-descent parser.
//!
//! Hole sites look like function calls. A call is treated as a hole when its
//! name is the hole of some `module` declaration, or when it starts with an
//! uppercase letter and is neither a user function nor an uppercase builtin
//! such as `Phi`. The second rule lets programs with unfilled holes parse so
//! that the checker can report them.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

const UPPERCASE_BUILTINS: &[&str] = &["Phi", "Phi_approx"];

const TYPE_KEYWORDS: &[&str] = &[
    "int",
    "real",
    "complex",
    "vector",
    "row_vector",
    "matrix",
    "simplex",
    "unit_vector",
    "ordered",
    "positive_ordered",
    "sum_to_zero_vector",
    "cholesky_factor_corr",
    "cholesky_factor_cov",
    "corr_matrix",
    "cov_matrix",
    "array",
];

/// Parse a modular program.
pub fn parse(src: &str) -> Result<Ast, SyntaxError> {
    let toks = tokenize(src)?;
    let (holes, functions) = prescan(&toks);
    let mut p = Parser {
        toks,
        pos: 0,
        holes,
        functions,
        no_gt: false,
    };
    p.program()
}

/// Parse a single expression (used by tests and tooling).
pub fn parse_expr(src: &str) -> Result<Expr, SyntaxError> {
    let toks = tokenize(src)?;
    let (holes, functions) = prescan(&toks);
    let mut p = Parser {
        toks,
        pos: 0,
        holes,
        functions,
        no_gt: false,
    };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Hole names from `module "x" H` headers and function names from every
/// `functions { ... }` block.
fn prescan(toks: &[Token]) -> (HashSet<String>, HashSet<String>) {
    let mut holes = HashSet::new();
    let mut functions = HashSet::new();
    let mut depth = 0usize;
    let mut paren = 0usize;
    let mut fn_depth: Vec<usize> = Vec::new();
    for (k, t) in toks.iter().enumerate() {
        match &t.tok {
            Tok::Ident(m) if m == "module" => {
                if let (Some(Tok::Str(_)), Some(Tok::Ident(h))) =
                    (toks.get(k + 1).map(|t| &t.tok), toks.get(k + 2).map(|t| &t.tok))
                {
                    holes.insert(h.clone());
                }
            }
            Tok::Ident(f) if f == "functions" && matches!(toks.get(k + 1).map(|t| &t.tok), Some(Tok::LBrace)) => {
                fn_depth.push(depth + 1);
            }
            Tok::Ident(name) => {
                if fn_depth.last() == Some(&depth)
                    && paren == 0
                    && matches!(toks.get(k + 1).map(|t| &t.tok), Some(Tok::LParen))
                {
                    functions.insert(name.clone());
                }
            }
            Tok::LBrace => depth += 1,
            Tok::RBrace => {
                if fn_depth.last() == Some(&depth) {
                    fn_depth.pop();
                }
                depth = depth.saturating_sub(1);
            }
            Tok::LParen => paren += 1,
            Tok::RParen => paren = paren.saturating_sub(1),
            _ => {}
        }
    }
    (holes, functions)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    holes: HashSet<String>,
    functions: HashSet<String>,
    /// Inside `<...>` constraints `>` closes the annotation.
    no_gt: bool,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn at_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, message: impl Into<String>, expected: &[&str]) -> PResult<T> {
        Err(SyntaxError::new(
            self.span(),
            message,
            expected.iter().map(|s| s.to_string()).collect(),
        ))
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        let found = self.peek().describe();
        self.err(format!("unexpected {found}"), expected)
    }

    fn expect(&mut self, t: Tok) -> PResult<Span> {
        if self.at(&t) {
            Ok(self.bump().span)
        } else {
            let want = format!("`{}`", t.text());
            let found = self.peek().describe();
            self.err(format!("expected {want}, found {found}"), &[&want])
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if self.at(&Tok::Eof) {
            Ok(())
        } else {
            self.unexpected(&["end of input"])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(&["identifier"]),
        }
    }

    fn int_lit(&mut self) -> PResult<i64> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.unexpected(&["integer literal"]),
        }
    }

    // ---- program structure ----

    fn program(&mut self) -> PResult<Ast> {
        let mut ast = Ast::default();
        while !self.at(&Tok::Eof) {
            if self.at_ident("module") {
                ast.impls.push(self.impl_decl()?);
                continue;
            }
            let start = self.span();
            let Some(kind) = self.block_keyword()? else {
                if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::LBrace {
                    let name = self.peek().describe();
                    return self.err(format!("unknown block name {name}"), &["block name", "`module`"]);
                }
                return self.unexpected(&["block name", "`module`"]);
            };
            if !ast.impls.is_empty() {
                return Err(SyntaxError::new(
                    start,
                    format!("block `{kind}` must appear before module implementations"),
                    vec![],
                ));
            }
            if let Some(last) = ast.blocks.last() {
                if last.kind >= kind {
                    let msg = if last.kind == kind {
                        format!("duplicate block `{kind}`")
                    } else {
                        format!("block `{kind}` must appear before `{}`", last.kind)
                    };
                    return Err(SyntaxError::new(start, msg, vec![]));
                }
            }
            let stmts = self.block_body(kind)?;
            ast.blocks.push(Block {
                kind,
                stmts,
                span: start.to(self.prev_span()),
            });
        }
        Ok(ast)
    }

    /// Consume a block keyword if one starts here (`transformed data`, ...).
    fn block_keyword(&mut self) -> PResult<Option<BlockKind>> {
        let Tok::Ident(w) = self.peek().clone() else {
            return Ok(None);
        };
        let two = |p: &Parser| match p.peek_at(1) {
            Tok::Ident(x) => Some(x.clone()),
            _ => None,
        };
        let kind = match w.as_str() {
            "functions" => BlockKind::Functions,
            "data" => BlockKind::Data,
            "parameters" => BlockKind::Parameters,
            "model" => BlockKind::Model,
            "transformed" => match two(self).as_deref() {
                Some("data") => BlockKind::TransformedData,
                Some("parameters") => BlockKind::TransformedParameters,
                _ => {
                    self.bump();
                    return self.unexpected(&["`data`", "`parameters`"]);
                }
            },
            "generated" => match two(self).as_deref() {
                Some("quantities") => BlockKind::GeneratedQuantities,
                _ => {
                    self.bump();
                    return self.unexpected(&["`quantities`"]);
                }
            },
            _ => return Ok(None),
        };
        let words = if matches!(kind, BlockKind::TransformedData | BlockKind::TransformedParameters | BlockKind::GeneratedQuantities) {
            2
        } else {
            1
        };
        if self.peek_at(words) != &Tok::LBrace {
            return Ok(None);
        }
        for _ in 0..words {
            self.bump();
        }
        Ok(Some(kind))
    }

    fn block_body(&mut self, kind: BlockKind) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while !self.at(&Tok::RBrace) {
            if self.at(&Tok::Eof) {
                return self.unexpected(&["`}`"]);
            }
            let s = if kind == BlockKind::Functions {
                self.fundef()?
            } else {
                self.stmt(false)?
            };
            if matches!(kind, BlockKind::Data | BlockKind::Parameters) {
                match &s.kind {
                    StmtKind::Decl { init: None, .. } => {}
                    _ => {
                        return Err(SyntaxError::new(
                            s.span,
                            format!("only declarations without initializers are allowed in `{kind}`"),
                            vec!["declaration".into()],
                        ))
                    }
                }
            }
            stmts.push(s);
        }
        self.bump();
        Ok(stmts)
    }

    fn fundef(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let ret = if self.at_ident("void") {
            self.bump();
            TypeExpr::scalar(BaseType::Void)
        } else {
            self.type_expr(true)?
        };
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                let ty = self.type_expr(true)?;
                let n = self.ident()?;
                params.push((ty, n));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let body = if self.eat(&Tok::Semi) {
            None
        } else {
            self.expect(Tok::LBrace)?;
            let mut body = Vec::new();
            while !self.at(&Tok::RBrace) {
                if self.at(&Tok::Eof) {
                    return self.unexpected(&["`}`"]);
                }
                body.push(self.stmt(true)?);
            }
            self.bump();
            Some(body)
        };
        Ok(Stmt {
            kind: StmtKind::FunDef(FunDef {
                ret,
                name,
                params,
                body,
            }),
            span: start.to(self.prev_span()),
        })
    }

    // ---- module implementations ----

    fn impl_decl(&mut self) -> PResult<ImplDecl> {
        let start = self.bump().span;
        let name = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => return self.unexpected(&["implementation name string"]),
        };
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return self.err(
                format!("implementation name \"{name}\" must be a non-empty identifier"),
                &[],
            );
        }
        let hole = self.ident()?;
        let index_params = if self.at(&Tok::LBracket) {
            self.bump();
            let vars = self.ident_list(&Tok::RBracket)?;
            Some(IndexParams {
                kind: IndexParamKind::Bracket,
                vars,
            })
        } else if self.at(&Tok::Lt) {
            self.bump();
            let vars = self.ident_list(&Tok::Gt)?;
            Some(IndexParams {
                kind: IndexParamKind::Angle,
                vars,
            })
        } else {
            None
        };
        let mut append: Vec<Block> = Vec::new();
        let mut fields = Vec::new();
        if self.at(&Tok::LParen) {
            let fstart = self.span();
            let (params, has_subject) = self.impl_params()?;
            self.expect(Tok::LBrace)?;
            let (body, ret) = self.module_body(&mut append, false, &mut fields)?;
            fields.insert(
                0,
                FieldDecl {
                    name: String::new(),
                    params,
                    has_subject,
                    body,
                    ret,
                    span: fstart.to(self.prev_span()),
                },
            );
        } else if self.at(&Tok::LBrace) {
            self.bump();
            let (body, ret) = self.module_body(&mut append, true, &mut fields)?;
            if !body.is_empty() || ret.is_some() {
                return Err(SyntaxError::new(
                    start,
                    "statements outside `field` declarations in a module with fields",
                    vec!["`field`".into()],
                ));
            }
            if fields.is_empty() {
                return Err(SyntaxError::new(start, "module declares no fields", vec!["`field`".into()]));
            }
            let anon = fields.iter().filter(|f| f.name.is_empty()).count();
            if anon > 0 && fields.len() > 1 {
                return Err(SyntaxError::new(
                    start,
                    "an anonymous field cannot be combined with other fields",
                    vec![],
                ));
            }
            let mut seen = HashSet::new();
            for f in &fields {
                if !seen.insert(f.name.clone()) {
                    return Err(SyntaxError::new(f.span, format!("duplicate field `{}`", f.name), vec![]));
                }
            }
        } else {
            return self.unexpected(&["`(`", "`{`"]);
        }
        Ok(ImplDecl {
            name,
            hole,
            index_params,
            append,
            fields,
            span: start.to(self.prev_span()),
        })
    }

    fn ident_list(&mut self, close: &Tok) -> PResult<Vec<String>> {
        let mut out = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            out.push(self.ident()?);
        }
        self.expect(close.clone())?;
        Ok(out)
    }

    /// `(real a, b | c)`: types are optional; `|` may follow the first parameter.
    fn impl_params(&mut self) -> PResult<(Vec<Param>, bool)> {
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        let mut has_subject = false;
        if !self.at(&Tok::RParen) {
            loop {
                let start = self.span();
                let ty = if self.at_type_start() {
                    Some(self.type_expr(true)?)
                } else {
                    None
                };
                let name = self.ident()?;
                params.push(Param {
                    ty,
                    name,
                    span: start.to(self.prev_span()),
                });
                if self.at(&Tok::Pipe) {
                    if params.len() != 1 || has_subject {
                        return self.err("`|` may only follow the first parameter", &[]);
                    }
                    self.bump();
                    has_subject = true;
                    continue;
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok((params, has_subject))
    }

    /// Body of a module (or, with `fields_mode`, the part around its field
    /// declarations). Returns the statements and final return expression.
    fn module_body(
        &mut self,
        append: &mut Vec<Block>,
        fields_mode: bool,
        fields: &mut Vec<FieldDecl>,
    ) -> PResult<(Vec<Stmt>, Option<Expr>)> {
        let mut body = Vec::new();
        let mut ret = None;
        while !self.at(&Tok::RBrace) {
            if self.at(&Tok::Eof) {
                return self.unexpected(&["`}`"]);
            }
            let start = self.span();
            if let Some(kind) = self.block_keyword()? {
                if kind == BlockKind::Data {
                    return Err(SyntaxError::new(start, "modules cannot append to the `data` block", vec![]));
                }
                if append.iter().any(|b| b.kind == kind) {
                    return Err(SyntaxError::new(start, format!("duplicate append block `{kind}`"), vec![]));
                }
                let stmts = self.block_body(kind)?;
                append.push(Block {
                    kind,
                    stmts,
                    span: start.to(self.prev_span()),
                });
                continue;
            }
            if fields_mode && self.at_ident("field") {
                self.bump();
                let name = if let Tok::Ident(n) = self.peek().clone() {
                    self.bump();
                    n
                } else {
                    String::new()
                };
                let (params, has_subject) = self.impl_params()?;
                self.expect(Tok::LBrace)?;
                let (fbody, fret) = self.field_body()?;
                fields.push(FieldDecl {
                    name,
                    params,
                    has_subject,
                    body: fbody,
                    ret: fret,
                    span: start.to(self.prev_span()),
                });
                continue;
            }
            if ret.is_some() {
                return self.err("`return` must be the final statement of a module body", &["`}`"]);
            }
            if self.at_ident("return") {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                ret = Some(e);
                continue;
            }
            body.push(self.stmt(false)?);
        }
        self.bump();
        Ok((body, ret))
    }

    fn field_body(&mut self) -> PResult<(Vec<Stmt>, Option<Expr>)> {
        let mut body = Vec::new();
        let mut ret = None;
        while !self.at(&Tok::RBrace) {
            if self.at(&Tok::Eof) {
                return self.unexpected(&["`}`"]);
            }
            if ret.is_some() {
                return self.err("`return` must be the final statement of a field body", &["`}`"]);
            }
            if self.at_ident("return") {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                ret = Some(e);
                continue;
            }
            body.push(self.stmt(false)?);
        }
        self.bump();
        Ok((body, ret))
    }

    // ---- types ----

    fn at_type_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(w) if w == "data" => matches!(self.peek_at(1), Tok::Ident(x) if TYPE_KEYWORDS.contains(&x.as_str())),
            Tok::Ident(w) => TYPE_KEYWORDS.contains(&w.as_str()) && !matches!(self.peek_at(1), Tok::LParen),
            _ => false,
        }
    }

    /// A type; `signature` allows unsized forms (`vector`, `array[] real`, `real[]`).
    fn type_expr(&mut self, signature: bool) -> PResult<TypeExpr> {
        let data_only = if self.at_ident("data") {
            self.bump();
            true
        } else {
            false
        };
        let mut array_dims = Vec::new();
        let mut unsized_array = 0;
        if self.at_ident("array") {
            self.bump();
            self.expect(Tok::LBracket)?;
            if signature && matches!(self.peek(), Tok::RBracket | Tok::Comma) {
                unsized_array = 1;
                while self.eat(&Tok::Comma) {
                    unsized_array += 1;
                }
            } else {
                array_dims = self.expr_list(&Tok::RBracket)?;
            }
            self.expect(Tok::RBracket)?;
        }
        let word = self.ident()?;
        let base = match word.as_str() {
            "int" => BaseType::Int,
            "real" => BaseType::Real,
            "vector" => BaseType::Vector,
            "row_vector" => BaseType::RowVector,
            "matrix" => BaseType::Matrix,
            w if TYPE_KEYWORDS.contains(&w) && w != "array" => BaseType::Named(w.to_string()),
            _ => {
                self.pos -= 1;
                return self.unexpected(&["type"]);
            }
        };
        let mut ty = TypeExpr {
            base,
            constraint: Vec::new(),
            sizes: Vec::new(),
            array_dims,
            unsized_array,
            data_only,
        };
        if self.at(&Tok::Lt) {
            self.bump();
            let saved = self.no_gt;
            self.no_gt = true;
            loop {
                let key = self.ident()?;
                self.expect(Tok::Assign)?;
                let v = self.expr()?;
                ty.constraint.push((key, v));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.no_gt = saved;
            self.expect(Tok::Gt)?;
        }
        let scalar = matches!(ty.base, BaseType::Int | BaseType::Real | BaseType::Void)
            || matches!(&ty.base, BaseType::Named(n) if n == "complex");
        if self.at(&Tok::LBracket) {
            if signature && matches!(self.peek_at(1), Tok::RBracket | Tok::Comma) {
                // old-style unsized array in a signature: `real[]`, `real[,]`
                self.bump();
                let mut rank = 1;
                while self.eat(&Tok::Comma) {
                    rank += 1;
                }
                self.expect(Tok::RBracket)?;
                ty.unsized_array += rank;
            } else if !scalar {
                self.bump();
                ty.sizes = self.expr_list(&Tok::RBracket)?;
                self.expect(Tok::RBracket)?;
            }
        }
        Ok(ty)
    }

    // ---- statements ----

    fn stmt(&mut self, allow_return: bool) -> PResult<Stmt> {
        let start = self.span();
        let kind = self.stmt_kind(allow_return)?;
        Ok(Stmt {
            kind,
            span: start.to(self.prev_span()),
        })
    }

    fn body(&mut self, allow_return: bool) -> PResult<Vec<Stmt>> {
        let s = self.stmt(allow_return)?;
        Ok(match s.kind {
            StmtKind::Block(b) => b,
            _ => vec![s],
        })
    }

    fn stmt_kind(&mut self, allow_return: bool) -> PResult<StmtKind> {
        match self.peek().clone() {
            Tok::LBrace => {
                self.bump();
                let mut stmts = Vec::new();
                while !self.at(&Tok::RBrace) {
                    if self.at(&Tok::Eof) {
                        return self.unexpected(&["`}`"]);
                    }
                    stmts.push(self.stmt(allow_return)?);
                }
                self.bump();
                Ok(StmtKind::Block(stmts))
            }
            Tok::Ident(w) => match w.as_str() {
                "for" => self.for_stmt(allow_return),
                "while" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let cond = self.expr()?;
                    self.expect(Tok::RParen)?;
                    let body = self.body(allow_return)?;
                    Ok(StmtKind::While { cond, body })
                }
                "if" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let cond = self.expr()?;
                    self.expect(Tok::RParen)?;
                    let then = self.body(allow_return)?;
                    let els = if self.at_ident("else") {
                        self.bump();
                        Some(self.body(allow_return)?)
                    } else {
                        None
                    };
                    Ok(StmtKind::If { cond, then, els })
                }
                "return" => {
                    if !allow_return {
                        return self.err("`return` is only allowed at the end of a module or inside a function", &[]);
                    }
                    self.bump();
                    if self.eat(&Tok::Semi) {
                        return Ok(StmtKind::Return(None));
                    }
                    let e = self.expr()?;
                    self.expect(Tok::Semi)?;
                    Ok(StmtKind::Return(Some(e)))
                }
                "break" => {
                    self.bump();
                    self.expect(Tok::Semi)?;
                    Ok(StmtKind::Break)
                }
                "continue" => {
                    self.bump();
                    self.expect(Tok::Semi)?;
                    Ok(StmtKind::Continue)
                }
                "target" if self.peek_at(1) == &Tok::PlusAssign => {
                    self.bump();
                    self.bump();
                    let e = self.expr()?;
                    self.expect(Tok::Semi)?;
                    Ok(StmtKind::TargetPlus(e))
                }
                "module" => self.err("module implementations must appear at the top level", &[]),
                _ if self.at_type_start() => self.decl(),
                _ => self.simple_stmt(),
            },
            _ => self.simple_stmt(),
        }
    }

    fn decl(&mut self) -> PResult<StmtKind> {
        let ty = self.type_expr(false)?;
        let name = self.ident()?;
        let mut dims = Vec::new();
        if self.at(&Tok::LBracket) {
            self.bump();
            dims = self.expr_list(&Tok::RBracket)?;
            self.expect(Tok::RBracket)?;
        }
        let init = if self.eat(&Tok::Assign) {
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(Tok::Semi)?;
        Ok(StmtKind::Decl { ty, name, dims, init })
    }

    fn for_stmt(&mut self, allow_return: bool) -> PResult<StmtKind> {
        self.bump();
        self.expect(Tok::LParen)?;
        let var = if self.at(&Tok::LParen) {
            self.bump();
            let names = self.ident_list(&Tok::RParen)?;
            ForVar::Tuple(names)
        } else {
            ForVar::Single(self.ident()?)
        };
        if !self.at_ident("in") {
            return self.unexpected(&["`in`"]);
        }
        self.bump();
        let first = self.expr()?;
        let iter = if self.eat(&Tok::Colon) {
            let hi = self.expr()?;
            ForIter::Range(first, hi)
        } else {
            ForIter::Each(first)
        };
        if matches!(var, ForVar::Tuple(_)) && matches!(iter, ForIter::Range(..)) {
            return self.err("tuple loop variables require a foreach loop", &[]);
        }
        self.expect(Tok::RParen)?;
        let body = self.body(allow_return)?;
        Ok(StmtKind::For { var, iter, body })
    }

    fn simple_stmt(&mut self) -> PResult<StmtKind> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Assign => Some(AssignOp::Assign),
            Tok::PlusAssign => Some(AssignOp::Add),
            Tok::MinusAssign => Some(AssignOp::Sub),
            Tok::StarAssign => Some(AssignOp::Mul),
            Tok::SlashAssign => Some(AssignOp::Div),
            _ => None,
        };
        if let Some(op) = op {
            if !is_lvalue(&lhs) {
                return Err(SyntaxError::new(lhs.span, "left side of assignment is not assignable", vec![]));
            }
            self.bump();
            let rhs = self.expr()?;
            self.expect(Tok::Semi)?;
            return Ok(StmtKind::Assign { lhs, op, rhs });
        }
        if self.eat(&Tok::Tilde) {
            let dist = self.distribution()?;
            self.expect(Tok::Semi)?;
            return Ok(StmtKind::Tilde { lhs, dist });
        }
        if !matches!(lhs.kind, ExprKind::Call { .. } | ExprKind::Hole(_)) {
            return Err(SyntaxError::new(
                lhs.span,
                "expected a statement",
                vec!["`=`".into(), "`~`".into(), "`;`".into()],
            ));
        }
        self.expect(Tok::Semi)?;
        Ok(StmtKind::Expr(lhs))
    }

    fn distribution(&mut self) -> PResult<Distribution> {
        let Tok::Ident(name) = self.peek().clone() else {
            return self.unexpected(&["distribution name"]);
        };
        if self.is_hole_name(&name) {
            if let Some(hc) = self.try_hole_call()? {
                return Ok(Distribution::Hole(hc));
            }
        }
        self.bump();
        self.expect(Tok::LParen)?;
        let args = self.args()?;
        Ok(Distribution::Named { name, args })
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(2)?;
        if self.at(&Tok::Question) {
            self.bump();
            let then = self.expr()?;
            self.expect(Tok::Colon)?;
            let els = self.expr()?;
            let span = cond.span.to(els.span);
            return Ok(Expr {
                kind: ExprKind::Cond {
                    cond: Box::new(cond),
                    then: Box::new(then),
                    els: Box::new(els),
                },
                span,
            });
        }
        Ok(cond)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt if !self.no_gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::IntDiv => BinOp::IntDiv,
            Tok::Percent => BinOp::Mod,
            Tok::Backslash => BinOp::LeftDiv,
            Tok::DotStar => BinOp::ElMul,
            Tok::DotSlash => BinOp::ElDiv,
            Tok::Caret => BinOp::Pow,
            _ => return None,
        })
    }

    fn binary(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min {
                break;
            }
            self.bump();
            let next = if op.right_assoc() { prec } else { prec + 1 };
            let rhs = self.binary(next)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr {
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Minus => Some(UnOp::Neg),
            Tok::Plus => Some(UnOp::Plus),
            Tok::Bang => Some(UnOp::Not),
            _ => None,
        };
        if let Some(op) = op {
            let start = self.bump().span;
            let operand = self.binary(PREFIX_PRECEDENCE)?;
            let span = start.to(operand.span);
            return Ok(Expr {
                kind: ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                span,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.at(&Tok::LBracket) {
                self.bump();
                let saved = self.no_gt;
                self.no_gt = false;
                let mut indices = Vec::new();
                loop {
                    indices.push(self.index()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.no_gt = saved;
                let end = self.expect(Tok::RBracket)?;
                let span = e.span.to(end);
                e = Expr {
                    kind: ExprKind::Index {
                        base: Box::new(e),
                        indices,
                    },
                    span,
                };
            } else if self.at(&Tok::Quote) {
                let end = self.bump().span;
                let span = e.span.to(end);
                e = Expr {
                    kind: ExprKind::Transpose(Box::new(e)),
                    span,
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn index(&mut self) -> PResult<Index> {
        if self.eat(&Tok::Colon) {
            let hi = if matches!(self.peek(), Tok::Comma | Tok::RBracket) {
                None
            } else {
                Some(self.expr()?)
            };
            return Ok(Index::Slice(None, hi));
        }
        let lo = self.expr()?;
        if self.eat(&Tok::Colon) {
            let hi = if matches!(self.peek(), Tok::Comma | Tok::RBracket) {
                None
            } else {
                Some(self.expr()?)
            };
            return Ok(Index::Slice(Some(lo), hi));
        }
        Ok(Index::Single(lo))
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mk = |kind, p: &Parser| Expr {
            kind,
            span: start.to(p.prev_span()),
        };
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(mk(ExprKind::Int(v), self))
            }
            Tok::Real(s) => {
                self.bump();
                Ok(mk(ExprKind::Real(s), self))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(mk(ExprKind::Str(s), self))
            }
            Tok::LParen => {
                self.bump();
                let saved = self.no_gt;
                self.no_gt = false;
                let first = self.expr()?;
                let kind = if self.at(&Tok::Comma) {
                    let mut items = vec![first];
                    while self.eat(&Tok::Comma) {
                        items.push(self.expr()?);
                    }
                    ExprKind::Tuple(items)
                } else {
                    // parentheses are not kept; the renderer re-derives them
                    first.kind
                };
                self.no_gt = saved;
                self.expect(Tok::RParen)?;
                Ok(mk(kind, self))
            }
            Tok::LBrace => {
                self.bump();
                let saved = self.no_gt;
                self.no_gt = false;
                let items = if self.at(&Tok::RBrace) {
                    Vec::new()
                } else {
                    self.expr_list(&Tok::RBrace)?
                };
                self.no_gt = saved;
                self.expect(Tok::RBrace)?;
                Ok(mk(ExprKind::Array(items), self))
            }
            Tok::Ident(name) => {
                if self.is_hole_name(&name) {
                    if let Some(hc) = self.try_hole_call()? {
                        let span = hc.span;
                        return Ok(Expr {
                            kind: ExprKind::Hole(hc),
                            span,
                        });
                    }
                }
                self.bump();
                if self.at(&Tok::LParen) {
                    self.bump();
                    let args = self.args()?;
                    return Ok(mk(ExprKind::Call { name, args }, self));
                }
                Ok(mk(ExprKind::Var(name), self))
            }
            _ => self.unexpected(&["expression"]),
        }
    }

    /// Arguments after an already-consumed `(`, through the closing `)`.
    fn args(&mut self) -> PResult<Vec<Expr>> {
        let saved = self.no_gt;
        self.no_gt = false;
        let args = if self.at(&Tok::RParen) {
            Vec::new()
        } else {
            self.expr_list(&Tok::RParen)?
        };
        self.no_gt = saved;
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn expr_list(&mut self, _close: &Tok) -> PResult<Vec<Expr>> {
        let mut out = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            out.push(self.expr()?);
        }
        Ok(out)
    }

    // ---- holes ----

    fn is_hole_name(&self, name: &str) -> bool {
        if self.holes.contains(name) {
            return true;
        }
        name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
            && !UPPERCASE_BUILTINS.contains(&name)
            && !self.functions.contains(name)
    }

    /// Try to parse a (possibly decorated) hole call at the current position.
    /// Restores the position and returns `None` when the tokens do not form one.
    fn try_hole_call(&mut self) -> PResult<Option<HoleCall>> {
        let saved = self.pos;
        let known = matches!(self.peek(), Tok::Ident(n) if self.holes.contains(n));
        match self.hole_ref() {
            Ok(Some(hole)) if self.at(&Tok::LParen) => {
                let start = self.toks[saved].span;
                self.bump();
                let args = self.args()?;
                Ok(Some(HoleCall {
                    hole,
                    args,
                    span: start.to(self.prev_span()),
                }))
            }
            Err(e) if known && e.message.starts_with("malformed") => Err(e),
            _ => {
                self.pos = saved;
                Ok(None)
            }
        }
    }

    fn hole_ref(&mut self) -> PResult<Option<HoleRef>> {
        let mut operands = vec![self.hole_operand()?];
        while self.at(&Tok::Star) && operands.last().is_some() {
            let Tok::Ident(next) = self.peek_at(1).clone() else {
                break;
            };
            if !self.is_hole_name(&next) {
                break;
            }
            self.bump();
            operands.push(self.hole_operand()?);
        }
        let collection = if self.at(&Tok::Plus) && self.peek_at(1) == &Tok::LParen {
            self.bump();
            true
        } else {
            false
        };
        Ok(Some(HoleRef { operands, collection }))
    }

    fn hole_operand(&mut self) -> PResult<HoleOperand> {
        let name = self.ident()?;
        let mut op = HoleOperand::plain(name);
        if self.at(&Tok::Dot) {
            if let Tok::Ident(f) = self.peek_at(1).clone() {
                self.bump();
                self.bump();
                op.field = Some(f);
            }
        }
        if self.at(&Tok::LBracket) {
            self.bump();
            op.index = Some(self.multi_range(&Tok::RBracket)?);
            self.expect(Tok::RBracket)?;
        }
        if self.at(&Tok::Lt) {
            self.bump();
            let copy = self.eat(&Tok::Lt);
            let range = self.multi_range(&Tok::Gt)?;
            self.expect(Tok::Gt)?;
            if copy {
                self.expect(Tok::Gt)?;
            }
            op.instance = Some(Instance { copy, range });
        }
        if self.at(&Tok::Caret) && !matches!(self.peek_at(1), Tok::LParen) {
            self.bump();
            op.power = Some(self.power()?);
        }
        Ok(op)
    }

    fn power(&mut self) -> PResult<Power> {
        match self.peek().clone() {
            Tok::Int(n) if n >= 1 => {
                self.bump();
                Ok(Power {
                    kind: PowerKind::Repeat,
                    n: n as u32,
                })
            }
            Tok::Ident(w) if w.len() > 1 && (w.starts_with('P') || w.starts_with('C')) => {
                let n: u32 = w[1..].parse().map_err(|_| {
                    SyntaxError::new(self.span(), format!("malformed macro exponent `{w}`"), vec![])
                })?;
                if n == 0 {
                    return self.err("malformed macro exponent: must be at least 1", &[]);
                }
                self.bump();
                let kind = if w.starts_with('P') { PowerKind::Perm } else { PowerKind::Comb };
                Ok(Power { kind, n })
            }
            _ => self.err("malformed macro exponent", &["integer", "`Pn`", "`Cn`"]),
        }
    }

    fn multi_range(&mut self, close: &Tok) -> PResult<MultiRange> {
        let mut items = Vec::new();
        loop {
            items.push(self.range_item()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        if !self.at(close) {
            return self.err(
                format!("malformed macro range: expected `{}`", close.text()),
                &[close.text()],
            );
        }
        Ok(items)
    }

    fn range_item(&mut self) -> PResult<RangeItem> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let (lo, hi) = self.range_bounds()?;
                self.expect(Tok::RParen)?;
                if !self.eat(&Tok::Caret) {
                    return self.err("malformed macro range: expected `^` after parenthesized range", &["`^`"]);
                }
                let power = self.power()?;
                Ok(RangeItem::Power { lo, hi, power })
            }
            Tok::Int(_) => {
                let start = self.span();
                let lo = self.int_lit()?;
                if matches!(self.peek(), Tok::DotDot | Tok::Colon) {
                    self.bump();
                    let hi = match self.peek().clone() {
                        Tok::Int(v) => {
                            self.bump();
                            v
                        }
                        _ => return self.err("malformed macro range: expected upper bound", &["integer literal"]),
                    };
                    check_bounds(lo, hi, start)?;
                    Ok(RangeItem::Range { lo, hi })
                } else {
                    if lo < 0 {
                        return Err(SyntaxError::new(start, "malformed macro range: negative index", vec![]));
                    }
                    Ok(RangeItem::Index(lo))
                }
            }
            Tok::Ident(v) => {
                self.bump();
                Ok(RangeItem::Var(v))
            }
            Tok::Minus => self.err("malformed macro range: bounds must be non-negative", &[]),
            _ => Err(SyntaxError::new(
                self.span(),
                "malformed macro range",
                vec!["integer literal".into(), "range".into()],
            )),
        }
    }

    fn range_bounds(&mut self) -> PResult<(i64, i64)> {
        let start = self.span();
        let lo = match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                v
            }
            _ => return self.err("malformed macro range: expected lower bound", &["integer literal"]),
        };
        if !matches!(self.peek(), Tok::DotDot | Tok::Colon) {
            return self.err("malformed macro range: expected `..`", &["`..`"]);
        }
        self.bump();
        let hi = match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                v
            }
            _ => return self.err("malformed macro range: expected upper bound", &["integer literal"]),
        };
        check_bounds(lo, hi, start)?;
        Ok((lo, hi))
    }
}

fn check_bounds(lo: i64, hi: i64, span: Span) -> PResult<()> {
    if lo < 0 || hi < 0 {
        return Err(SyntaxError::new(span, "malformed macro range: bounds must be non-negative", vec![]));
    }
    if lo > hi {
        return Err(SyntaxError::new(
            span,
            format!("malformed macro range: empty range {lo}..{hi}"),
            vec![],
        ));
    }
    Ok(())
}

fn is_lvalue(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Var(_) => true,
        ExprKind::Index { base, .. } => is_lvalue(base),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_program_without_modules() {
        let ast = parse("data { int N; } model { N ~ poisson(3); }").unwrap();
        assert!(ast.impls.is_empty());
        assert_eq!(ast.blocks.len(), 2);
    }

    #[test]
    fn rejects_out_of_order_blocks() {
        let e = parse("model { } data { int N; }").unwrap_err();
        assert!(e.message.contains("before"), "{e}");
        let e = parse("data { } data { }").unwrap_err();
        assert!(e.message.contains("duplicate"), "{e}");
    }

    #[test]
    fn rejects_unknown_block() {
        let e = parse("modle { }").unwrap_err();
        assert!(e.message.contains("unknown block"), "{e}");
    }

    #[test]
    fn tilde_hole_with_nested_hole_argument() {
        let ast = parse("model { y ~ NSuccesses(n, PSuccess(x)); }").unwrap();
        let StmtKind::Tilde { dist: Distribution::Hole(hc), .. } = &ast.blocks[0].stmts[0].kind else {
            panic!("expected hole distribution");
        };
        assert_eq!(hc.hole.name(), "NSuccesses");
        assert!(matches!(&hc.args[1].kind, ExprKind::Hole(inner) if inner.hole.name() == "PSuccess"));
    }

    #[test]
    fn uppercase_builtins_are_calls() {
        let e = parse_expr("2*Phi(a / b) - 1").unwrap();
        let mut found_hole = false;
        fn walk(e: &Expr, f: &mut bool) {
            match &e.kind {
                ExprKind::Hole(_) => *f = true,
                ExprKind::Binary { lhs, rhs, .. } => {
                    walk(lhs, f);
                    walk(rhs, f);
                }
                ExprKind::Call { args, .. } => args.iter().for_each(|a| walk(a, f)),
                _ => {}
            }
        }
        walk(&e, &mut found_hole);
        assert!(!found_hole);
    }

    #[test]
    fn macro_decorations() {
        let e = parse_expr("Feature[1..100]+(x)").unwrap();
        let ExprKind::Hole(hc) = e.kind else { panic!() };
        assert!(hc.hole.collection);
        assert_eq!(hc.hole.operands[0].index, Some(vec![RangeItem::Range { lo: 1, hi: 100 }]));

        let e = parse_expr("FeaturePair[(1..100)^C2]+(x)").unwrap();
        let ExprKind::Hole(hc) = e.kind else { panic!() };
        assert_eq!(
            hc.hole.operands[0].index,
            Some(vec![RangeItem::Power {
                lo: 1,
                hi: 100,
                power: Power { kind: PowerKind::Comb, n: 2 }
            }])
        );

        let e = parse_expr("Theta*Col[1..100]^C2+()").unwrap();
        let ExprKind::Hole(hc) = e.kind else { panic!() };
        assert_eq!(hc.hole.operands.len(), 2);
        assert_eq!(hc.hole.operands[1].power, Some(Power { kind: PowerKind::Comb, n: 2 }));

        let e = parse_expr("H<<1..3>>(x)").unwrap();
        let ExprKind::Hole(hc) = e.kind else { panic!() };
        assert!(hc.hole.operands[0].instance.as_ref().unwrap().copy);

        let e = parse_expr("T.forward(x)").unwrap();
        let ExprKind::Hole(hc) = e.kind else { panic!() };
        assert_eq!(hc.hole.field(), Some("forward"));
    }

    #[test]
    fn malformed_ranges_are_errors() {
        assert!(parse_expr("H[3..1]()").is_err());
        assert!(parse_expr("H[(1..3)^Q2]()").is_err());
    }

    #[test]
    fn module_forms() {
        let src = r#"
model { x ~ normal(Mean(), 1); }
module "a" Mean() { parameters { real mu; } mu ~ normal(0, 1); return mu; }
module "f" Feature[n](x) { return x[n]; }
module "t" Transform { field forward(real x) { return exp(x); } field reverse(real y) { return log(y); } }
module "b" NS(y | n, p) { y ~ binomial(n, p); }
"#;
        let ast = parse(src).unwrap();
        assert_eq!(ast.impls.len(), 4);
        assert_eq!(ast.impls[0].append.len(), 1);
        assert!(ast.impls[1].fields[0].params[0].ty.is_none());
        assert_eq!(ast.impls[2].fields.len(), 2);
        assert!(ast.impls[3].fields[0].has_subject);
    }

    #[test]
    fn return_must_be_last() {
        assert!(parse(r#"module "a" H() { return 1; x = 2; }"#).is_err());
        assert!(parse(r#"module "a" H() { if (1) { return 1; } return 2; }"#).is_err());
    }

    #[test]
    fn constraint_with_gt_terminates() {
        let ast = parse("parameters { real<lower=0, upper=N> s; vector<lower=-1>[K] v; }").unwrap();
        let StmtKind::Decl { ty, .. } = &ast.blocks[0].stmts[0].kind else { panic!() };
        assert_eq!(ty.constraint.len(), 2);
        let StmtKind::Decl { ty, .. } = &ast.blocks[0].stmts[1].kind else { panic!() };
        assert_eq!(ty.sizes.len(), 1);
    }

    #[test]
    fn old_and_new_array_syntax() {
        let ast = parse("data { int n[J]; array[J] int y; }").unwrap();
        let StmtKind::Decl { dims, .. } = &ast.blocks[0].stmts[0].kind else { panic!() };
        assert_eq!(dims.len(), 1);
        let StmtKind::Decl { ty, .. } = &ast.blocks[0].stmts[1].kind else { panic!() };
        assert_eq!(ty.array_dims.len(), 1);
    }

    #[test]
    fn data_block_rejects_statements() {
        assert!(parse("data { int N = 3; }").is_err());
        assert!(parse("parameters { x ~ normal(0, 1); }").is_err());
    }

    #[test]
    fn error_carries_expected_set() {
        let e = parse("model { x ~ normal(0, 1) }").unwrap_err();
        assert!(e.expected.iter().any(|x| x.contains(';')), "{e:?}");
        assert_eq!(e.span.line, 1);
    }
}
