//! Abstract syntax for modular programs.
//!
//! Spans are carried on every statement, expression and hole call, but they
//! never take part in equality: two trees compare equal when they have the
//! same structure, regardless of where they came from. This makes
//! `parse(render(parse(s))) == parse(s)` a meaningful check.

use std::fmt;

/// Byte range plus the 1-based line and column of its first byte.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _state: &mut H) {}
}

impl Span {
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to(self, other: Span) -> Span {
        Span {
            start: self.start,
            end: other.end.max(self.end),
            line: self.line,
            col: self.col,
        }
    }
}

/// Top-level block kinds in host-grammar order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockKind {
    Functions,
    Data,
    TransformedData,
    Parameters,
    TransformedParameters,
    Model,
    GeneratedQuantities,
}

impl BlockKind {
    pub const ALL: [BlockKind; 7] = [
        BlockKind::Functions,
        BlockKind::Data,
        BlockKind::TransformedData,
        BlockKind::Parameters,
        BlockKind::TransformedParameters,
        BlockKind::Model,
        BlockKind::GeneratedQuantities,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            BlockKind::Functions => "functions",
            BlockKind::Data => "data",
            BlockKind::TransformedData => "transformed data",
            BlockKind::Parameters => "parameters",
            BlockKind::TransformedParameters => "transformed parameters",
            BlockKind::Model => "model",
            BlockKind::GeneratedQuantities => "generated quantities",
        }
    }

    /// Whether top-level declarations in this block are program globals.
    pub fn declares_globals(self) -> bool {
        !matches!(self, BlockKind::Functions | BlockKind::Model)
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

/// A parsed modular program: host blocks plus module implementations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ast {
    pub blocks: Vec<Block>,
    pub impls: Vec<ImplDecl>,
}

impl Ast {
    pub fn block(&self, kind: BlockKind) -> Option<&Block> {
        self.blocks.iter().find(|b| b.kind == kind)
    }

    /// Names of user-defined functions in the `functions` block.
    pub fn function_names(&self) -> Vec<String> {
        self.block(BlockKind::Functions)
            .map(|b| {
                b.stmts
                    .iter()
                    .filter_map(|s| match &s.kind {
                        StmtKind::FunDef(f) => Some(f.name.clone()),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// `module "name" Hole[...](...) { ... }`
#[derive(Debug, Clone, PartialEq)]
pub struct ImplDecl {
    pub name: String,
    pub hole: String,
    /// Index variables for indexed (`H[n]`) or instance (`H<j>`) templates.
    pub index_params: Option<IndexParams>,
    /// Append blocks, in the order written.
    pub append: Vec<Block>,
    /// Either one anonymous field (plain modules) or named fields.
    pub fields: Vec<FieldDecl>,
    pub span: Span,
}

impl ImplDecl {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn is_anonymous(&self) -> bool {
        self.fields.len() == 1 && self.fields[0].name.is_empty()
    }

    pub fn append_block(&self, kind: BlockKind) -> Option<&Block> {
        self.append.iter().find(|b| b.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexParams {
    pub kind: IndexParamKind,
    pub vars: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexParamKind {
    /// `H[n, m]`
    Bracket,
    /// `H<j>`
    Angle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    /// Empty for the anonymous field.
    pub name: String,
    pub params: Vec<Param>,
    /// The first parameter was written before a `|` (`H(y | n, p)`); such
    /// modules fill holes in `y ~ H(n, p)` position.
    pub has_subject: bool,
    pub body: Vec<Stmt>,
    pub ret: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub ty: Option<TypeExpr>,
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BaseType {
    Int,
    Real,
    Vector,
    RowVector,
    Matrix,
    /// Constrained vector/matrix families (`simplex`, `cov_matrix`, ...),
    /// kept by name and typed as their unconstrained shape.
    Named(String),
    Void,
}

impl BaseType {
    pub fn keyword(&self) -> &str {
        match self {
            BaseType::Int => "int",
            BaseType::Real => "real",
            BaseType::Vector => "vector",
            BaseType::RowVector => "row_vector",
            BaseType::Matrix => "matrix",
            BaseType::Named(n) => n,
            BaseType::Void => "void",
        }
    }
}

/// A written type: `real<lower=0>`, `vector[N]`, `array[N] int`, `matrix[M, N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeExpr {
    pub base: BaseType,
    /// `<lower=0, upper=N>` entries in written order.
    pub constraint: Vec<(String, Expr)>,
    /// Shape sizes (`vector[N]`); empty for scalars or unsized signatures.
    pub sizes: Vec<Expr>,
    /// `array[N, M]` prefix dimensions.
    pub array_dims: Vec<Expr>,
    /// Rank of an unsized `array[] real` in function signatures.
    pub unsized_array: usize,
    /// `data` qualifier in function signatures.
    pub data_only: bool,
}

impl TypeExpr {
    pub fn scalar(base: BaseType) -> TypeExpr {
        TypeExpr {
            base,
            constraint: Vec::new(),
            sizes: Vec::new(),
            array_dims: Vec::new(),
            unsized_array: 0,
            data_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Assign,
    Add,
    Sub,
    Mul,
    Div,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Assign => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// `ty name[dims] = init;` (old-style array dims after the name).
    Decl {
        ty: TypeExpr,
        name: String,
        dims: Vec<Expr>,
        init: Option<Expr>,
    },
    Assign {
        lhs: Expr,
        op: AssignOp,
        rhs: Expr,
    },
    /// `lhs ~ dist(args);`
    Tilde {
        lhs: Expr,
        dist: Distribution,
    },
    TargetPlus(Expr),
    /// A call used as a statement (function or hole).
    Expr(Expr),
    For {
        var: ForVar,
        iter: ForIter,
        body: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    If {
        cond: Expr,
        then: Vec<Stmt>,
        els: Option<Vec<Stmt>>,
    },
    Block(Vec<Stmt>),
    Return(Option<Expr>),
    Break,
    Continue,
    FunDef(FunDef),
    /// Internal: statement-position hole filled during concretization.
    Inline(Box<Inlined>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Named { name: String, args: Vec<Expr> },
    /// `y ~ H(args)`; the hole receives `y` as its first argument.
    Hole(HoleCall),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForVar {
    Single(String),
    /// `for ((a, b) in xs)`; only meaningful over hole-product results.
    Tuple(Vec<String>),
}

impl ForVar {
    pub fn names(&self) -> Vec<&str> {
        match self {
            ForVar::Single(n) => vec![n.as_str()],
            ForVar::Tuple(ns) => ns.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForIter {
    Range(Expr, Expr),
    Each(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunDef {
    pub ret: TypeExpr,
    pub name: String,
    pub params: Vec<(TypeExpr, String)>,
    pub body: Option<Vec<Stmt>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr {
            kind,
            span: Span::default(),
        }
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Var(name.into()))
    }

    pub fn int(v: i64) -> Expr {
        Expr::new(ExprKind::Int(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    IntDiv,
    Mod,
    LeftDiv,
    ElMul,
    ElDiv,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::IntDiv => "%/%",
            BinOp::Mod => "%",
            BinOp::LeftDiv => "\\",
            BinOp::ElMul => ".*",
            BinOp::ElDiv => "./",
            BinOp::Pow => "^",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne => 4,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::IntDiv | BinOp::Mod | BinOp::ElMul | BinOp::ElDiv => 7,
            BinOp::LeftDiv => 8,
            BinOp::Pow => 10,
        }
    }

    pub fn right_assoc(self) -> bool {
        matches!(self, BinOp::Pow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Plus,
    Not,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Plus => "+",
            UnOp::Not => "!",
        }
    }
}

/// Precedence of prefix operators; sits between multiplication and `^`.
pub const PREFIX_PRECEDENCE: u8 = 9;
/// Precedence of the ternary conditional.
pub const COND_PRECEDENCE: u8 = 1;
/// Precedence of postfix forms (indexing, transpose, calls, atoms).
pub const POSTFIX_PRECEDENCE: u8 = 11;

#[derive(Debug, Clone, PartialEq)]
pub enum Index {
    Single(Expr),
    /// `lo:hi`, `lo:`, `:hi`, `:`
    Slice(Option<Expr>, Option<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    /// Real literal, kept as written.
    Real(String),
    Str(String),
    Var(String),
    Call {
        name: String,
        args: Vec<Expr>,
    },
    Hole(HoleCall),
    Index {
        base: Box<Expr>,
        indices: Vec<Index>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnOp,
        operand: Box<Expr>,
    },
    Transpose(Box<Expr>),
    Cond {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    /// `{a, b, c}`
    Array(Vec<Expr>),
    /// `(a, b)`; produced by hole products.
    Tuple(Vec<Expr>),
    /// Internal: expression-position hole filled during concretization.
    Let(Box<Inlined>),
}

/// A filled hole site awaiting flattening: the body runs in its own scope
/// with `bindings` as its parameters, then `value` replaces the site.
#[derive(Debug, Clone, PartialEq)]
pub struct Inlined {
    pub hole: String,
    pub bindings: Vec<(String, Expr)>,
    pub stmts: Vec<Stmt>,
    pub value: Option<Expr>,
}

/// A hole reference at a call site.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleCall {
    pub hole: HoleRef,
    pub args: Vec<Expr>,
    pub span: Span,
}

impl HoleCall {
    pub fn plain(name: impl Into<String>, args: Vec<Expr>) -> HoleCall {
        HoleCall {
            hole: HoleRef::plain(name),
            args,
            span: Span::default(),
        }
    }
}

/// `A*B[1..3]^C2+` style reference; plain holes have one undecorated operand.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HoleRef {
    pub operands: Vec<HoleOperand>,
    pub collection: bool,
}

impl HoleRef {
    pub fn plain(name: impl Into<String>) -> HoleRef {
        HoleRef {
            operands: vec![HoleOperand::plain(name)],
            collection: false,
        }
    }

    pub fn is_plain(&self) -> bool {
        !self.collection && self.operands.len() == 1 && self.operands[0].is_plain()
    }

    /// The hole name of a single-operand reference.
    pub fn name(&self) -> &str {
        &self.operands[0].name
    }

    pub fn field(&self) -> Option<&str> {
        if self.operands.len() == 1 {
            self.operands[0].field.as_deref()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HoleOperand {
    pub name: String,
    pub field: Option<String>,
    /// `H[1..3]`, `H[(1..3)^C2]`, `H[n]` inside templates.
    pub index: Option<MultiRange>,
    /// `H<j>` / `H<<j>>` and ranged forms.
    pub instance: Option<Instance>,
    /// `H^2`, `H^P2`, `H^C2`
    pub power: Option<Power>,
}

impl HoleOperand {
    pub fn plain(name: impl Into<String>) -> HoleOperand {
        HoleOperand {
            name: name.into(),
            field: None,
            index: None,
            instance: None,
            power: None,
        }
    }

    pub fn is_plain(&self) -> bool {
        self.index.is_none() && self.instance.is_none() && self.power.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    /// `<<j>>` when true, `<j>` otherwise.
    pub copy: bool,
    pub range: MultiRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PowerKind {
    /// `^n`: with replacement.
    Repeat,
    /// `^Pn`: ordered, without replacement.
    Perm,
    /// `^Cn`: unordered, without replacement.
    Comb,
}

impl PowerKind {
    pub fn prefix(self) -> &'static str {
        match self {
            PowerKind::Repeat => "",
            PowerKind::Perm => "P",
            PowerKind::Comb => "C",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Power {
    pub kind: PowerKind,
    pub n: u32,
}

/// Comma-separated range items; one result per combination.
pub type MultiRange = Vec<RangeItem>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RangeItem {
    /// `lo..hi`
    Range { lo: i64, hi: i64 },
    /// A single index literal.
    Index(i64),
    /// An index variable inside a template (`Sub<j>`).
    Var(String),
    /// `(lo..hi)^kn`
    Power { lo: i64, hi: i64, power: Power },
}
