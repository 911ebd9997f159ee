//! Structural host types and the typing rules for operators and builtins.

use std::fmt;

use serde::Serialize;

use crate::syntax::{BaseType, BinOp, TypeExpr, UnOp};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ty {
    Int,
    Real,
    Vector,
    RowVector,
    Matrix,
    Array(Box<Ty>),
    Tuple(Vec<Ty>),
    Str,
    Void,
    /// Result of an untyped parameter or an unknown function; compatible
    /// with everything.
    Unknown,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int => f.write_str("int"),
            Ty::Real => f.write_str("real"),
            Ty::Vector => f.write_str("vector"),
            Ty::RowVector => f.write_str("row_vector"),
            Ty::Matrix => f.write_str("matrix"),
            Ty::Array(e) => write!(f, "array[] {e}"),
            Ty::Tuple(ts) => {
                f.write_str("tuple(")?;
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
            Ty::Str => f.write_str("string"),
            Ty::Void => f.write_str("void"),
            Ty::Unknown => f.write_str("unknown"),
        }
    }
}

impl Serialize for Ty {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Ty {
    pub fn is_scalar(&self) -> bool {
        matches!(self, Ty::Int | Ty::Real)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Ty::Unknown)
    }

    /// Vector, row vector or matrix.
    pub fn is_linalg(&self) -> bool {
        matches!(self, Ty::Vector | Ty::RowVector | Ty::Matrix)
    }

    pub fn from_type_expr(t: &TypeExpr) -> Ty {
        let mut ty = match &t.base {
            BaseType::Int => Ty::Int,
            BaseType::Real => Ty::Real,
            BaseType::Vector => Ty::Vector,
            BaseType::RowVector => Ty::RowVector,
            BaseType::Matrix => Ty::Matrix,
            BaseType::Void => Ty::Void,
            BaseType::Named(n) => match n.as_str() {
                "simplex" | "unit_vector" | "ordered" | "positive_ordered" | "sum_to_zero_vector" => Ty::Vector,
                "cholesky_factor_corr" | "cholesky_factor_cov" | "corr_matrix" | "cov_matrix" => Ty::Matrix,
                "complex" => Ty::Real,
                _ => Ty::Unknown,
            },
        };
        for _ in 0..(t.array_dims.len() + t.unsized_array) {
            ty = Ty::Array(Box::new(ty));
        }
        ty
    }

    /// Wrap in `dims` array levels (old-style `int n[J]` declarations).
    pub fn with_dims(self, dims: usize) -> Ty {
        (0..dims).fold(self, |t, _| Ty::Array(Box::new(t)))
    }

    /// Element type when iterating with `for (x in e)`.
    pub fn element(&self) -> Option<Ty> {
        match self {
            Ty::Array(e) => Some((**e).clone()),
            Ty::Vector | Ty::RowVector | Ty::Matrix => Some(Ty::Real),
            Ty::Unknown => Some(Ty::Unknown),
            _ => None,
        }
    }

    /// Innermost non-array type.
    pub fn innermost(&self) -> &Ty {
        match self {
            Ty::Array(e) => e.innermost(),
            t => t,
        }
    }
}

/// Whether a value of type `value` may be stored where `target` is expected.
pub fn assignable(target: &Ty, value: &Ty) -> bool {
    match (target, value) {
        (Ty::Unknown, _) | (_, Ty::Unknown) => true,
        (Ty::Real, Ty::Int) => true,
        (Ty::Array(t), Ty::Array(v)) => assignable(t, v),
        (Ty::Tuple(ts), Ty::Tuple(vs)) => ts.len() == vs.len() && ts.iter().zip(vs).all(|(t, v)| assignable(t, v)),
        (t, v) => t == v,
    }
}

/// The common type of two branches, promoting int to real.
pub fn join(a: &Ty, b: &Ty) -> Option<Ty> {
    match (a, b) {
        (Ty::Unknown, t) | (t, Ty::Unknown) => Some(t.clone()),
        (Ty::Int, Ty::Real) | (Ty::Real, Ty::Int) => Some(Ty::Real),
        (Ty::Array(x), Ty::Array(y)) => join(x, y).map(|t| Ty::Array(Box::new(t))),
        (Ty::Tuple(xs), Ty::Tuple(ys)) if xs.len() == ys.len() => xs
            .iter()
            .zip(ys)
            .map(|(x, y)| join(x, y))
            .collect::<Option<Vec<_>>>()
            .map(Ty::Tuple),
        (x, y) if x == y => Some(x.clone()),
        _ => None,
    }
}

fn scalar_join(a: &Ty, b: &Ty) -> Ty {
    if *a == Ty::Int && *b == Ty::Int {
        Ty::Int
    } else {
        Ty::Real
    }
}

/// Result type of a binary operator, or `None` when the operands do not fit.
pub fn binary(op: BinOp, a: &Ty, b: &Ty) -> Option<Ty> {
    use Ty::*;
    if a.is_unknown() || b.is_unknown() {
        return Some(match op {
            BinOp::Or | BinOp::And | BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => Int,
            _ => Unknown,
        });
    }
    match op {
        BinOp::Or | BinOp::And | BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            (a.is_scalar() && b.is_scalar()).then_some(Int)
        }
        BinOp::Add | BinOp::Sub => match (a, b) {
            (x, y) if x.is_scalar() && y.is_scalar() => Some(scalar_join(x, y)),
            (x, y) if x.is_scalar() && y.is_linalg() => Some(y.clone()),
            (x, y) if x.is_linalg() && y.is_scalar() => Some(x.clone()),
            (x, y) if x.is_linalg() && x == y => Some(x.clone()),
            _ => None,
        },
        BinOp::Mul => match (a, b) {
            (x, y) if x.is_scalar() && y.is_scalar() => Some(scalar_join(x, y)),
            (x, y) if x.is_scalar() && y.is_linalg() => Some(y.clone()),
            (x, y) if x.is_linalg() && y.is_scalar() => Some(x.clone()),
            (Vector, RowVector) => Some(Matrix),
            (RowVector, Vector) => Some(Real),
            (Matrix, Vector) => Some(Vector),
            (RowVector, Matrix) => Some(RowVector),
            (Matrix, Matrix) => Some(Matrix),
            _ => None,
        },
        BinOp::Div => match (a, b) {
            (x, y) if x.is_scalar() && y.is_scalar() => Some(scalar_join(x, y)),
            (x, y) if x.is_linalg() && y.is_scalar() => Some(x.clone()),
            (x, y) if x.is_scalar() && y.is_linalg() => Some(y.clone()),
            (RowVector, Matrix) => Some(RowVector),
            (Matrix, Matrix) => Some(Matrix),
            _ => None,
        },
        BinOp::IntDiv | BinOp::Mod => (*a == Int && *b == Int).then_some(Int),
        BinOp::LeftDiv => match (a, b) {
            (Matrix, Vector) => Some(Vector),
            (Matrix, Matrix) => Some(Matrix),
            _ => None,
        },
        BinOp::ElMul | BinOp::ElDiv => match (a, b) {
            (x, y) if x.is_scalar() && y.is_scalar() => Some(Real),
            (x, y) if x.is_linalg() && x == y => Some(x.clone()),
            (x, y) if x.is_scalar() && y.is_linalg() => Some(y.clone()),
            (x, y) if x.is_linalg() && y.is_scalar() => Some(x.clone()),
            _ => None,
        },
        BinOp::Pow => match (a, b) {
            (x, y) if x.is_scalar() && y.is_scalar() => Some(Real),
            (x, y) if x.is_linalg() && y.is_scalar() => Some(x.clone()),
            _ => None,
        },
    }
}

pub fn unary(op: UnOp, a: &Ty) -> Option<Ty> {
    match op {
        UnOp::Not => (a.is_scalar() || a.is_unknown()).then_some(Ty::Int),
        UnOp::Neg | UnOp::Plus => (a.is_scalar() || a.is_linalg() || a.is_unknown()).then(|| a.clone()),
    }
}

pub fn transpose(a: &Ty) -> Option<Ty> {
    match a {
        Ty::Vector => Some(Ty::RowVector),
        Ty::RowVector => Some(Ty::Vector),
        Ty::Matrix => Some(Ty::Matrix),
        Ty::Unknown => Some(Ty::Unknown),
        _ => None,
    }
}

/// How each index position affects the indexed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexUse {
    /// A single integer: drops the dimension.
    Drop,
    /// A slice or a multi-index: keeps the dimension.
    Keep,
}

/// Type of `base[indices]`.
pub fn index(base: &Ty, uses: &[IndexUse]) -> Option<Ty> {
    if base.is_unknown() {
        return Some(Ty::Unknown);
    }
    let Some((first, rest)) = uses.split_first() else {
        return Some(base.clone());
    };
    match base {
        Ty::Array(e) => {
            let inner = index(e, rest)?;
            Some(match first {
                IndexUse::Drop => inner,
                IndexUse::Keep => Ty::Array(Box::new(inner)),
            })
        }
        Ty::Vector | Ty::RowVector => {
            if !rest.is_empty() {
                return None;
            }
            Some(match first {
                IndexUse::Drop => Ty::Real,
                IndexUse::Keep => base.clone(),
            })
        }
        Ty::Matrix => match (first, rest) {
            (IndexUse::Drop, []) => Some(Ty::RowVector),
            (IndexUse::Keep, []) => Some(Ty::Matrix),
            (IndexUse::Drop, [IndexUse::Drop]) => Some(Ty::Real),
            (IndexUse::Drop, [IndexUse::Keep]) => Some(Ty::RowVector),
            (IndexUse::Keep, [IndexUse::Drop]) => Some(Ty::Vector),
            (IndexUse::Keep, [IndexUse::Keep]) => Some(Ty::Matrix),
            _ => None,
        },
        _ => None,
    }
}

const ELEMENTWISE: &[&str] = &[
    "exp", "log", "sqrt", "square", "inv_logit", "logit", "Phi", "Phi_approx", "lgamma", "tgamma", "digamma",
    "log1p", "expm1", "abs", "fabs", "inv", "inv_sqrt", "inv_square", "tanh", "sinh", "cosh", "sin", "cos", "tan",
    "asin", "acos", "atan", "asinh", "acosh", "atanh", "log1m", "cbrt", "erf", "erfc", "log_inv_logit",
    "log1m_inv_logit", "floor", "ceil", "round", "trunc", "exp2", "log2", "log10", "inv_Phi", "log1m_exp",
    "cumulative_sum", "reverse", "sort_asc", "sort_desc", "softmax", "log_softmax", "step",
];

const REDUCTIONS: &[&str] = &[
    "sum", "prod", "mean", "sd", "variance", "max", "min", "log_sum_exp", "norm1", "norm2", "dot_self",
    "squared_distance", "distance", "dot_product", "sum_sq",
];

const SCALAR_FNS: &[&str] = &[
    "fmin", "fmax", "pow", "fdim", "hypot", "atan2", "fmod", "log_mix", "log_diff_exp", "binomial_coefficient_log",
    "lchoose", "lbeta", "owens_t", "inc_beta", "log_modified_bessel_first_kind", "log_falling_factorial",
    "log_rising_factorial", "multiply_log", "lmultiply", "determinant", "log_determinant", "trace", "e", "pi",
    "sqrt2", "log2", "not_a_number", "positive_infinity", "negative_infinity", "machine_precision",
];

const INT_FNS: &[&str] = &["size", "num_elements", "rows", "cols", "int_step", "is_inf", "is_nan", "to_int", "choose"];

const MATRIX_FNS: &[&str] = &[
    "rep_matrix", "to_matrix", "diag_matrix", "cholesky_decompose", "diag_pre_multiply", "diag_post_multiply",
    "multiply_lower_tri_self_transpose", "tcrossprod", "crossprod", "inverse", "inverse_spd", "gp_exp_quad_cov",
    "cov_exp_quad", "gp_matern32_cov", "gp_matern52_cov", "gp_exponential_cov", "gp_periodic_cov",
    "identity_matrix", "quad_form_diag", "add_diag", "block", "matrix_exp", "lkj_corr_cholesky_rng",
];

const VECTOR_FNS: &[&str] = &[
    "rep_vector", "to_vector", "col", "diagonal", "linspaced_vector", "one_hot_vector", "zeros_vector",
    "ones_vector", "uniform_simplex", "rows_dot_product", "columns_dot_self", "mdivide_left",
];

const ROW_VECTOR_FNS: &[&str] = &[
    "rep_row_vector", "to_row_vector", "row", "linspaced_row_vector", "one_hot_row_vector", "zeros_row_vector",
    "ones_row_vector", "columns_dot_product",
];

/// Result type of a builtin call, or `None` when the name is not a builtin.
pub fn builtin(name: &str, args: &[Ty]) -> Option<Ty> {
    let first = args.first().cloned().unwrap_or(Ty::Unknown);
    if name.ends_with("_lpdf")
        || name.ends_with("_lpmf")
        || name.ends_with("_lupdf")
        || name.ends_with("_lupmf")
        || name.ends_with("_lcdf")
        || name.ends_with("_lccdf")
        || name.ends_with("_cdf")
    {
        return Some(Ty::Real);
    }
    if name.ends_with("_rng") {
        let any_container = args.iter().any(|a| !a.is_scalar());
        return Some(if any_container { Ty::Array(Box::new(Ty::Real)) } else { Ty::Real });
    }
    if ELEMENTWISE.contains(&name) {
        return Some(match first {
            Ty::Int => Ty::Real,
            t => t,
        });
    }
    if REDUCTIONS.contains(&name) {
        return Some(match first {
            Ty::Array(e) if matches!(name, "sum" | "max" | "min") => match *e {
                Ty::Int => Ty::Int,
                Ty::Real => Ty::Real,
                Ty::Unknown => Ty::Unknown,
                other => other,
            },
            Ty::Int if matches!(name, "max" | "min") && args.iter().all(|a| *a == Ty::Int) => Ty::Int,
            Ty::Unknown if args.len() == 1 => Ty::Unknown,
            _ => Ty::Real,
        });
    }
    if SCALAR_FNS.contains(&name) {
        return Some(Ty::Real);
    }
    if INT_FNS.contains(&name) {
        return Some(Ty::Int);
    }
    if MATRIX_FNS.contains(&name) {
        return Some(Ty::Matrix);
    }
    if VECTOR_FNS.contains(&name) {
        return Some(Ty::Vector);
    }
    if ROW_VECTOR_FNS.contains(&name) {
        return Some(Ty::RowVector);
    }
    match name {
        "rep_array" => {
            let dims = args.len().saturating_sub(1).max(1);
            Some(first.with_dims(dims))
        }
        "append_row" => Some(match (&first, args.get(1)) {
            (Ty::Matrix, _) | (_, Some(Ty::Matrix)) | (Ty::RowVector, _) => Ty::Matrix,
            _ => Ty::Vector,
        }),
        "append_col" => Some(match (&first, args.get(1)) {
            (Ty::Matrix, _) | (_, Some(Ty::Matrix)) | (Ty::Vector, _) => Ty::Matrix,
            _ => Ty::RowVector,
        }),
        "head" | "tail" | "segment" | "append_array" => Some(first),
        "to_array_1d" => Some(Ty::Array(Box::new(match first.innermost() {
            Ty::Int => Ty::Int,
            _ => Ty::Real,
        }))),
        "print" | "reject" | "fatal_error" => Some(Ty::Void),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert_eq!(binary(BinOp::Add, &Ty::Int, &Ty::Int), Some(Ty::Int));
        assert_eq!(binary(BinOp::Add, &Ty::Int, &Ty::Real), Some(Ty::Real));
        assert_eq!(binary(BinOp::Mul, &Ty::Real, &Ty::RowVector), Some(Ty::RowVector));
        assert_eq!(binary(BinOp::Mul, &Ty::Vector, &Ty::Vector), None);
        assert_eq!(binary(BinOp::Add, &Ty::Vector, &Ty::RowVector), None);
        assert_eq!(binary(BinOp::ElMul, &Ty::RowVector, &Ty::RowVector), Some(Ty::RowVector));
        assert_eq!(binary(BinOp::ElDiv, &Ty::Real, &Ty::Vector), Some(Ty::Vector));
    }

    #[test]
    fn indexing() {
        use IndexUse::*;
        assert_eq!(index(&Ty::Matrix, &[Drop, Keep]), Some(Ty::RowVector));
        assert_eq!(index(&Ty::Matrix, &[Drop]), Some(Ty::RowVector));
        assert_eq!(index(&Ty::Matrix, &[Keep, Drop]), Some(Ty::Vector));
        assert_eq!(index(&Ty::Vector, &[Drop]), Some(Ty::Real));
        assert_eq!(index(&Ty::Real, &[Drop]), None);
        let arr = Ty::Array(Box::new(Ty::Vector));
        assert_eq!(index(&arr, &[Drop, Drop]), Some(Ty::Real));
        assert_eq!(index(&arr, &[Keep]), Some(arr.clone()));
    }

    #[test]
    fn promotion() {
        assert!(assignable(&Ty::Real, &Ty::Int));
        assert!(!assignable(&Ty::Int, &Ty::Real));
        assert_eq!(join(&Ty::Int, &Ty::Real), Some(Ty::Real));
        assert_eq!(join(&Ty::Vector, &Ty::Real), None);
        assert!(assignable(&Ty::Array(Box::new(Ty::Real)), &Ty::Array(Box::new(Ty::Int))));
    }

    #[test]
    fn builtins() {
        assert_eq!(builtin("logit", &[Ty::Vector]), Some(Ty::Vector));
        assert_eq!(builtin("exp", &[Ty::Int]), Some(Ty::Real));
        assert_eq!(builtin("sum", &[Ty::Array(Box::new(Ty::RowVector))]), Some(Ty::RowVector));
        assert_eq!(builtin("sum", &[Ty::Vector]), Some(Ty::Real));
        assert_eq!(builtin("normal_rng", &[Ty::Real, Ty::Real]), Some(Ty::Real));
        assert_eq!(builtin("rep_array", &[Ty::Real, Ty::Int]), Some(Ty::Array(Box::new(Ty::Real))));
        assert_eq!(builtin("no_such_function", &[]), None);
    }
}
