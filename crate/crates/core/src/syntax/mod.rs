//! Front end: tokens, parser, canonical renderer and selection strings.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod selection;
pub mod visit;

use std::fmt;

pub use ast::*;
pub use parser::{parse, parse_expr};
pub use render::{render, render_blocks};

/// `s` reduced to identifier characters, for use in generated names:
/// `Theta*Col^C2` becomes `Theta_Col_C2`, `h<<1>>` becomes `h_1`.
pub fn ident_part(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// A source text plus the path it was read from, if any.
#[derive(Debug, Clone)]
pub struct SourceProgram {
    pub text: String,
    pub path: Option<std::path::PathBuf>,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>) -> SourceProgram {
        SourceProgram {
            text: text.into(),
            path: None,
        }
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> std::io::Result<SourceProgram> {
        let path = path.as_ref();
        Ok(SourceProgram {
            text: std::fs::read_to_string(path)?,
            path: Some(path.to_path_buf()),
        })
    }
}

/// Parse failure with position and the set of tokens that would have been accepted.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
    pub expected: Vec<String>,
}

impl SyntaxError {
    pub fn new(span: Span, message: impl Into<String>, expected: Vec<String>) -> SyntaxError {
        SyntaxError {
            span,
            message: message.into(),
            expected,
        }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}
