//! Tokenizer for the modular host language.

use super::ast::Span;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(String),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Tilde,
    Pipe,
    Dot,
    DotDot,
    Question,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    IntDiv,
    Backslash,
    Caret,
    Quote,
    Bang,
    Lt,
    Gt,
    Le,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Assign,
    PlusAssign,
    MinusAssign,
    StarAssign,
    SlashAssign,
    DotStar,
    DotSlash,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Real(s) => format!("real `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Tilde => "~",
            Tok::Pipe => "|",
            Tok::Dot => ".",
            Tok::DotDot => "..",
            Tok::Question => "?",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::IntDiv => "%/%",
            Tok::Backslash => "\\",
            Tok::Caret => "^",
            Tok::Quote => "'",
            Tok::Bang => "!",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Assign => "=",
            Tok::PlusAssign => "+=",
            Tok::MinusAssign => "-=",
            Tok::StarAssign => "*=",
            Tok::SlashAssign => "/=",
            Tok::DotStar => ".*",
            Tok::DotSlash => "./",
            Tok::Ident(_) | Tok::Int(_) | Tok::Real(_) | Tok::Str(_) => "",
            Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut lx = Lexer {
        src: src.as_bytes(),
        text: src,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia()?;
        let start = lx.mark();
        let Some(c) = lx.peek(0) else {
            out.push(Token {
                tok: Tok::Eof,
                span: lx.span_from(start),
            });
            return Ok(out);
        };
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            let s = lx.take_while(|b| b.is_ascii_alphanumeric() || b == b'_');
            Tok::Ident(s.to_string())
        } else if c.is_ascii_digit() || (c == b'.' && lx.peek(1).is_some_and(|d| d.is_ascii_digit())) {
            lx.number(start)?
        } else if c == b'"' {
            lx.bump();
            let body_start = lx.pos;
            while let Some(b) = lx.peek(0) {
                if b == b'"' || b == b'\n' {
                    break;
                }
                lx.bump();
            }
            if lx.peek(0) != Some(b'"') {
                return Err(SyntaxError::new(lx.span_from(start), "unterminated string literal", vec![]));
            }
            let body = lx.text[body_start..lx.pos].to_string();
            lx.bump();
            Tok::Str(body)
        } else {
            lx.punct(start)?
        };
        out.push(Token {
            tok,
            span: lx.span_from(start),
        });
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

#[derive(Clone, Copy)]
struct Mark {
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn peek(&self, k: usize) -> Option<u8> {
        self.src.get(self.pos + k).copied()
    }

    fn bump(&mut self) {
        if let Some(&b) = self.src.get(self.pos) {
            self.pos += 1;
            if b == b'\n' {
                self.line += 1;
                self.col = 1;
            } else if b & 0xC0 != 0x80 {
                self.col += 1;
            }
        }
    }

    fn mark(&self) -> Mark {
        Mark {
            pos: self.pos,
            line: self.line,
            col: self.col,
        }
    }

    fn span_from(&self, m: Mark) -> Span {
        Span {
            start: m.pos,
            end: self.pos,
            line: m.line,
            col: m.col,
        }
    }

    fn take_while(&mut self, f: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        while self.peek(0).is_some_and(&f) {
            self.bump();
        }
        &self.text[start..self.pos]
    }

    fn skip_trivia(&mut self) -> Result<(), SyntaxError> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(b), _) if b.is_ascii_whitespace() => self.bump(),
                (Some(b'/'), Some(b'/')) | (Some(b'#'), _) => {
                    while self.peek(0).is_some_and(|b| b != b'\n') {
                        self.bump();
                    }
                }
                (Some(b'/'), Some(b'*')) => {
                    let start = self.mark();
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some(b'*'), Some(b'/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => self.bump(),
                            (None, _) => {
                                return Err(SyntaxError::new(
                                    self.span_from(start),
                                    "unterminated block comment",
                                    vec![],
                                ))
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn number(&mut self, start: Mark) -> Result<Tok, SyntaxError> {
        self.take_while(|b| b.is_ascii_digit());
        let mut real = false;
        // `1..3` is a range, not a real literal followed by `.3`.
        if self.peek(0) == Some(b'.') && self.peek(1) != Some(b'.') {
            let next = self.peek(1);
            if next.is_some_and(|d| d.is_ascii_digit())
                || !next.is_some_and(|d| d == b'*' || d == b'/' || d.is_ascii_alphabetic() || d == b'_')
            {
                real = true;
                self.bump();
                self.take_while(|b| b.is_ascii_digit());
            }
        }
        if matches!(self.peek(0), Some(b'e') | Some(b'E')) {
            let sign = matches!(self.peek(1), Some(b'+') | Some(b'-'));
            let digit_at = if sign { 2 } else { 1 };
            if self.peek(digit_at).is_some_and(|d| d.is_ascii_digit()) {
                real = true;
                self.bump();
                if sign {
                    self.bump();
                }
                self.take_while(|b| b.is_ascii_digit());
            }
        }
        let text = &self.text[start.pos..self.pos];
        if real {
            Ok(Tok::Real(text.to_string()))
        } else {
            text.parse::<i64>()
                .map(Tok::Int)
                .map_err(|_| SyntaxError::new(self.span_from(start), "integer literal out of range", vec![]))
        }
    }

    fn punct(&mut self, start: Mark) -> Result<Tok, SyntaxError> {
        let c = self.peek(0).unwrap_or(0);
        let n = self.peek(1);
        let (tok, len) = match (c, n) {
            (b'%', Some(b'/')) if self.peek(2) == Some(b'%') => (Tok::IntDiv, 3),
            (b'.', Some(b'.')) => (Tok::DotDot, 2),
            (b'.', Some(b'*')) => (Tok::DotStar, 2),
            (b'.', Some(b'/')) => (Tok::DotSlash, 2),
            (b'<', Some(b'=')) => (Tok::Le, 2),
            (b'>', Some(b'=')) => (Tok::Ge, 2),
            (b'=', Some(b'=')) => (Tok::EqEq, 2),
            (b'!', Some(b'=')) => (Tok::Ne, 2),
            (b'&', Some(b'&')) => (Tok::AndAnd, 2),
            (b'|', Some(b'|')) => (Tok::OrOr, 2),
            (b'+', Some(b'=')) => (Tok::PlusAssign, 2),
            (b'-', Some(b'=')) => (Tok::MinusAssign, 2),
            (b'*', Some(b'=')) => (Tok::StarAssign, 2),
            (b'/', Some(b'=')) => (Tok::SlashAssign, 2),
            (b'{', _) => (Tok::LBrace, 1),
            (b'}', _) => (Tok::RBrace, 1),
            (b'(', _) => (Tok::LParen, 1),
            (b')', _) => (Tok::RParen, 1),
            (b'[', _) => (Tok::LBracket, 1),
            (b']', _) => (Tok::RBracket, 1),
            (b',', _) => (Tok::Comma, 1),
            (b';', _) => (Tok::Semi, 1),
            (b':', _) => (Tok::Colon, 1),
            (b'~', _) => (Tok::Tilde, 1),
            (b'|', _) => (Tok::Pipe, 1),
            (b'.', _) => (Tok::Dot, 1),
            (b'?', _) => (Tok::Question, 1),
            (b'+', _) => (Tok::Plus, 1),
            (b'-', _) => (Tok::Minus, 1),
            (b'*', _) => (Tok::Star, 1),
            (b'/', _) => (Tok::Slash, 1),
            (b'%', _) => (Tok::Percent, 1),
            (b'\\', _) => (Tok::Backslash, 1),
            (b'^', _) => (Tok::Caret, 1),
            (b'\'', _) => (Tok::Quote, 1),
            (b'!', _) => (Tok::Bang, 1),
            (b'<', _) => (Tok::Lt, 1),
            (b'>', _) => (Tok::Gt, 1),
            (b'=', _) => (Tok::Assign, 1),
            _ => {
                self.bump();
                let ch = self.text[start.pos..].chars().next().unwrap_or('?');
                return Err(SyntaxError::new(
                    self.span_from(start),
                    format!("unexpected character `{ch}`"),
                    vec![],
                ));
            }
        };
        for _ in 0..len {
            self.bump();
        }
        Ok(tok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn ranges_are_not_reals() {
        assert_eq!(
            toks("1..3"),
            vec![Tok::Int(1), Tok::DotDot, Tok::Int(3), Tok::Eof]
        );
        assert_eq!(toks("1.5e-3"), vec![Tok::Real("1.5e-3".into()), Tok::Eof]);
        assert_eq!(toks("2.0"), vec![Tok::Real("2.0".into()), Tok::Eof]);
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            toks("int J; // count\n/* a\nb */ x"),
            vec![
                Tok::Ident("int".into()),
                Tok::Ident("J".into()),
                Tok::Semi,
                Tok::Ident("x".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn spans_track_lines() {
        let t = tokenize("a\n  bb").unwrap();
        assert_eq!((t[1].span.line, t[1].span.col), (2, 3));
        assert_eq!(t[1].span.end - t[1].span.start, 2);
    }

    #[test]
    fn elementwise_ops() {
        assert_eq!(
            toks("a .* b ./ c"),
            vec![
                Tok::Ident("a".into()),
                Tok::DotStar,
                Tok::Ident("b".into()),
                Tok::DotSlash,
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }
}
