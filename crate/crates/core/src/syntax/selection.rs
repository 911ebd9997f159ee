//! Selection strings: `Mean:normal,Stddev:lognormal`, plus macro payloads
//! such as `Feature:[1,2,3]`, `h<<1>>:i` and `Theta*Col:[(t,1),(t,2)]`.
//!
//! Whitespace is ignored everywhere; values are kept as compact text and
//! interpreted by the macro layer.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("malformed selection: {0}")]
    Syntax(String),
    #[error("hole `{0}` is bound more than once")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BindingValue {
    Impl(String),
    Subset(Vec<String>),
}

impl fmt::Display for BindingValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BindingValue::Impl(s) => f.write_str(s),
            BindingValue::Subset(items) => write!(f, "[{}]", items.join(",")),
        }
    }
}

/// Parsed selection, keyed by hole in lexicographic order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SelectionSpec {
    pub bindings: BTreeMap<String, BindingValue>,
}

impl SelectionSpec {
    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, hole: &str) -> Option<&BindingValue> {
        self.bindings.get(hole)
    }
}

impl fmt::Display for SelectionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (h, v)) in self.bindings.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{h}:{v}")?;
        }
        Ok(())
    }
}

pub fn parse_selection(text: &str) -> Result<SelectionSpec, SelectionError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut spec = SelectionSpec::default();
    if compact.is_empty() {
        return Ok(spec);
    }
    for part in split_top(&compact, ',')? {
        let colon = find_top(part, ':')?.ok_or_else(|| SelectionError::Syntax(format!("`{part}` has no `:`")))?;
        let hole = &part[..colon];
        let value = &part[colon + 1..];
        check_hole_key(hole)?;
        let value = parse_value(value)?;
        if spec.bindings.insert(hole.to_string(), value).is_some() {
            return Err(SelectionError::Duplicate(hole.to_string()));
        }
    }
    Ok(spec)
}

fn check_hole_key(hole: &str) -> Result<(), SelectionError> {
    let ok = !hole.is_empty()
        && hole.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && hole
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '*' | '^' | '<' | '>' | '.' | ','));
    if ok {
        Ok(())
    } else {
        Err(SelectionError::Syntax(format!("invalid hole name `{hole}`")))
    }
}

fn parse_value(v: &str) -> Result<BindingValue, SelectionError> {
    if v.is_empty() {
        return Err(SelectionError::Syntax("missing implementation name".into()));
    }
    if let Some(inner) = v.strip_prefix('[') {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| SelectionError::Syntax(format!("unclosed `[` in `{v}`")))?;
        let items = if inner.is_empty() {
            Vec::new()
        } else {
            split_top(inner, ',')?
                .into_iter()
                .map(|s| check_item(s).map(|_| s.to_string()))
                .collect::<Result<Vec<_>, _>>()?
        };
        return Ok(BindingValue::Subset(items));
    }
    check_item(v)?;
    Ok(BindingValue::Impl(v.to_string()))
}

/// An implementation reference: `name`, `5`, `name[1,2]`, `(a,1)`.
fn check_item(s: &str) -> Result<(), SelectionError> {
    if s.is_empty() {
        return Err(SelectionError::Syntax("empty implementation reference".into()));
    }
    let mut depth = 0i32;
    for c in s.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(SelectionError::Syntax(format!("unbalanced brackets in `{s}`")));
                }
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == ',' => {}
            _ => return Err(SelectionError::Syntax(format!("unexpected `{c}` in `{s}`"))),
        }
    }
    if depth != 0 {
        return Err(SelectionError::Syntax(format!("unbalanced brackets in `{s}`")));
    }
    Ok(())
}

fn split_top(s: &str, sep: char) -> Result<Vec<&str>, SelectionError> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '<' => depth += 1,
            ')' | ']' | '>' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(SelectionError::Syntax(format!("unbalanced brackets in `{s}`")));
        }
    }
    if depth != 0 {
        return Err(SelectionError::Syntax(format!("unbalanced brackets in `{s}`")));
    }
    out.push(&s[start..]);
    if out.iter().any(|p| p.is_empty()) {
        return Err(SelectionError::Syntax("empty binding".into()));
    }
    Ok(out)
}

fn find_top(s: &str, target: char) -> Result<Option<usize>, SelectionError> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '<' => depth += 1,
            ')' | ']' | '>' => depth -= 1,
            c if c == target && depth == 0 => return Ok(Some(i)),
            _ => {}
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_bindings() {
        let s = parse_selection("Mean:normal,Stddev:lognormal,StddevInformative:yes").unwrap();
        assert_eq!(s.bindings.len(), 3);
        assert_eq!(s.to_string(), "Mean:normal,Stddev:lognormal,StddevInformative:yes");
    }

    #[test]
    fn whitespace_is_ignored() {
        let a = parse_selection(" Stddev : standard ,  Mean:standard ").unwrap();
        assert_eq!(a.to_string(), "Mean:standard,Stddev:standard");
    }

    #[test]
    fn macro_payloads() {
        let s = parse_selection("Feature:[1,2,3]").unwrap();
        assert_eq!(
            s.get("Feature"),
            Some(&BindingValue::Subset(vec!["1".into(), "2".into(), "3".into()]))
        );
        let s = parse_selection("h:i[5],h<<1>>:a,Theta*Col:[(t,1),(t,2)],FeaturePair:[(1,2)]").unwrap();
        assert_eq!(s.get("h"), Some(&BindingValue::Impl("i[5]".into())));
        assert_eq!(s.get("h<<1>>"), Some(&BindingValue::Impl("a".into())));
        assert_eq!(
            s.get("Theta*Col"),
            Some(&BindingValue::Subset(vec!["(t,1)".into(), "(t,2)".into()]))
        );
        let again = parse_selection(&s.to_string()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn empty_and_errors() {
        assert!(parse_selection("").unwrap().is_empty());
        assert!(parse_selection("   ").unwrap().is_empty());
        assert_eq!(
            parse_selection("A:x,A:y").unwrap_err(),
            SelectionError::Duplicate("A".into())
        );
        assert!(parse_selection("A").is_err());
        assert!(parse_selection("A:").is_err());
        assert!(parse_selection("A:[1,2").is_err());
        assert!(parse_selection("A:x,,B:y").is_err());
        assert!(parse_selection("A:[]").is_ok());
    }
}
