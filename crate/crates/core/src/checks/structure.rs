//! Acyclicity, filled holes and unique names.

use std::collections::{BTreeMap, BTreeSet};

use super::{tidy, Code, Diagnostic};
use crate::program::{Container, ModularProgram};
use crate::syntax::Span;

/// For each hole, the holes called by any of its implementations.
pub fn hole_dependencies(p: &ModularProgram) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = p.holes().into_iter().map(|h| (h, BTreeSet::new())).collect();
    for i in p.impls() {
        out.entry(i.hole.clone()).or_default().extend(i.holes().iter().cloned());
    }
    out
}

pub fn validate_structure(p: &ModularProgram) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let sites = p.sites();
    let first_site = |h: &str| sites.iter().find(|s| s.hole == h).map(|s| s.span).unwrap_or_default();

    for h in p.holes() {
        if p.impls_of(&h).next().is_none() {
            diags.push(Diagnostic::new(Code::UnfilledHole, first_site(&h), format!("hole `{h}` has no implementation")));
        }
    }

    for w in p.impls().windows(2) {
        if w[0].hole == w[1].hole && w[0].name == w[1].name {
            let msg = format!("implementation `{}` of hole `{}` is defined more than once", w[1].name, w[1].hole);
            diags.push(Diagnostic::new(Code::DupImpl, w[1].span, msg));
        }
    }
    for i in p.impls() {
        let mut seen = BTreeSet::new();
        for f in &i.fields {
            if !seen.insert(&f.name) {
                let msg = format!("field `{}` of `{}` is defined more than once", f.name, i.id());
                diags.push(Diagnostic::new(Code::DupImpl, f.span, msg));
            }
        }
    }

    // Every implementation of a hole must provide each field used at its sites.
    for s in &sites {
        let field = s.field.as_deref().unwrap_or("");
        for i in p.impls_of(&s.hole) {
            if i.field(field).is_none() {
                let msg = if field.is_empty() {
                    format!("`{}` has named fields and cannot be called directly", i.id())
                } else {
                    format!("`{}` has no field `{field}`", i.id())
                };
                diags.push(Diagnostic::new(Code::UnfilledHole, s.span, msg));
            }
        }
    }

    if let Some(cycle) = find_cycle(&hole_dependencies(p)) {
        let (from, to) = (&cycle[cycle.len() - 2], &cycle[cycle.len() - 1]);
        let span = sites
            .iter()
            .find(|s| &s.hole == to && matches!(&s.container, Container::Impl { hole, .. } if hole == from))
            .map(|s| s.span)
            .unwrap_or_else(Span::default);
        diags.push(Diagnostic::new(Code::Cycle, span, format!("holes depend on each other: {}", cycle.join(" -> "))));
    }

    if diags.is_empty() {
        Ok(())
    } else {
        Err(tidy(diags))
    }
}

/// A dependency cycle as a path whose last element repeats an earlier one.
fn find_cycle(deps: &BTreeMap<String, BTreeSet<String>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark: BTreeMap<&str, Mark> = deps.keys().map(|k| (k.as_str(), Mark::New)).collect();
    for start in deps.keys() {
        if mark[start.as_str()] != Mark::New {
            continue;
        }
        // Iterative DFS keeping the active path.
        let mut path: Vec<&str> = vec![start];
        let mut iters: Vec<std::collections::btree_set::Iter<String>> = vec![deps[start].iter()];
        mark.insert(start, Mark::Active);
        while let Some(it) = iters.last_mut() {
            match it.next() {
                Some(next) => match mark.get(next.as_str()).copied().unwrap_or(Mark::Done) {
                    Mark::Active => {
                        let at = path.iter().position(|h| *h == next).unwrap();
                        let mut cycle: Vec<String> = path[at..].iter().map(|s| s.to_string()).collect();
                        cycle.push(next.clone());
                        return Some(cycle);
                    }
                    Mark::New => {
                        mark.insert(next, Mark::Active);
                        path.push(next);
                        iters.push(deps[next].iter());
                    }
                    Mark::Done => {}
                },
                None => {
                    let done = path.pop().unwrap();
                    mark.insert(done, Mark::Done);
                    iters.pop();
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn program(src: &str) -> ModularProgram {
        ModularProgram::from_ast(&parse(src).unwrap()).unwrap()
    }

    fn codes(p: &ModularProgram) -> Vec<(Code, String)> {
        validate_structure(p)
            .err()
            .unwrap_or_default()
            .into_iter()
            .map(|d| (d.code, d.message))
            .collect()
    }

    #[test]
    fn mean_stddev_is_well_formed() {
        assert!(validate_structure(&program(crate::testutil::MEAN_STDDEV)).is_ok());
    }

    #[test]
    fn self_loop() {
        let p = program("model { H(); } module \"a\" H() { H(); }");
        let got = codes(&p);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, Code::Cycle);
        assert!(got[0].1.contains("H -> H"));
    }

    #[test]
    fn longer_cycle() {
        let p = program("model { A(); } module \"a\" A() { B(); } module \"b\" B() { C(); } module \"c\" C() { A(); }");
        let got = codes(&p);
        assert_eq!(got[0].0, Code::Cycle);
        assert!(got[0].1.contains("A -> B -> C -> A"), "{}", got[0].1);
    }

    #[test]
    fn unfilled() {
        let src: String = crate::testutil::MEAN_STDDEV
            .lines()
            .filter(|l| !l.contains("StddevInformative() {"))
            .collect::<Vec<_>>()
            .join("\n");
        let got = codes(&program(&src));
        assert_eq!(got, vec![(Code::UnfilledHole, "hole `StddevInformative` has no implementation".to_string())]);
    }

    #[test]
    fn duplicates() {
        let p = program("model { H(); } module \"a\" H() { return 1; } module \"a\" H() { return 2; }");
        assert_eq!(codes(&p)[0].0, Code::DupImpl);
    }

    #[test]
    fn missing_field() {
        let p = program("model { H.f(); } module \"a\" H { field f() { } field g() { } } module \"b\" H { field g() { } }");
        let got = codes(&p);
        assert_eq!(got, vec![(Code::UnfilledHole, "`H:b` has no field `f`".to_string())]);
    }

    #[test]
    fn cycle_finder_agrees_on_dag() {
        let mut deps = BTreeMap::new();
        deps.insert("a".to_string(), BTreeSet::from(["b".to_string(), "c".to_string()]));
        deps.insert("b".to_string(), BTreeSet::from(["c".to_string()]));
        deps.insert("c".to_string(), BTreeSet::new());
        assert_eq!(find_cycle(&deps), None);
        deps.get_mut("c").unwrap().insert("a".into());
        assert!(find_cycle(&deps).is_some());
    }
}
