//! Implementation sets built from indexed templates, powers and products.
//!
//! A family is the list of implementations a decorated reference such as
//! `Theta*Col[1..100]^C2` stands for. Members are addressed by position so
//! large families never have to be listed.

use std::collections::{BTreeSet, HashMap};

use super::ranges::{IndexSpace, Tuples};
use crate::syntax::visit::{all_decls, map_exprs_in_stmts, map_expr, rename_vars_in_expr, rename_vars_in_stmts, top_level_decls};
use crate::syntax::{ident_part, Block, Distribution, Expr, ExprKind, FieldDecl, HoleCall, HoleRef, Param, Power, PowerKind, RangeItem, Span, Stmt, StmtKind};

/// One written implementation, with its sites already rewritten to core form.
#[derive(Debug, Clone)]
pub(crate) struct Source {
    pub name: String,
    pub field: FieldDecl,
    pub append: Vec<Block>,
    /// Index variables of a template; empty for plain implementations.
    pub vars: Vec<String>,
    /// Core holes called from the field or append blocks.
    pub children: BTreeSet<String>,
    /// The same holes as indices into the expanded program.
    pub child_ids: Vec<u32>,
    pub span: Span,
}

#[derive(Debug, Clone)]
pub(crate) struct Operand {
    pub hole: String,
    pub plain: Vec<Source>,
    pub templates: Vec<Source>,
    pub index: Option<IndexSpace>,
    pub power: Option<Power>,
}

impl Operand {
    /// Implementations before any power: plain ones, then one per index tuple
    /// and template, ordered by index and then name.
    pub fn base_count(&self) -> u64 {
        let per = self.index.as_ref().and_then(|i| i.count()).unwrap_or(0);
        let n = self.plain.len() as u128 + self.templates.len() as u128 * per;
        u64::try_from(n).unwrap_or(u64::MAX)
    }

    pub fn tuples(&self) -> Tuples {
        match self.power {
            Some(p) => Tuples {
                m: self.base_count(),
                kind: p.kind,
                n: p.n,
            },
            None => Tuples::single(self.base_count()),
        }
    }

    /// Members are written by their index alone when nothing else varies.
    pub fn bare(&self) -> bool {
        self.plain.is_empty() && self.templates.len() == 1 && self.index.is_some()
    }

    pub fn source(&self, k: u64) -> (&Source, Vec<i64>) {
        let p = self.plain.len() as u64;
        if k < p {
            return (&self.plain[k as usize], Vec::new());
        }
        let t = self.templates.len() as u64;
        let r = k - p;
        let idx = self.index.as_ref().map(|i| i.unrank((r / t) as u128)).unwrap_or_default();
        (&self.templates[(r % t) as usize], idx)
    }

    fn atoms(&self, k: u64, out: &mut Vec<String>) {
        let (src, idx) = self.source(k);
        if self.bare() {
            out.extend(idx.iter().map(|v| v.to_string()));
        } else if idx.is_empty() {
            out.push(src.name.clone());
        } else {
            out.push(format!("{}[{}]", src.name, join(&idx, ",")));
        }
    }

    /// Consume the atoms naming one base implementation.
    fn parse_atoms(&self, atoms: &[String]) -> Result<(u64, usize), MemberError> {
        let first = atoms.first().ok_or(MemberError::Shape)?;
        if self.bare() && !first.contains('[') {
            let space = self.index.as_ref().unwrap();
            let n = space.arity();
            if atoms.len() < n {
                return Err(MemberError::Shape);
            }
            let vals = atoms[..n]
                .iter()
                .map(|a| a.parse::<i64>().map_err(|_| MemberError::UnknownImpl(a.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            let r = space.rank(&vals).ok_or_else(|| MemberError::OutOfRange(atoms[..n].join(",")))?;
            return Ok((r as u64, n));
        }
        if let Some((name, rest)) = first.split_once('[') {
            let t = self
                .templates
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| MemberError::UnknownImpl(first.clone()))?;
            let inner = rest.strip_suffix(']').ok_or(MemberError::Shape)?;
            let vals = inner
                .split(',')
                .map(|a| a.parse::<i64>().map_err(|_| MemberError::UnknownImpl(first.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            let space = self.index.as_ref().ok_or_else(|| MemberError::UnknownImpl(first.clone()))?;
            let r = space.rank(&vals).ok_or_else(|| MemberError::OutOfRange(first.clone()))?;
            let k = self.plain.len() as u128 + r * self.templates.len() as u128 + t as u128;
            return Ok((k as u64, 1));
        }
        let k = self
            .plain
            .iter()
            .position(|s| s.name == *first)
            .ok_or_else(|| MemberError::UnknownImpl(first.clone()))?;
        Ok((k as u64, 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum MemberError {
    UnknownImpl(String),
    OutOfRange(String),
    /// Wrong number of atoms, or a tuple the power excludes.
    Shape,
}

#[derive(Debug, Clone)]
pub(crate) struct Family {
    /// User-facing name: operand names with their powers, ranges dropped.
    pub key: String,
    pub operands: Vec<Operand>,
}

impl Family {
    pub fn count(&self) -> Option<u64> {
        let n = self.operands.iter().try_fold(1u128, |acc, o| acc.checked_mul(o.tuples().count()?))?;
        u64::try_from(n).ok()
    }

    /// A product (or power) rather than a single implementation per member.
    pub fn is_product(&self) -> bool {
        self.operands.len() > 1 || self.operands[0].power.is_some()
    }

    /// Base-implementation ordinals per operand for member `ord`; the first
    /// operand varies slowest.
    pub fn decode(&self, mut ord: u64) -> Vec<(usize, u64)> {
        let mut parts = Vec::new();
        for (k, o) in self.operands.iter().enumerate().rev() {
            let t = o.tuples();
            let c = t.count().unwrap_or(u128::MAX).min(u64::MAX as u128) as u64;
            parts.push((k, t, ord % c));
            ord /= c;
        }
        let mut out = Vec::new();
        for (k, t, r) in parts.into_iter().rev() {
            out.extend(t.unrank(r as u128).into_iter().map(|b| (k, b)));
        }
        out
    }

    pub fn choices(&self, ord: u64) -> Vec<(&Operand, (&Source, Vec<i64>))> {
        self.decode(ord)
            .into_iter()
            .map(|(k, b)| {
                let o = &self.operands[k];
                (o, o.source(b))
            })
            .collect()
    }

    pub fn atoms(&self, ord: u64) -> Vec<String> {
        let mut out = Vec::new();
        for (k, b) in self.decode(ord) {
            self.operands[k].atoms(b, &mut out);
        }
        out
    }

    /// `3`, `a`, `f[2]`, `(1,2)`, `(t,1,2)`.
    pub fn display(&self, ord: u64) -> String {
        let atoms = self.atoms(ord);
        if atoms.len() == 1 {
            atoms.into_iter().next().unwrap()
        } else {
            format!("({})", atoms.join(","))
        }
    }

    /// Inverse of `display`. Unordered powers accept their tuple in any order.
    pub fn parse_member(&self, text: &str) -> Result<u64, MemberError> {
        let atoms = split_atoms(text);
        let mut at = 0;
        let mut ord: u128 = 0;
        for o in &self.operands {
            let t = o.tuples();
            let mut picked = Vec::new();
            for _ in 0..t.n {
                let (k, used) = o.parse_atoms(&atoms[at.min(atoms.len())..])?;
                picked.push(k);
                at += used;
            }
            if t.kind == PowerKind::Comb {
                picked.sort_unstable();
            }
            let r = t.rank(&picked).ok_or(MemberError::Shape)?;
            ord = ord * t.count().ok_or(MemberError::Shape)? + r;
        }
        if at != atoms.len() {
            return Err(MemberError::Shape);
        }
        u64::try_from(ord).map_err(|_| MemberError::Shape)
    }

    /// Hole name for the member's include/exclude choice.
    pub fn member_hole(&self, ord: u64) -> String {
        format!("{}_{}", self.key, self.atoms(ord).join("_"))
    }

    /// The member as one anonymous field plus its append blocks. Globals of
    /// template instances get `_<hole>_<index>`; product components get
    /// `_<hole>_<member>`, plus their position when a hole repeats.
    pub fn instantiate(&self, ord: u64) -> (FieldDecl, Vec<Block>) {
        let choices = self.choices(ord);
        if !self.is_product() {
            let (o, (src, idx)) = &choices[0];
            let suffix = format!("{}_{}", ident_part(&o.hole), join(idx, "_"));
            return instance_of(src, idx, (!idx.is_empty()).then_some(suffix.as_str()));
        }
        let member = ident_part(&self.display(ord));
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (o, _) in &choices {
            *seen.entry(o.hole.as_str()).or_default() += 1;
        }
        let mut params = Vec::new();
        let mut body = Vec::new();
        let mut rets = Vec::new();
        let mut append: Vec<Block> = Vec::new();
        for (k, (o, (src, idx))) in choices.iter().enumerate() {
            let mut suffix = format!("{}_{member}", ident_part(&o.hole));
            if seen[o.hole.as_str()] > 1 {
                suffix = format!("{suffix}_{}", k + 1);
            }
            let (mut f, blocks) = instance_of(src, idx, Some(&suffix));
            // Keep locals and parameters of different components apart.
            let mut locals: Vec<String> = f.params.iter().map(|p| p.name.clone()).collect();
            all_decls(&f.body, &mut locals);
            let map: HashMap<String, String> = locals.into_iter().map(|n| (n.clone(), format!("{n}_{}", k + 1))).collect();
            let rename = |n: &str| map.get(n).cloned();
            rename_vars_in_stmts(&mut f.body, &rename);
            if let Some(r) = &mut f.ret {
                rename_vars_in_expr(r, &rename);
            }
            params.extend(f.params.into_iter().map(|p| Param {
                name: map[&p.name].clone(),
                ..p
            }));
            body.extend(f.body);
            rets.extend(f.ret);
            for b in blocks {
                match append.iter_mut().find(|a| a.kind == b.kind) {
                    Some(a) => a.stmts.extend(b.stmts),
                    None => append.push(b),
                }
            }
        }
        append.sort_by_key(|b| b.kind);
        let ret = (rets.len() == choices.len()).then(|| Expr::new(ExprKind::Tuple(rets)));
        let field = FieldDecl {
            name: String::new(),
            params,
            has_subject: false,
            body,
            ret,
            span: choices[0].1 .0.span,
        };
        (field, append)
    }
}

/// A source with index variables replaced by `idx` and, if `suffix` is
/// given, its append-block globals renamed `name_suffix`.
pub(crate) fn instance_of(src: &Source, idx: &[i64], suffix: Option<&str>) -> (FieldDecl, Vec<Block>) {
    let mut fields = vec![src.field.clone()];
    let mut append = src.append.clone();
    let vals: HashMap<&str, i64> = src.vars.iter().map(String::as_str).zip(idx.iter().copied()).collect();
    specialize(&mut fields, &mut append, &vals, suffix);
    (fields.pop().unwrap(), append)
}

/// Substitute index variables and rename append-block globals in place.
pub(crate) fn specialize(fields: &mut [FieldDecl], append: &mut [Block], vals: &HashMap<&str, i64>, suffix: Option<&str>) {
    if !vals.is_empty() {
        let mut subst = |e: &mut Expr| {
            if let ExprKind::Var(n) = &e.kind {
                if let Some(v) = vals.get(n.as_str()) {
                    e.kind = ExprKind::Int(*v);
                }
            }
            if let ExprKind::Hole(hc) = &mut e.kind {
                subst_ranges(&mut hc.hole, vals);
            }
        };
        for f in fields.iter_mut() {
            map_exprs_in_stmts(&mut f.body, &mut subst);
            each_call_mut(&mut f.body, &mut |hc| subst_ranges(&mut hc.hole, vals));
            if let Some(r) = &mut f.ret {
                map_expr(r, &mut subst);
            }
        }
        for b in append.iter_mut() {
            map_exprs_in_stmts(&mut b.stmts, &mut subst);
            each_call_mut(&mut b.stmts, &mut |hc| subst_ranges(&mut hc.hole, vals));
        }
    }
    let Some(suffix) = suffix else { return };
    let map: HashMap<String, String> = append
        .iter()
        .flat_map(|b| top_level_decls(&b.stmts))
        .map(|n| (n.clone(), format!("{n}_{suffix}")))
        .collect();
    if map.is_empty() {
        return;
    }
    let rename = |n: &str| map.get(n).cloned();
    for f in fields.iter_mut() {
        rename_vars_in_stmts(&mut f.body, &rename);
        if let Some(r) = &mut f.ret {
            rename_vars_in_expr(r, &rename);
        }
    }
    for b in append.iter_mut() {
        rename_vars_in_stmts(&mut b.stmts, &rename);
    }
}

fn subst_ranges(h: &mut HoleRef, vals: &HashMap<&str, i64>) {
    for op in &mut h.operands {
        let ranges = op.index.iter_mut().chain(op.instance.as_mut().map(|i| &mut i.range));
        for items in ranges {
            for it in items.iter_mut() {
                if let RangeItem::Var(v) = it {
                    if let Some(x) = vals.get(v.as_str()) {
                        *it = RangeItem::Index(*x);
                    }
                }
            }
        }
    }
}

/// Hole calls in `y ~ H(..)` position, which expression traversals miss.
pub(crate) fn each_call_mut(stmts: &mut [Stmt], f: &mut impl FnMut(&mut HoleCall)) {
    for s in stmts {
        match &mut s.kind {
            StmtKind::Tilde {
                dist: Distribution::Hole(hc),
                ..
            } => f(hc),
            StmtKind::For { body, .. } | StmtKind::While { body, .. } | StmtKind::Block(body) => each_call_mut(body, f),
            StmtKind::If { then, els, .. } => {
                each_call_mut(then, f);
                if let Some(e) = els {
                    each_call_mut(e, f);
                }
            }
            _ => {}
        }
    }
}

fn join(vals: &[i64], sep: &str) -> String {
    vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

/// `(t,1,f[2,3])` into `t`, `1`, `f[2,3]`; a bare atom stays whole.
pub(crate) fn split_atoms(text: &str) -> Vec<String> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let inner = match t.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        Some(s) => s.to_string(),
        None => return vec![t],
    };
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in inner.chars() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn source(name: &str, vars: &[&str]) -> Source {
        let ast = parse(&format!("module \"{name}\" H() {{ parameters {{ real theta; }} return theta; }}")).unwrap();
        let d = &ast.impls[0];
        Source {
            name: name.into(),
            field: d.fields[0].clone(),
            append: d.append.clone(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            children: BTreeSet::new(),
            child_ids: Vec::new(),
            span: d.span,
        }
    }

    fn operand(hole: &str, plain: &[&str], templates: &[&str], range: Option<(i64, i64)>, power: Option<Power>) -> Operand {
        Operand {
            hole: hole.into(),
            plain: plain.iter().map(|n| source(n, &[])).collect(),
            templates: templates.iter().map(|n| source(n, &["n"])).collect(),
            index: range.map(|(lo, hi)| IndexSpace::new(&[RangeItem::Range { lo, hi }]).unwrap()),
            power,
        }
    }

    #[test]
    fn products_and_powers() {
        let f = Family {
            key: "H1*H2".into(),
            operands: vec![operand("H1", &["a", "b"], &[], None, None), operand("H2", &["x", "y", "z"], &[], None, None)],
        };
        assert_eq!(f.count(), Some(6));
        assert_eq!(f.display(0), "(a,x)");
        assert_eq!(f.display(5), "(b,z)");
        assert_eq!(f.parse_member("(b,y)"), Ok(4));
        assert_eq!(f.parse_member("(b,q)"), Err(MemberError::UnknownImpl("q".into())));

        let c2 = Power { kind: PowerKind::Comb, n: 2 };
        let f = Family {
            key: "H^C2".into(),
            operands: vec![operand("H", &["a", "b", "c"], &[], None, Some(c2))],
        };
        assert_eq!(f.count(), Some(3));
        assert_eq!((0..3).map(|k| f.display(k)).collect::<Vec<_>>(), ["(a,b)", "(a,c)", "(b,c)"]);
        assert_eq!(f.parse_member("(c,a)"), Ok(1));
        assert_eq!(f.parse_member("(a,a)"), Err(MemberError::Shape));
    }

    #[test]
    fn bare_indices_and_ranges() {
        let f = Family {
            key: "Feature".into(),
            operands: vec![operand("Feature", &[], &["f"], Some((1, 100)), None)],
        };
        assert_eq!(f.count(), Some(100));
        assert_eq!(f.display(4), "5");
        assert_eq!(f.member_hole(4), "Feature_5");
        assert_eq!(f.parse_member("5"), Ok(4));
        assert_eq!(f.parse_member("101"), Err(MemberError::OutOfRange("101".into())));
        let (field, append) = f.instantiate(4);
        assert_eq!(field.ret, Some(Expr::var("theta_Feature_5")));
        assert!(matches!(&append[0].stmts[0], Stmt { kind: crate::syntax::StmtKind::Decl { name, .. }, .. } if name == "theta_Feature_5"));

        let g = Family {
            key: "h".into(),
            operands: vec![operand("h", &["a"], &["i"], Some((1, 3)), None)],
        };
        assert_eq!((0..4).map(|k| g.display(k)).collect::<Vec<_>>(), ["a", "i[1]", "i[2]", "i[3]"]);
        assert_eq!(g.parse_member("i[5]"), Err(MemberError::OutOfRange("i[5]".into())));
    }

    #[test]
    fn product_members_keep_components_apart() {
        let c2 = Power { kind: PowerKind::Comb, n: 2 };
        let f = Family {
            key: "Theta*Col^C2".into(),
            operands: vec![
                operand("Theta", &["t"], &[], None, None),
                operand("Col", &[], &["r"], Some((1, 100)), Some(c2)),
            ],
        };
        assert_eq!(f.count(), Some(4950));
        assert_eq!(f.display(0), "(t,1,2)");
        assert_eq!(f.parse_member("(t,1,2)"), Ok(0));
        let (field, append) = f.instantiate(0);
        let decls: Vec<String> = append.iter().flat_map(|b| top_level_decls(&b.stmts)).collect();
        assert_eq!(decls.len(), 3);
        assert!(decls.iter().collect::<BTreeSet<_>>().len() == 3, "{decls:?}");
        assert!(matches!(field.ret.unwrap().kind, ExprKind::Tuple(v) if v.len() == 3));
    }

    #[test]
    fn atoms() {
        assert_eq!(split_atoms("(t, 1,f[2,3])"), ["t", "1", "f[2,3]"]);
        assert_eq!(split_atoms("f[1,2]"), ["f[1,2]"]);
    }
}
