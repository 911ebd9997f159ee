//! Macro layer: indexed holes, instances, copies, range powers, products
//! and collections, expanded into core holes.
//!
//! Everything except collection members is expanded up front. A collection
//! `K+` becomes a core hole `K` whose single implementation calls one
//! include/exclude hole per member; members are numbered, and their bodies are
//! only built when a selection actually includes them.

mod count;
mod expand;
mod family;
pub mod ranges;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use crate::graph::space::{Delta, Space, SpaceSelection};
use crate::program::{Implementation, ModularProgram, Selection, Violation};
use crate::syntax::selection::{BindingValue, SelectionSpec};
use crate::syntax::{Ast, Block, Expr, ExprKind, FieldDecl, HoleCall, Param, Span, Stmt, StmtKind};

pub use count::{count_models, ModelCount};
pub use expand::EAGER_LIMIT;
use family::{Family, MemberError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacroErrorKind {
    Conflict,
    Unsupported,
    TooLarge,
    UnknownMember,
    UnknownImpl,
    IndexOutOfRange,
    MissingCopyBinding,
}

impl MacroErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            MacroErrorKind::Conflict => "MACRO_CONFLICT",
            MacroErrorKind::Unsupported | MacroErrorKind::TooLarge => "MACRO_ERROR",
            MacroErrorKind::UnknownMember => "UNKNOWN_MEMBER",
            MacroErrorKind::UnknownImpl => "UNKNOWN_IMPL",
            MacroErrorKind::IndexOutOfRange => "INDEX_OUT_OF_RANGE",
            MacroErrorKind::MissingCopyBinding => "MISSING_COPY_BINDING",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct MacroError {
    pub kind: MacroErrorKind,
    /// Source position for expansion errors; empty for selection errors.
    pub span: Span,
    pub message: String,
}

impl fmt::Display for MacroError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.span.line > 0 {
            write!(f, "{}:{}: ", self.span.line, self.span.col)?;
        }
        write!(f, "{}: {}", self.kind.code(), self.message)
    }
}

fn selection_error(kind: MacroErrorKind, message: impl Into<String>) -> MacroError {
    MacroError {
        kind,
        span: Span::default(),
        message: message.into(),
    }
}

pub(crate) struct CoreHole {
    pub name: String,
    pub kind: HoleKind,
}

pub(crate) enum HoleKind {
    Eager(Vec<EagerImpl>),
    /// Index into `collections`.
    Collection(u32),
}

pub(crate) struct EagerImpl {
    pub imp: Implementation,
    pub children: Vec<u32>,
}

pub(crate) struct Collection {
    pub hole: u32,
    pub family: Family,
    /// Arguments passed at the call site.
    pub arity: usize,
    /// Members return values (collected into an array) rather than run for effect.
    pub value: bool,
}

impl Collection {
    pub fn count(&self) -> u64 {
        self.family.count().unwrap_or(u64::MAX)
    }

    /// No member calls another hole.
    pub fn leafy(&self) -> bool {
        self.family
            .operands
            .iter()
            .flat_map(|o| o.plain.iter().chain(&o.templates))
            .all(|s| s.child_ids.is_empty())
    }

    pub fn merge_name(&self) -> String {
        format!("merge_{}", crate::syntax::ident_part(&self.family.key))
    }
}

/// A hole of the expanded program: a core hole or a collection member's
/// include/exclude choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MHole {
    Core(u32),
    Member(u32, u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MImpl {
    /// Hole and position among its implementations.
    Eager(u32, u32),
    /// The implementation of a collection hole.
    Merge(u32),
    No(u32, u64),
    Yes(u32, u64),
}

/// A synthetic module built on demand: its field and append blocks.
type Instantiated = Arc<(FieldDecl, Vec<Block>)>;

/// An expanded program whose collection members are built on demand.
pub struct MacroProgram {
    base: Vec<Block>,
    holes: Vec<CoreHole>,
    by_name: HashMap<String, u32>,
    collections: Vec<Collection>,
    base_holes: Vec<u32>,
    /// Copy hole (`h<<1>>`) to the hole it copies.
    copies: BTreeMap<String, String>,
    /// Families behind product and indexed holes built in full.
    eager_families: HashMap<u32, Family>,
    /// `Collection::leafy`, per collection.
    leafy: Vec<bool>,
    instantiations: AtomicU64,
    cache: RwLock<HashMap<(u32, u64), Instantiated>>,
}

impl fmt::Debug for MacroProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MacroProgram")
            .field("holes", &self.holes.iter().map(|h| &h.name).collect::<Vec<_>>())
            .field("collections", &self.collections.len())
            .finish()
    }
}

/// Expand the macros in `ast`.
pub fn expand(ast: &Ast) -> Result<MacroProgram, MacroError> {
    expand::expand(ast)
}

/// Members per collection to include; collections not listed include none.
pub type Pick = BTreeMap<u32, Vec<u64>>;

impl MacroProgram {
    pub(crate) fn from_parts(
        base: Vec<Block>,
        holes: Vec<CoreHole>,
        by_name: HashMap<String, u32>,
        collections: Vec<Collection>,
        base_holes: Vec<u32>,
        copies: BTreeMap<String, String>,
        eager_families: HashMap<u32, Family>,
    ) -> MacroProgram {
        MacroProgram {
            leafy: collections.iter().map(Collection::leafy).collect(),
            base,
            holes,
            by_name,
            collections,
            base_holes,
            copies,
            eager_families,
            instantiations: AtomicU64::new(0),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn has_collections(&self) -> bool {
        !self.collections.is_empty()
    }

    /// Collection keys with their member counts.
    pub fn member_counts(&self) -> Vec<(String, u64)> {
        self.collections.iter().map(|c| (c.family.key.clone(), c.count())).collect()
    }

    pub fn total_members(&self) -> u128 {
        self.collections.iter().map(|c| c.count() as u128).sum()
    }

    /// Member bodies built so far.
    pub fn instantiations(&self) -> u64 {
        self.instantiations.load(Ordering::Relaxed)
    }

    pub fn hole_id(&self, name: &str) -> Option<u32> {
        self.by_name.get(name).copied()
    }

    pub fn collection_of(&self, name: &str) -> Option<u32> {
        let h = self.hole_id(name)?;
        match self.holes[h as usize].kind {
            HoleKind::Collection(c) => Some(c),
            HoleKind::Eager(_) => None,
        }
    }

    fn eager(&self, h: u32) -> &[EagerImpl] {
        match &self.holes[h as usize].kind {
            HoleKind::Eager(v) => v,
            HoleKind::Collection(_) => &[],
        }
    }

    /// Body of member `ord`, built once and shared afterwards.
    fn member(&self, c: u32, ord: u64) -> Instantiated {
        if let Some(m) = self.cache.read().unwrap().get(&(c, ord)) {
            return m.clone();
        }
        let mut cache = self.cache.write().unwrap();
        cache
            .entry((c, ord))
            .or_insert_with(|| {
                self.instantiations.fetch_add(1, Ordering::Relaxed);
                Arc::new(self.collections[c as usize].family.instantiate(ord))
            })
            .clone()
    }

    fn member_children(&self, c: u32, ord: u64) -> Vec<u32> {
        if self.leafy[c as usize] {
            return Vec::new();
        }
        let mut out = BTreeSet::new();
        for (_, (src, _)) in self.collections[c as usize].family.choices(ord) {
            out.extend(src.child_ids.iter().copied());
        }
        out.into_iter().collect()
    }

    /// The member holes of a collection as a contiguous key range.
    fn member_range(c: u32) -> std::ops::RangeInclusive<MHole> {
        MHole::Member(c, 0)..=MHole::Member(c, u64::MAX)
    }

    /// A core program with every eager implementation, and for each
    /// collection a merge implementation over the picked members only.
    pub fn materialize(&self, pick: &Pick) -> ModularProgram {
        let mut impls: Vec<Implementation> = Vec::new();
        for h in &self.holes {
            if let HoleKind::Eager(v) = &h.kind {
                impls.extend(v.iter().map(|e| e.imp.clone()));
            }
        }
        for (ci, c) in self.collections.iter().enumerate() {
            let members = pick.get(&(ci as u32)).map(Vec::as_slice).unwrap_or(&[]);
            let args: Vec<Expr> = (1..=c.arity).map(|k| Expr::var(format!("arg{k}"))).collect();
            let params = (1..=c.arity)
                .map(|k| Param {
                    ty: None,
                    name: format!("arg{k}"),
                    span: Span::default(),
                })
                .collect();
            let calls: Vec<HoleCall> = members.iter().map(|&o| HoleCall::plain(c.family.member_hole(o), args.clone())).collect();
            let (body, ret) = if c.value {
                let items = calls.into_iter().map(|hc| Expr::new(ExprKind::Hole(hc))).collect();
                (Vec::new(), Some(Expr::new(ExprKind::Array(items))))
            } else {
                let stmts = calls
                    .into_iter()
                    .map(|hc| Stmt::new(StmtKind::Expr(Expr::new(ExprKind::Hole(hc)))))
                    .collect();
                (stmts, None)
            };
            let field = FieldDecl {
                name: String::new(),
                params,
                has_subject: false,
                body,
                ret,
                span: Span::default(),
            };
            impls.push(Implementation::new(&c.family.key, c.merge_name(), vec![field], Vec::new(), Span::default()));
            for &o in members {
                let m = self.member(ci as u32, o);
                impls.push(Implementation::new(c.family.member_hole(o), "yes", vec![m.0.clone()], m.1.clone(), m.0.span));
            }
        }
        ModularProgram::new(self.base.clone(), impls)
    }

    /// Members worth type checking: all of a small collection, otherwise the
    /// first and last.
    pub fn representative_pick(&self) -> Pick {
        self.collections
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                let n = c.count();
                let members = if n <= 64 {
                    (0..n).collect()
                } else {
                    vec![0, n - 1]
                };
                (ci as u32, members)
            })
            .collect()
    }

    /// The whole program when it has no collections; a representative
    /// materialization otherwise.
    pub fn core_program(&self) -> ModularProgram {
        self.materialize(&self.representative_pick())
    }

    /// Picked members and the matching name-keyed selection over `materialize(pick)`.
    pub fn materialized_selection(&self, sel: &SpaceSelection<Self>) -> (Pick, Selection) {
        let mut pick = Pick::new();
        let mut named = Selection::new();
        for (h, i) in sel {
            match (h, i) {
                (MHole::Member(c, o), MImpl::Yes(..)) => {
                    pick.entry(*c).or_default().push(*o);
                    let fam = &self.collections[*c as usize].family;
                    named.insert(fam.member_hole(*o), "yes".into());
                }
                (MHole::Member(..), _) => {}
                _ => {
                    named.insert(self.hole_name(h), self.impl_name(i));
                }
            }
        }
        (pick, named)
    }

    /// Translate a user selection into bindings over the expanded program.
    /// Names that do not exist are reported as violations rather than errors,
    /// like for core programs.
    pub fn translate(&self, spec: &SelectionSpec) -> Result<(SpaceSelection<Self>, Vec<Violation>), MacroError> {
        let mut sel = SpaceSelection::<Self>::new();
        let mut violations = Vec::new();
        for (key, value) in &spec.bindings {
            let Some(h) = self.resolve_key(key) else {
                violations.push(Violation::NotInProgram {
                    hole: key.clone(),
                    implementation: value.to_string(),
                });
                continue;
            };
            match (&self.holes[h as usize].kind, value) {
                (HoleKind::Collection(c), BindingValue::Subset(items)) => {
                    let coll = &self.collections[*c as usize];
                    let mut yes = BTreeSet::new();
                    for it in items {
                        let ord = coll.family.parse_member(it).map_err(|e| member_error(key, it, e, true))?;
                        yes.insert(ord);
                    }
                    sel.insert(MHole::Core(h), MImpl::Merge(*c));
                    for o in 0..coll.count() {
                        let i = if yes.contains(&o) { MImpl::Yes(*c, o) } else { MImpl::No(*c, o) };
                        sel.insert(MHole::Member(*c, o), i);
                    }
                }
                (HoleKind::Collection(_), BindingValue::Impl(v)) => {
                    return Err(selection_error(
                        MacroErrorKind::UnknownMember,
                        format!("`{key}` is a collection; bind it to a member list such as `{key}:[{v}]`"),
                    ))
                }
                (HoleKind::Eager(impls), BindingValue::Impl(name)) => {
                    let name = self.normalize_impl(h, key, name)?;
                    match impls.iter().position(|e| e.imp.name == name) {
                        Some(k) => {
                            sel.insert(MHole::Core(h), MImpl::Eager(h, k as u32));
                        }
                        None => violations.push(Violation::NotInProgram {
                            hole: key.clone(),
                            implementation: name,
                        }),
                    }
                }
                (HoleKind::Eager(_), BindingValue::Subset(_)) => {
                    return Err(selection_error(
                        MacroErrorKind::UnknownImpl,
                        format!("`{key}` is not a collection and takes a single implementation"),
                    ))
                }
            }
        }
        violations.extend(self.violations(&sel));
        for v in &violations {
            if let Violation::MissingHole { hole } = v {
                if let Some(orig) = self.copies.get(hole) {
                    return Err(selection_error(
                        MacroErrorKind::MissingCopyBinding,
                        format!("copy `{hole}` of `{orig}` is required but not bound; copies are selected independently"),
                    ));
                }
            }
        }
        Ok((sel, violations))
    }

    /// Exact key, or a product key written with a plain exponent (`^2`) for
    /// an unordered or ordered power (`^C2`) when that is unambiguous.
    fn resolve_key(&self, key: &str) -> Option<u32> {
        if let Some(h) = self.hole_id(key) {
            return Some(h);
        }
        let loose = |k: &str| k.replace("^C", "^").replace("^P", "^");
        let mut hits = self.holes.iter().enumerate().filter(|(_, h)| h.name.contains('^') && loose(&h.name) == key);
        match (hits.next(), hits.next()) {
            (Some((k, _)), None) => Some(k as u32),
            _ => None,
        }
    }

    /// Implementation names of product holes in canonical tuple form, with
    /// index errors for indexed holes.
    fn normalize_impl(&self, h: u32, key: &str, name: &str) -> Result<String, MacroError> {
        let Some(fam) = self.eager_family(h) else { return Ok(name.to_string()) };
        match fam.parse_member(name) {
            Ok(ord) => Ok(fam.display(ord)),
            Err(e @ MemberError::OutOfRange(_)) => Err(member_error(key, name, e, false)),
            Err(e) if fam.is_product() => Err(member_error(key, name, e, false)),
            Err(_) => Ok(name.to_string()),
        }
    }

    fn eager_family(&self, h: u32) -> Option<&Family> {
        self.eager_families.get(&h)
    }

    /// Missing and superfluous bindings.
    pub fn violations(&self, sel: &SpaceSelection<Self>) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut required: BTreeSet<MHole> = self.base_holes.iter().map(|&h| MHole::Core(h)).collect();
        for i in sel.values() {
            required.extend(self.holes(i));
        }
        for h in &required {
            if !sel.contains_key(h) {
                out.push(Violation::MissingHole { hole: self.hole_name(h) });
            }
        }
        for (h, i) in sel {
            if !required.contains(h) {
                out.push(Violation::ExtraImpl {
                    hole: self.hole_name(h),
                    implementation: self.impl_name(i),
                });
            }
        }
        out
    }

    /// User-facing form of a selection: collections become member lists.
    pub fn label(&self, sel: &SpaceSelection<Self>) -> Selection {
        let mut out = Selection::new();
        for (h, i) in sel {
            match (h, i) {
                (MHole::Core(_), MImpl::Merge(c)) => {
                    let fam = &self.collections[*c as usize].family;
                    let members: Vec<String> = sel
                        .range(Self::member_range(*c))
                        .filter(|(_, i)| matches!(i, MImpl::Yes(..)))
                        .map(|(h, _)| match h {
                            MHole::Member(_, o) => fam.display(*o),
                            MHole::Core(_) => unreachable!(),
                        })
                        .collect();
                    out.insert(fam.key.clone(), format!("[{}]", members.join(",")));
                }
                (MHole::Core(_), _) => {
                    out.insert(self.hole_name(h), self.impl_name(i));
                }
                (MHole::Member(..), _) => {}
            }
        }
        out
    }

    /// Neighbours of `sel` as user-facing selections, without building any
    /// member body.
    pub fn neighbor_labels(&self, sel: &SpaceSelection<Self>) -> Vec<Selection> {
        let deltas = crate::graph::space::neighbor_deltas(self, sel);
        let compact = Compact::of(sel);
        let base = compact.to_selection(self);
        let mut shown: HashMap<(u32, u64), String> = HashMap::new();
        for (c, yes) in &compact.subsets {
            for &o in yes {
                shown.insert((*c, o), self.collections[*c as usize].family.display(o));
            }
        }
        let entry = |c: u32, yes: &mut dyn Iterator<Item = u64>| {
            let fam = &self.collections[c as usize].family;
            let members: Vec<String> = yes
                .map(|o| shown.get(&(c, o)).cloned().unwrap_or_else(|| fam.display(o)))
                .collect();
            (fam.key.clone(), format!("[{}]", members.join(",")))
        };
        // Each neighbour differs from `sel` in a few entries; only those are
        // rewritten. Toggling one member of a leaf collection is the common case.
        deltas
            .iter()
            .map(|d| {
                let mut out = base.clone();
                if let (MHole::Member(c, o), true) = (d.hole, d.removed.is_empty() && d.added.is_empty()) {
                    let yes = &compact.subsets[&c];
                    let (k, v) = if yes.contains(&o) {
                        entry(c, &mut yes.iter().copied().filter(|&x| x != o))
                    } else {
                        entry(c, &mut yes.iter().copied().chain([o]).collect::<BTreeSet<_>>().into_iter())
                    };
                    out.insert(k, v);
                    return out;
                }
                let next = compact.apply(self, d);
                for (h, i) in &compact.plain {
                    if next.plain.get(h) != Some(i) {
                        out.remove(&self.holes[*h as usize].name);
                    }
                }
                for (h, i) in &next.plain {
                    if compact.plain.get(h) != Some(i) {
                        out.insert(self.holes[*h as usize].name.clone(), self.impl_name(i));
                    }
                }
                for c in compact.subsets.keys() {
                    if !next.subsets.contains_key(c) {
                        out.remove(&self.collections[*c as usize].family.key);
                    }
                }
                for (c, yes) in &next.subsets {
                    if compact.subsets.get(c) != Some(yes) {
                        let (k, v) = entry(*c, &mut yes.iter().copied());
                        out.insert(k, v);
                    }
                }
                out
            })
            .collect()
    }
}

fn member_error(key: &str, item: &str, e: MemberError, collection: bool) -> MacroError {
    match e {
        MemberError::OutOfRange(i) => selection_error(
            MacroErrorKind::IndexOutOfRange,
            format!("`{i}` is outside the index range of `{key}`"),
        ),
        MemberError::UnknownImpl(i) if !collection || item.starts_with('(') => {
            selection_error(MacroErrorKind::UnknownImpl, format!("`{i}` in `{item}` is not an implementation of `{key}`"))
        }
        _ => selection_error(MacroErrorKind::UnknownMember, format!("`{item}` is not a member of `{key}`")),
    }
}

/// A selection kept the way users write it, so that single changes are cheap.
#[derive(Clone)]
struct Compact {
    plain: BTreeMap<u32, MImpl>,
    subsets: BTreeMap<u32, BTreeSet<u64>>,
}

impl Compact {
    fn of(sel: &SpaceSelection<MacroProgram>) -> Compact {
        let mut out = Compact {
            plain: BTreeMap::new(),
            subsets: BTreeMap::new(),
        };
        for (h, i) in sel {
            match (h, i) {
                (MHole::Core(_), MImpl::Merge(c)) => {
                    let yes = sel
                        .range(MacroProgram::member_range(*c))
                        .filter_map(|(h, i)| match (h, i) {
                            (MHole::Member(_, o), MImpl::Yes(..)) => Some(*o),
                            _ => None,
                        })
                        .collect();
                    out.subsets.insert(*c, yes);
                }
                (MHole::Core(h), _) => {
                    out.plain.insert(*h, *i);
                }
                _ => {}
            }
        }
        out
    }

    fn set(&mut self, h: &MHole, i: &MImpl) {
        match (h, i) {
            (MHole::Core(_), MImpl::Merge(c)) => {
                self.subsets.entry(*c).or_default();
            }
            (MHole::Core(h), _) => {
                self.plain.insert(*h, *i);
            }
            (MHole::Member(c, o), MImpl::Yes(..)) => {
                self.subsets.entry(*c).or_default().insert(*o);
            }
            (MHole::Member(c, o), _) => {
                if let Some(s) = self.subsets.get_mut(c) {
                    s.remove(o);
                }
            }
        }
    }

    fn apply(&self, p: &MacroProgram, d: &Delta<MHole, MImpl>) -> Compact {
        let mut out = self.clone();
        for h in &d.removed {
            match h {
                MHole::Core(h) => match p.holes[*h as usize].kind {
                    HoleKind::Collection(c) => {
                        out.subsets.remove(&c);
                    }
                    HoleKind::Eager(_) => {
                        out.plain.remove(h);
                    }
                },
                MHole::Member(c, o) => {
                    if let Some(s) = out.subsets.get_mut(c) {
                        s.remove(o);
                    }
                }
            }
        }
        out.set(&d.hole, &d.to);
        for (h, i) in &d.added {
            out.set(h, i);
        }
        out
    }

    fn to_selection(&self, p: &MacroProgram) -> Selection {
        let mut out = Selection::new();
        for (h, i) in &self.plain {
            out.insert(p.holes[*h as usize].name.clone(), p.impl_name(i));
        }
        for (c, yes) in &self.subsets {
            let fam = &p.collections[*c as usize].family;
            let members: Vec<String> = yes.iter().map(|&o| fam.display(o)).collect();
            out.insert(fam.key.clone(), format!("[{}]", members.join(",")));
        }
        out
    }
}

impl Space for MacroProgram {
    type Hole = MHole;
    type Impl = MImpl;

    fn base_holes(&self) -> Vec<MHole> {
        self.base_holes.iter().map(|&h| MHole::Core(h)).collect()
    }

    fn impls(&self, h: &MHole) -> Vec<MImpl> {
        match *h {
            MHole::Core(h) => match &self.holes[h as usize].kind {
                HoleKind::Eager(v) => (0..v.len() as u32).map(|k| MImpl::Eager(h, k)).collect(),
                HoleKind::Collection(c) => vec![MImpl::Merge(*c)],
            },
            MHole::Member(c, o) => vec![MImpl::No(c, o), MImpl::Yes(c, o)],
        }
    }

    fn holes(&self, i: &MImpl) -> Vec<MHole> {
        match *i {
            MImpl::Eager(h, k) => self.eager(h)[k as usize].children.iter().map(|&c| MHole::Core(c)).collect(),
            MImpl::Merge(c) => (0..self.collections[c as usize].count()).map(|o| MHole::Member(c, o)).collect(),
            MImpl::Yes(c, o) => self.member_children(c, o).into_iter().map(MHole::Core).collect(),
            MImpl::No(..) => Vec::new(),
        }
    }

    fn parent(&self, i: &MImpl) -> MHole {
        match *i {
            MImpl::Eager(h, _) => MHole::Core(h),
            MImpl::Merge(c) => MHole::Core(self.collections[c as usize].hole),
            MImpl::Yes(c, o) | MImpl::No(c, o) => MHole::Member(c, o),
        }
    }

    fn hole_name(&self, h: &MHole) -> String {
        match *h {
            MHole::Core(h) => self.holes[h as usize].name.clone(),
            MHole::Member(c, o) => self.collections[c as usize].family.member_hole(o),
        }
    }

    fn impl_name(&self, i: &MImpl) -> String {
        match *i {
            MImpl::Eager(h, k) => self.eager(h)[k as usize].imp.name.clone(),
            MImpl::Merge(c) => self.collections[c as usize].merge_name(),
            MImpl::Yes(..) => "yes".into(),
            MImpl::No(..) => "no".into(),
        }
    }
}
