//! The hole/implementation relation seen abstractly, so the same graph
//! algorithms run on core programs and on lazily expanded macro programs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Debug;
use std::hash::Hash;

use crate::program::ModularProgram;

pub trait Space {
    type Hole: Clone + Ord + Hash + Debug;
    type Impl: Clone + Ord + Hash + Debug;

    fn base_holes(&self) -> Vec<Self::Hole>;
    /// Implementations of `h`, in name order.
    fn impls(&self, h: &Self::Hole) -> Vec<Self::Impl>;
    /// Holes called by `i`, without duplicates.
    fn holes(&self, i: &Self::Impl) -> Vec<Self::Hole>;
    fn parent(&self, i: &Self::Impl) -> Self::Hole;
    fn hole_name(&self, h: &Self::Hole) -> String;
    fn impl_name(&self, i: &Self::Impl) -> String;
}

/// A selection over a space, keyed by hole.
pub type SpaceSelection<S> = BTreeMap<<S as Space>::Hole, <S as Space>::Impl>;

impl Space for ModularProgram {
    type Hole = String;
    /// Index into `impls()`.
    type Impl = usize;

    fn base_holes(&self) -> Vec<String> {
        ModularProgram::base_holes(self).iter().cloned().collect()
    }

    fn impls(&self, h: &String) -> Vec<usize> {
        self.impl_indices(h).to_vec()
    }

    fn holes(&self, i: &usize) -> Vec<String> {
        self.impls()[*i].holes().iter().cloned().collect()
    }

    fn parent(&self, i: &usize) -> String {
        self.impls()[*i].hole.clone()
    }

    fn hole_name(&self, h: &String) -> String {
        h.clone()
    }

    fn impl_name(&self, i: &usize) -> String {
        self.impls()[*i].name.clone()
    }
}

/// Holes reachable from the base through `sel`, counting how many of the
/// base and selected implementations call each one.
pub fn requirement_counts<S: Space>(space: &S, sel: &SpaceSelection<S>) -> HashMap<S::Hole, u32> {
    let mut counts: HashMap<S::Hole, u32> = HashMap::new();
    let mut stack = Vec::new();
    for h in space.base_holes() {
        let c = counts.entry(h.clone()).or_insert(0);
        *c += 1;
        if *c == 1 {
            stack.push(h);
        }
    }
    while let Some(h) = stack.pop() {
        if let Some(i) = sel.get(&h) {
            for g in space.holes(i) {
                let c = counts.entry(g.clone()).or_insert(0);
                *c += 1;
                if *c == 1 {
                    stack.push(g);
                }
            }
        }
    }
    counts
}

/// The subset of `sel` reachable from the base.
pub fn close<S: Space>(space: &S, sel: &SpaceSelection<S>) -> SpaceSelection<S> {
    let mut out = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut stack = space.base_holes();
    seen.extend(stack.iter().cloned());
    while let Some(h) = stack.pop() {
        if let Some(i) = sel.get(&h) {
            out.insert(h.clone(), i.clone());
            for g in space.holes(i) {
                if seen.insert(g.clone()) {
                    stack.push(g);
                }
            }
        }
    }
    out
}

/// The selection taking the implementation with the smallest name for
/// every hole it reaches. `None` when some reached hole has no implementation.
pub fn first_selection<S: Space>(space: &S) -> Option<SpaceSelection<S>> {
    let mut out = BTreeMap::new();
    let mut stack = space.base_holes();
    while let Some(h) = stack.pop() {
        if out.contains_key(&h) {
            continue;
        }
        let i = space.impls(&h).into_iter().min_by_key(|i| space.impl_name(i))?;
        stack.extend(space.holes(&i));
        out.insert(h, i);
    }
    Some(out)
}

/// Whether `sel` binds exactly the holes required by the base and by `sel`
/// itself, each to one of its own implementations.
pub fn is_valid<S: Space>(space: &S, sel: &SpaceSelection<S>) -> bool {
    if sel.iter().any(|(h, i)| space.parent(i) != *h) {
        return false;
    }
    let mut required: BTreeSet<S::Hole> = space.base_holes().into_iter().collect();
    for i in sel.values() {
        required.extend(space.holes(i));
    }
    required.len() == sel.len() && required.iter().all(|h| sel.contains_key(h))
}

/// A neighbour expressed as a change to the current selection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Delta<H, I> {
    /// The hole whose implementation changed, with old and new implementation.
    pub hole: H,
    pub from: I,
    pub to: I,
    /// Holes that are no longer required.
    pub removed: Vec<H>,
    /// Bindings for newly required holes (not bound before).
    pub added: Vec<(H, I)>,
}

impl<H: Ord + Clone, I: Clone> Delta<H, I> {
    pub fn apply(&self, sel: &BTreeMap<H, I>) -> BTreeMap<H, I> {
        let mut out = sel.clone();
        for h in &self.removed {
            out.remove(h);
        }
        out.insert(self.hole.clone(), self.to.clone());
        for (h, i) in &self.added {
            out.insert(h.clone(), i.clone());
        }
        out
    }
}

/// Every neighbour of a valid selection, computed locally: swap one binding,
/// enumerate choices for holes that become required, and drop holes that are
/// no longer reachable. Holes still required keep their current binding.
pub fn neighbor_deltas<S: Space>(space: &S, sel: &SpaceSelection<S>) -> Vec<Delta<S::Hole, S::Impl>> {
    let counts = requirement_counts(space, sel);
    let mut out = Vec::new();
    for (h, i) in sel {
        for alt in space.impls(h) {
            if alt == *i {
                continue;
            }
            let mut overlay: HashMap<S::Hole, i64> = HashMap::new();
            let mut free: Vec<S::Hole> = Vec::new();
            for g in space.holes(&alt) {
                bump(space, sel, &counts, &mut overlay, &mut free, &g, 1);
            }
            let ctx = Ctx {
                space,
                sel,
                counts: &counts,
                hole: h,
                from: i,
                to: &alt,
            };
            ctx.choose(overlay, free, Vec::new(), &mut out);
        }
    }
    out
}

struct Ctx<'a, S: Space> {
    space: &'a S,
    sel: &'a SpaceSelection<S>,
    counts: &'a HashMap<S::Hole, u32>,
    hole: &'a S::Hole,
    from: &'a S::Impl,
    to: &'a S::Impl,
}

fn effective<S: Space>(counts: &HashMap<S::Hole, u32>, overlay: &HashMap<S::Hole, i64>, g: &S::Hole) -> i64 {
    counts.get(g).copied().unwrap_or(0) as i64 + overlay.get(g).copied().unwrap_or(0)
}

/// Adjust the requirement count of `g`; a hole that becomes required without
/// a binding in `sel` is queued as free.
fn bump<S: Space>(
    _space: &S,
    sel: &SpaceSelection<S>,
    counts: &HashMap<S::Hole, u32>,
    overlay: &mut HashMap<S::Hole, i64>,
    free: &mut Vec<S::Hole>,
    g: &S::Hole,
    by: i64,
) {
    let before = effective::<S>(counts, overlay, g);
    *overlay.entry(g.clone()).or_insert(0) += by;
    if before == 0 && by > 0 && !sel.contains_key(g) && !free.contains(g) {
        free.push(g.clone());
    }
}

impl<'a, S: Space> Ctx<'a, S> {
    fn choose(
        &self,
        overlay: HashMap<S::Hole, i64>,
        mut free: Vec<S::Hole>,
        chosen: Vec<(S::Hole, S::Impl)>,
        out: &mut Vec<Delta<S::Hole, S::Impl>>,
    ) {
        let Some(g) = free.pop() else {
            out.push(self.finish(overlay, chosen));
            return;
        };
        for cand in self.space.impls(&g) {
            let mut ov = overlay.clone();
            let mut fr = free.clone();
            for c in self.space.holes(&cand) {
                bump(self.space, self.sel, self.counts, &mut ov, &mut fr, &c, 1);
            }
            let mut ch = chosen.clone();
            ch.push((g.clone(), cand));
            self.choose(ov, fr, ch, out);
        }
    }

    /// Remove the old implementation's requirements and cascade removals of
    /// holes nobody needs any more.
    fn finish(&self, mut overlay: HashMap<S::Hole, i64>, mut chosen: Vec<(S::Hole, S::Impl)>) -> Delta<S::Hole, S::Impl> {
        let mut removed = Vec::new();
        let mut stack: Vec<S::Impl> = vec![self.from.clone()];
        while let Some(imp) = stack.pop() {
            for g in self.space.holes(&imp) {
                *overlay.entry(g.clone()).or_insert(0) -= 1;
                if effective::<S>(self.counts, &overlay, &g) == 0 {
                    if let Some(j) = self.sel.get(&g) {
                        removed.push(g.clone());
                        stack.push(j.clone());
                    }
                }
            }
        }
        removed.sort();
        chosen.sort();
        Delta {
            hole: self.hole.clone(),
            from: self.from.clone(),
            to: self.to.clone(),
            removed,
            added: chosen,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn mean_stddev() -> ModularProgram {
        ModularProgram::from_ast(&parse(crate::testutil::MEAN_STDDEV).unwrap()).unwrap()
    }

    fn by_names(p: &ModularProgram, s: &[(&str, &str)]) -> SpaceSelection<ModularProgram> {
        s.iter()
            .map(|(h, i)| {
                let idx = p.impls().iter().position(|x| x.hole == *h && x.name == *i).unwrap();
                (h.to_string(), idx)
            })
            .collect()
    }

    #[test]
    fn deltas_on_the_mean_stddev_example() {
        let p = mean_stddev();
        let start = by_names(&p, &[("Mean", "standard"), ("Stddev", "standard")]);
        assert!(is_valid(&p, &start));
        let ds = neighbor_deltas(&p, &start);
        assert_eq!(ds.len(), 3);
        for d in &ds {
            assert!(is_valid(&p, &d.apply(&start)));
        }
        let from_full = by_names(&p, &[("Mean", "normal"), ("Stddev", "lognormal"), ("StddevInformative", "yes")]);
        let ds = neighbor_deltas(&p, &from_full);
        // Mean swap, Stddev swap (drops StddevInformative), StddevInformative swap.
        assert_eq!(ds.len(), 3);
        let dropped = ds.iter().find(|d| d.hole == "Stddev").unwrap();
        assert_eq!(dropped.removed, vec!["StddevInformative".to_string()]);
    }

    #[test]
    fn close_and_validity() {
        let p = mean_stddev();
        let s = by_names(&p, &[("Mean", "normal"), ("Stddev", "standard"), ("StddevInformative", "yes")]);
        assert!(!is_valid(&p, &s));
        let c = close(&p, &s);
        assert_eq!(c.len(), 2);
        assert!(is_valid(&p, &c));
    }

    #[test]
    fn first_selection_picks_smallest_names() {
        let p = mean_stddev();
        let s = first_selection(&p).unwrap();
        assert!(is_valid(&p, &s));
        // "lognormal" < "standard", so StddevInformative is reached too.
        assert_eq!(s, by_names(&p, &[("Mean", "normal"), ("Stddev", "lognormal"), ("StddevInformative", "no")]));
    }
}
