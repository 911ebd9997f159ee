//! Integer-indexed copy of the reachable part of a space.

use std::collections::{BinaryHeap, HashMap};
use std::cmp::Reverse;

use super::space::Space;
use super::GraphError;

pub type HoleId = u32;
pub type ImplId = u32;

#[derive(Debug, Clone)]
pub struct Skeleton<H, I> {
    pub holes: Vec<H>,
    pub impls: Vec<I>,
    pub hole_names: Vec<String>,
    pub impl_names: Vec<String>,
    /// Implementations of each hole, in the space's order.
    pub hole_impls: Vec<Vec<ImplId>>,
    /// Holes called by each implementation, ascending.
    pub impl_holes: Vec<Vec<HoleId>>,
    pub impl_parent: Vec<HoleId>,
    pub base: Vec<HoleId>,
}

impl<H: Clone + Ord + std::hash::Hash, I: Clone + Ord + std::hash::Hash> Skeleton<H, I> {
    /// Collect every hole reachable from the base. Fails once more than
    /// `cap` implementations have been seen.
    pub fn from_space<S: Space<Hole = H, Impl = I>>(space: &S, cap: usize) -> Result<Self, GraphError> {
        let mut order: Vec<H> = Vec::new();
        let mut seen: std::collections::HashSet<H> = Default::default();
        let mut stack = space.base_holes();
        seen.extend(stack.iter().cloned());
        let mut found_impls: HashMap<H, Vec<I>> = HashMap::new();
        let mut total = 0usize;
        while let Some(h) = stack.pop() {
            let is = space.impls(&h);
            total += is.len();
            if total > cap {
                return Err(GraphError::CapExceeded {
                    what: "implementations".into(),
                    count: format!("more than {cap}"),
                });
            }
            for i in &is {
                for g in space.holes(i) {
                    if seen.insert(g.clone()) {
                        stack.push(g);
                    }
                }
            }
            found_impls.insert(h.clone(), is);
            order.push(h);
        }
        order.sort();
        let hole_index: HashMap<H, HoleId> = order.iter().enumerate().map(|(k, h)| (h.clone(), k as HoleId)).collect();
        let mut impls = Vec::new();
        let mut hole_impls = Vec::new();
        let mut impl_holes = Vec::new();
        let mut impl_parent = Vec::new();
        for (k, h) in order.iter().enumerate() {
            let mut ids = Vec::new();
            for i in found_impls.remove(h).unwrap_or_default() {
                let mut hs: Vec<HoleId> = space.holes(&i).iter().map(|g| hole_index[g]).collect();
                hs.sort_unstable();
                hs.dedup();
                ids.push(impls.len() as ImplId);
                impl_holes.push(hs);
                impl_parent.push(k as HoleId);
                impls.push(i);
            }
            hole_impls.push(ids);
        }
        let mut base: Vec<HoleId> = space.base_holes().iter().map(|h| hole_index[h]).collect();
        base.sort_unstable();
        base.dedup();
        let hole_names = order.iter().map(|h| space.hole_name(h)).collect();
        let impl_names = impls.iter().map(|i| space.impl_name(i)).collect();
        Ok(Skeleton {
            holes: order,
            impls,
            hole_names,
            impl_names,
            hole_impls,
            impl_holes,
            impl_parent,
            base,
        })
    }
}

impl<H, I> Skeleton<H, I> {
    /// Topological order of the hole dependency graph, breaking ties by hole
    /// id. Fails on a cycle.
    pub fn topo_order(&self) -> Result<Vec<HoleId>, GraphError> {
        let n = self.holes.len();
        let mut indeg = vec![0usize; n];
        let mut succ: Vec<Vec<HoleId>> = vec![Vec::new(); n];
        for (h, is) in self.hole_impls.iter().enumerate() {
            let mut out: Vec<HoleId> = is.iter().flat_map(|&i| self.impl_holes[i as usize].iter().copied()).collect();
            out.sort_unstable();
            out.dedup();
            for &g in &out {
                indeg[g as usize] += 1;
            }
            succ[h] = out;
        }
        let mut ready: BinaryHeap<Reverse<HoleId>> = (0..n as HoleId).filter(|&h| indeg[h as usize] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(h)) = ready.pop() {
            order.push(h);
            for &g in &succ[h as usize] {
                indeg[g as usize] -= 1;
                if indeg[g as usize] == 0 {
                    ready.push(Reverse(g));
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&h| indeg[h] > 0).unwrap();
            return Err(GraphError::Cycle {
                hole: self.hole_names[stuck].clone(),
            });
        }
        Ok(order)
    }
}
