//! Exhaustive oracle: every combination of implementations, closed from the
//! base and deduplicated; edges by pairwise sibling counting.

use std::collections::{BTreeSet, HashSet};

use super::space::{close, is_valid, Space, SpaceSelection};
use super::{GraphError, Labeler, ModelGraph};

pub fn naive_graph<S: Space>(space: &S, cap: usize, label: Labeler<S>) -> Result<ModelGraph, GraphError> {
    let mut holes = BTreeSet::new();
    let mut stack = space.base_holes();
    holes.extend(stack.iter().cloned());
    while let Some(h) = stack.pop() {
        for i in space.impls(&h) {
            for g in space.holes(&i) {
                if holes.insert(g.clone()) {
                    stack.push(g);
                }
            }
        }
    }
    let holes: Vec<S::Hole> = holes.into_iter().collect();
    let choices: Vec<Vec<S::Impl>> = holes.iter().map(|h| space.impls(h)).collect();
    let mut total: u128 = 1;
    for c in &choices {
        total = total.saturating_mul(c.len() as u128);
    }
    if total > cap as u128 {
        return Err(GraphError::CapExceeded {
            what: "combinations".into(),
            count: total.to_string(),
        });
    }

    let mut seen: HashSet<SpaceSelection<S>> = HashSet::new();
    let mut nodes: Vec<SpaceSelection<S>> = Vec::new();
    if total > 0 {
        let mut digits = vec![0usize; holes.len()];
        loop {
            let full: SpaceSelection<S> = holes
                .iter()
                .zip(&digits)
                .zip(&choices)
                .map(|((h, &d), c)| (h.clone(), c[d].clone()))
                .collect();
            let closed = close(space, &full);
            if is_valid(space, &closed) && seen.insert(closed.clone()) {
                nodes.push(closed);
            }
            let mut k = 0;
            loop {
                if k == digits.len() {
                    break;
                }
                digits[k] += 1;
                if digits[k] < choices[k].len() {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
            if k == digits.len() {
                break;
            }
        }
    }

    let mut edges = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let mut diff = nodes[a]
                .iter()
                .filter_map(|(h, ia)| nodes[b].get(h).filter(|ib| *ib != ia).map(|ib| (h, ia, ib)));
            if let (Some((h, ia, ib)), None) = (diff.next(), diff.next()) {
                edges.push((a, b, space.hole_name(h), space.impl_name(ia), space.impl_name(ib)));
            }
        }
    }
    let named = nodes.iter().map(label).collect();
    Ok(ModelGraph::from_parts(named, edges))
}
