//! Prefix expansion over a topological order of holes.
//!
//! Each prefix is a partial selection over the holes visited so far plus the
//! holes it still needs. Prefixes are bucketed by the next hole they need,
//! so visiting a hole only touches the prefixes that require it. Partial
//! selections are interned as parent-linked chains; because bindings are
//! always added in visit order, equal selections share one chain id.

use std::collections::HashMap;

use super::skeleton::{HoleId, ImplId, Skeleton};
use super::GraphError;

/// Interned partial selections; id 0 is the empty selection.
#[derive(Debug, Default)]
pub struct Chains {
    parent: Vec<u32>,
    binding: Vec<(HoleId, ImplId)>,
}

impl Chains {
    fn new() -> Chains {
        Chains {
            parent: vec![0],
            binding: vec![(HoleId::MAX, ImplId::MAX)],
        }
    }

    fn push(&mut self, parent: u32, b: (HoleId, ImplId)) -> u32 {
        self.parent.push(parent);
        self.binding.push(b);
        (self.parent.len() - 1) as u32
    }

    /// Bindings of chain `id`, sorted by hole id.
    pub fn bindings(&self, mut id: u32) -> Vec<(HoleId, ImplId)> {
        let mut out = Vec::new();
        while id != 0 {
            out.push(self.binding[id as usize]);
            id = self.parent[id as usize];
        }
        out.sort_unstable();
        out
    }

    pub fn len_of(&self, mut id: u32) -> usize {
        let mut n = 0;
        while id != 0 {
            n += 1;
            id = self.parent[id as usize];
        }
        n
    }
}

struct Prefix {
    chain: u32,
    /// Topological positions of required, unvisited holes, ascending.
    pending: Vec<u32>,
    /// Children created when this prefix was expanded: (impl, prefix index).
    children: Vec<(ImplId, u32)>,
}

/// An edge between two prefixes that differ in exactly one binding.
struct EdgePrefix {
    a: u32,
    b: u32,
    hole: HoleId,
    from: ImplId,
    to: ImplId,
}

#[derive(Debug)]
pub struct Expanded {
    pub chains: Chains,
    /// Final node chain ids, in the order they were completed.
    pub nodes: Vec<u32>,
    /// Edges between node positions in `nodes`, with the differing binding.
    pub edges: Vec<(usize, usize, HoleId, ImplId, ImplId)>,
}

impl Expanded {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, k: usize) -> Vec<(HoleId, ImplId)> {
        self.chains.bindings(self.nodes[k])
    }
}

pub struct ExpandOptions<'a> {
    pub edges: bool,
    /// Abort when the number of live prefixes exceeds this.
    pub cap: usize,
    /// Holes restricted to a single implementation.
    pub pins: Option<&'a HashMap<HoleId, ImplId>>,
}

/// Run the expansion. With `edges` false only node prefixes are tracked.
pub fn expand<H, I>(sk: &Skeleton<H, I>, opts: &ExpandOptions) -> Result<Expanded, GraphError> {
    let order = sk.topo_order()?;
    let n = order.len();
    let mut pos = vec![0u32; n];
    for (k, &h) in order.iter().enumerate() {
        pos[h as usize] = k as u32;
    }
    let impls_of = |h: HoleId| -> Vec<ImplId> {
        match opts.pins.and_then(|p| p.get(&h)) {
            Some(&i) => vec![i],
            None => sk.hole_impls[h as usize].clone(),
        }
    };

    let mut chains = Chains::new();
    let mut prefixes: Vec<Prefix> = Vec::new();
    let mut node_bucket: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut edge_bucket: Vec<Vec<EdgePrefix>> = (0..n).map(|_| Vec::new()).collect();
    let mut done_nodes: Vec<u32> = Vec::new();
    let mut done_edges: Vec<EdgePrefix> = Vec::new();
    let mut node_slot: HashMap<u32, usize> = HashMap::new();

    let mut root_pending: Vec<u32> = sk.base.iter().map(|&h| pos[h as usize]).collect();
    root_pending.sort_unstable();
    root_pending.dedup();
    prefixes.push(Prefix {
        chain: 0,
        pending: root_pending,
        children: Vec::new(),
    });
    let mut live = 1usize;
    place(&prefixes, 0, &mut node_bucket, &mut done_nodes);

    for t in 0..n as u32 {
        let h = order[t as usize];
        let bucket = std::mem::take(&mut node_bucket[t as usize]);
        let choices = impls_of(h);
        for p in bucket {
            let mut kids = Vec::with_capacity(choices.len());
            for &i in &choices {
                let parent = &prefixes[p as usize];
                let mut pending: Vec<u32> = parent.pending[1..].to_vec();
                pending.extend(sk.impl_holes[i as usize].iter().map(|&g| pos[g as usize]));
                pending.sort_unstable();
                pending.dedup();
                let chain = chains.push(parent.chain, (h, i));
                let idx = prefixes.len() as u32;
                prefixes.push(Prefix {
                    chain,
                    pending,
                    children: Vec::new(),
                });
                place(&prefixes, idx, &mut node_bucket, &mut done_nodes);
                kids.push((i, idx));
            }
            live += kids.len().saturating_sub(1);
            if live > opts.cap {
                return Err(GraphError::CapExceeded {
                    what: "models".into(),
                    count: format!("more than {}", opts.cap),
                });
            }
            if opts.edges {
                for x in 0..kids.len() {
                    for y in x + 1..kids.len() {
                        let e = EdgePrefix {
                            a: kids[x].1,
                            b: kids[y].1,
                            hole: h,
                            from: kids[x].0,
                            to: kids[y].0,
                        };
                        place_edge(&prefixes, e, &mut edge_bucket, &mut done_edges);
                    }
                }
            }
            prefixes[p as usize].children = kids;
        }
        if !opts.edges {
            continue;
        }
        let ebucket = std::mem::take(&mut edge_bucket[t as usize]);
        for e in ebucket {
            let side = |q: u32| -> Vec<(ImplId, u32)> {
                let pr = &prefixes[q as usize];
                if pr.pending.first() == Some(&t) {
                    pr.children.clone()
                } else {
                    vec![(ImplId::MAX, q)]
                }
            };
            let sa = side(e.a);
            let sb = side(e.b);
            let a_exp = sa[0].0 != ImplId::MAX;
            let b_exp = sb[0].0 != ImplId::MAX;
            let mut out = Vec::new();
            if a_exp && b_exp {
                for &(i, ca) in &sa {
                    if let Some(&(_, cb)) = sb.iter().find(|(j, _)| *j == i) {
                        out.push((ca, cb));
                    }
                }
            } else {
                for &(_, ca) in &sa {
                    for &(_, cb) in &sb {
                        out.push((ca, cb));
                    }
                }
            }
            for (a, b) in out {
                let ne = EdgePrefix {
                    a,
                    b,
                    hole: e.hole,
                    from: e.from,
                    to: e.to,
                };
                place_edge(&prefixes, ne, &mut edge_bucket, &mut done_edges);
            }
        }
    }

    let nodes: Vec<u32> = done_nodes.iter().map(|&p| prefixes[p as usize].chain).collect();
    for (k, &p) in done_nodes.iter().enumerate() {
        node_slot.insert(p, k);
    }
    let edges = done_edges
        .iter()
        .map(|e| (node_slot[&e.a], node_slot[&e.b], e.hole, e.from, e.to))
        .collect();
    Ok(Expanded { chains, nodes, edges })
}

fn place(prefixes: &[Prefix], idx: u32, bucket: &mut [Vec<u32>], done: &mut Vec<u32>) {
    match prefixes[idx as usize].pending.first() {
        Some(&t) => bucket[t as usize].push(idx),
        None => done.push(idx),
    }
}

fn place_edge(prefixes: &[Prefix], e: EdgePrefix, bucket: &mut [Vec<EdgePrefix>], done: &mut Vec<EdgePrefix>) {
    let na = prefixes[e.a as usize].pending.first().copied();
    let nb = prefixes[e.b as usize].pending.first().copied();
    match (na, nb) {
        (None, None) => done.push(e),
        (Some(x), None) | (None, Some(x)) => bucket[x as usize].push(e),
        (Some(x), Some(y)) => bucket[x.min(y) as usize].push(e),
    }
}
