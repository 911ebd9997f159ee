//! Model graphs: nodes are valid selections, edges join selections that
//! differ in exactly one implementation choice.

pub mod expand;
pub mod naive;
pub mod skeleton;
pub mod space;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::program::{canonical, dot_quote, ModularProgram, Selection, Validity};
use expand::{expand, ExpandOptions};
use skeleton::Skeleton;
use space::{Space, SpaceSelection};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("module dependency cycle through hole `{hole}`")]
    Cycle { hole: String },
    #[error("too many {what} to enumerate ({count})")]
    CapExceeded { what: String, count: String },
    #[error("selection is not valid")]
    InvalidSelection(Validity),
}

/// Default bound on the naive oracle's combination count.
pub const NAIVE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphEdge {
    /// Endpoint positions in `ModelGraph::nodes`, with `a < b`.
    pub a: usize,
    pub b: usize,
    pub hole: String,
    /// Implementations at `a` and at `b`.
    pub impls: [String; 2],
}

/// Nodes sorted by canonical selection string; edges sorted by endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelGraph {
    pub nodes: Vec<Selection>,
    pub edges: Vec<GraphEdge>,
}

impl ModelGraph {
    /// Build from unordered parts, normalizing node and edge order.
    pub fn from_parts(nodes: Vec<Selection>, edges: Vec<(usize, usize, String, String, String)>) -> ModelGraph {
        let ids: Vec<String> = nodes.iter().map(canonical).collect();
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&x, &y| ids[x].cmp(&ids[y]));
        let mut slot = vec![0usize; nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            slot[old] = new;
        }
        let mut sorted_nodes = vec![Selection::new(); nodes.len()];
        for (old, n) in nodes.into_iter().enumerate() {
            sorted_nodes[slot[old]] = n;
        }
        let mut out_edges: Vec<GraphEdge> = edges
            .into_iter()
            .map(|(a, b, hole, ia, ib)| {
                let (a, b) = (slot[a], slot[b]);
                if a < b {
                    GraphEdge { a, b, hole, impls: [ia, ib] }
                } else {
                    GraphEdge { a: b, b: a, hole, impls: [ib, ia] }
                }
            })
            .collect();
        out_edges.sort_by_key(|e| (e.a, e.b));
        out_edges.dedup();
        ModelGraph {
            nodes: sorted_nodes,
            edges: out_edges,
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.nodes.iter().map(canonical).collect()
    }

    pub fn to_json(&self) -> GraphJson {
        let ids = self.ids();
        GraphJson {
            nodes: self
                .nodes
                .iter()
                .zip(&ids)
                .map(|(n, id)| NodeJson {
                    id: id.clone(),
                    selection: n
                        .iter()
                        .map(|(h, i)| BindingJson {
                            hole: h.clone(),
                            implementation: i.clone(),
                        })
                        .collect(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    a: ids[e.a].clone(),
                    b: ids[e.b].clone(),
                    hole: e.hole.clone(),
                    impls: e.impls.clone(),
                })
                .collect(),
        }
    }

    pub fn to_dot(&self) -> String {
        let ids = self.ids();
        let mut out = String::from("graph models {\n");
        for id in &ids {
            out.push_str(&format!("  {} [label={}];\n", dot_quote(id), dot_quote(id)));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  {} -- {} [label={}];\n",
                dot_quote(&ids[e.a]),
                dot_quote(&ids[e.b]),
                dot_quote(&e.hole)
            ));
        }
        out.push_str("}\n");
        out
    }

    /// Node positions adjacent to node `k`.
    pub fn adjacent(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.a == k {
                    Some(e.b)
                } else if e.b == k {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingJson {
    pub hole: String,
    #[serde(rename = "impl")]
    pub implementation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: String,
    pub selection: Vec<BindingJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub a: String,
    pub b: String,
    pub hole: String,
    pub impls: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
}

/// Turns a selection over a space into the user-facing selection.
pub type Labeler<'a, S> = &'a dyn Fn(&SpaceSelection<S>) -> Selection;

/// Name-keyed selection for spaces whose hole and implementation names are
/// already what users type.
pub fn plain_label<S: Space>(space: &S, sel: &SpaceSelection<S>) -> Selection {
    sel.iter().map(|(h, i)| (space.hole_name(h), space.impl_name(i))).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct GraphOptions {
    pub edges: bool,
    /// Bound on implementations gathered and on live prefixes.
    pub cap: usize,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            edges: true,
            cap: usize::MAX,
        }
    }
}

/// The model graph of any space by prefix expansion.
pub fn graph_of<S: Space>(space: &S, opts: GraphOptions, label: Labeler<S>) -> Result<ModelGraph, GraphError> {
    let sk = Skeleton::from_space(space, opts.cap)?;
    let ex = expand(
        &sk,
        &ExpandOptions {
            edges: opts.edges,
            cap: opts.cap,
            pins: None,
        },
    )?;
    let to_sel = |k: usize| -> SpaceSelection<S> {
        ex.node(k)
            .into_iter()
            .map(|(h, i)| (sk.holes[h as usize].clone(), sk.impls[i as usize].clone()))
            .collect()
    };
    let nodes: Vec<Selection> = (0..ex.node_count()).map(|k| label(&to_sel(k))).collect();
    let edges = ex
        .edges
        .iter()
        .map(|&(a, b, h, ia, ib)| {
            (
                a,
                b,
                sk.hole_names[h as usize].clone(),
                sk.impl_names[ia as usize].clone(),
                sk.impl_names[ib as usize].clone(),
            )
        })
        .collect();
    Ok(ModelGraph::from_parts(nodes, edges))
}

pub fn model_graph(p: &ModularProgram) -> Result<ModelGraph, GraphError> {
    graph_of(p, GraphOptions::default(), &|s| plain_label(p, s))
}

pub fn model_graph_nodes_only(p: &ModularProgram) -> Result<Vec<Selection>, GraphError> {
    let g = graph_of(
        p,
        GraphOptions {
            edges: false,
            cap: usize::MAX,
        },
        &|s| plain_label(p, s),
    )?;
    Ok(g.nodes)
}

/// The nodes of a model graph as interned selections, built on request.
/// Enumerating is linear in the number of bindings added; materializing
/// every selection costs their total size.
pub struct NodeSet<'a, S: Space> {
    space: &'a S,
    sk: Skeleton<S::Hole, S::Impl>,
    ex: expand::Expanded,
}

impl<S: Space> NodeSet<'_, S> {
    pub fn len(&self) -> usize {
        self.ex.node_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of bindings in node `k`.
    pub fn size_of(&self, k: usize) -> usize {
        self.ex.chains.len_of(self.ex.nodes[k])
    }

    pub fn selection(&self, k: usize) -> SpaceSelection<S> {
        self.ex
            .node(k)
            .into_iter()
            .map(|(h, i)| (self.sk.holes[h as usize].clone(), self.sk.impls[i as usize].clone()))
            .collect()
    }

    pub fn names(&self, k: usize) -> Selection {
        plain_label(self.space, &self.selection(k))
    }
}

/// Enumerate the nodes of the model graph without building their selections.
pub fn enumerate_nodes<S: Space>(space: &S, cap: usize) -> Result<NodeSet<'_, S>, GraphError> {
    let sk = Skeleton::from_space(space, cap)?;
    let ex = expand(
        &sk,
        &ExpandOptions {
            edges: false,
            cap,
            pins: None,
        },
    )?;
    Ok(NodeSet { space, sk, ex })
}

/// Node count only, without materializing selections.
pub fn count_nodes<S: Space>(space: &S, cap: usize) -> Result<usize, GraphError> {
    Ok(enumerate_nodes(space, cap)?.len())
}

pub fn naive_model_graph(p: &ModularProgram, cap: usize) -> Result<ModelGraph, GraphError> {
    naive::naive_graph(p, cap, &|s| plain_label(p, s))
}

/// The program with each hole bound in `sel` restricted to its selected
/// implementation.
pub fn limit(p: &ModularProgram, sel: &Selection) -> ModularProgram {
    p.restrict(|i| sel.get(&i.hole).is_none_or(|n| *n == i.name))
}

/// Neighbours of a valid selection as the union of the node sets of limited
/// programs, one per alternative implementation.
pub fn model_neighbors(p: &ModularProgram, sel: &Selection) -> Result<Vec<Selection>, GraphError> {
    let v = p.valid_selection(sel);
    if !v.is_valid() {
        return Err(GraphError::InvalidSelection(v));
    }
    let mut out = BTreeSet::new();
    for (h, i) in sel {
        for alt in p.impls_of(h) {
            if alt.name == *i {
                continue;
            }
            let mut pinned = sel.clone();
            pinned.insert(h.clone(), alt.name.clone());
            out.extend(model_graph_nodes_only(&limit(p, &pinned))?);
        }
    }
    let mut v: Vec<Selection> = out.into_iter().collect();
    v.sort_by_key(canonical);
    Ok(v)
}

/// Neighbours by local deltas; agrees with `model_neighbors`.
pub fn neighbors_by_delta(p: &ModularProgram, sel: &Selection) -> Result<Vec<Selection>, GraphError> {
    let v = p.valid_selection(sel);
    if !v.is_valid() {
        return Err(GraphError::InvalidSelection(v));
    }
    let sp: SpaceSelection<ModularProgram> = sel
        .iter()
        .map(|(h, i)| {
            let idx = p
                .impl_indices(h)
                .iter()
                .copied()
                .find(|&k| p.impls()[k].name == *i)
                .expect("validated");
            (h.clone(), idx)
        })
        .collect();
    let mut out: Vec<Selection> = space::neighbor_deltas(p, &sp)
        .into_iter()
        .map(|d| plain_label(p, &d.apply(&sp)))
        .collect();
    out.sort_by_key(canonical);
    out.dedup();
    Ok(out)
}

/// Node ids consistent with a partial selection: every binding in `partial`
/// appears in the node.
pub fn compatible(nodes: &[Selection], partial: &Selection) -> Vec<String> {
    nodes
        .iter()
        .filter(|n| partial.iter().all(|(h, i)| n.get(h) == Some(i)))
        .map(canonical)
        .collect()
}

/// Map from node id to node position.
pub fn index_by_id(g: &ModelGraph) -> HashMap<String, usize> {
    g.ids().into_iter().enumerate().map(|(k, id)| (id, k)).collect()
}

/// Bindings of a selection as a sorted list, for JSON output.
pub fn bindings_json(sel: &Selection) -> Vec<BindingJson> {
    sel.iter()
        .map(|(h, i)| BindingJson {
            hole: h.clone(),
            implementation: i.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn prog(src: &str) -> ModularProgram {
        ModularProgram::from_ast(&parse(src).unwrap()).unwrap()
    }

    fn sel(s: &str) -> Selection {
        s.split(',')
            .filter(|p| !p.is_empty())
            .map(|p| {
                let (h, i) = p.split_once(':').unwrap();
                (h.to_string(), i.to_string())
            })
            .collect()
    }

    #[test]
    fn example_graph() {
        let p = prog(crate::testutil::MEAN_STDDEV);
        let g = model_graph(&p).unwrap();
        assert_eq!(g.nodes.len(), 6);
        assert_eq!(g.edges.len(), 9);
        assert_eq!(g, naive_model_graph(&p, NAIVE_CAP).unwrap());
        assert_eq!(model_graph_nodes_only(&p).unwrap(), g.nodes);
    }

    #[test]
    fn mean_stddev_neighbors() {
        let p = prog(crate::testutil::MEAN_STDDEV);
        let n = model_neighbors(&p, &sel("Mean:standard,Stddev:standard")).unwrap();
        let ids: Vec<String> = n.iter().map(canonical).collect();
        assert_eq!(
            ids,
            [
                "Mean:normal,Stddev:standard",
                "Mean:standard,Stddev:lognormal,StddevInformative:no",
                "Mean:standard,Stddev:lognormal,StddevInformative:yes",
            ]
        );
        assert_eq!(neighbors_by_delta(&p, &sel("Mean:standard,Stddev:standard")).unwrap(), n);
        assert!(matches!(
            model_neighbors(&p, &sel("Mean:normal")),
            Err(GraphError::InvalidSelection(_))
        ));
    }

    #[test]
    fn degenerate_programs() {
        let p = prog("data { int N; } model { }");
        let g = model_graph(&p).unwrap();
        assert_eq!(g.nodes, vec![Selection::new()]);
        assert!(g.edges.is_empty());
        let k = prog(
            r#"model { target += H(); }
module "a" H() { return 1; }
module "b" H() { return 2; }
module "c" H() { return 3; }
module "d" H() { return 4; }"#,
        );
        let g = model_graph(&k).unwrap();
        assert_eq!((g.nodes.len(), g.edges.len()), (4, 6));
        assert_eq!(model_neighbors(&k, &sel("H:b")).unwrap().len(), 3);
    }

    #[test]
    fn limit_restricts_bound_holes() {
        let p = prog(crate::testutil::MEAN_STDDEV);
        let l = limit(&p, &sel("Mean:normal"));
        assert_eq!(l.impls_of("Mean").count(), 1);
        assert_eq!(l.impls_of("Stddev").count(), 2);
        assert_eq!(limit(&p, &Selection::new()), p);
        let full = sel("Mean:normal,Stddev:lognormal,StddevInformative:no");
        assert_eq!(model_graph(&limit(&p, &full)).unwrap().nodes, vec![full]);
    }

    #[test]
    fn exports() {
        let p = prog(crate::testutil::MEAN_STDDEV);
        let g = model_graph(&p).unwrap();
        let dot = g.to_dot();
        assert_eq!(dot.lines().filter(|l| l.contains("[label=") && !l.contains("--")).count(), 6);
        assert_eq!(dot.lines().filter(|l| l.contains(" -- ")).count(), 9);
        let json = serde_json::to_string(&g.to_json()).unwrap();
        let back: GraphJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g.to_json());
        let one = model_graph(&prog("model { }")).unwrap();
        assert_eq!(one.to_dot(), "graph models {\n  \"\" [label=\"\"];\n}\n");
    }

    #[test]
    fn compatible_models() {
        let p = prog(crate::testutil::MEAN_STDDEV);
        let g = model_graph(&p).unwrap();
        assert_eq!(compatible(&g.nodes, &sel("Mean:normal")).len(), 3);
        assert_eq!(compatible(&g.nodes, &Selection::new()).len(), 6);
    }
}
