mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{tall_chain, ImplShape, Shape};
use modstan::checks;
use modstan::compile::compile;
use modstan::graph::{count_nodes, model_graph, model_neighbors, naive_model_graph, neighbors_by_delta, NAIVE_CAP};
use modstan::program::{canonical, ModularProgram};
use modstan::syntax::parse;

fn program(src: &str) -> ModularProgram {
    ModularProgram::from_ast(&parse(src).unwrap()).unwrap()
}

fn shapes() -> impl Strategy<Value = Shape> {
    (1usize..=5).prop_flat_map(|n| {
        let imp = (0u32..32, any::<bool>()).prop_map(|(calls, parameter)| ImplShape { calls, parameter });
        (1u32..(1 << n), proptest::collection::vec(proptest::collection::vec(imp, 1..=3), n))
            .prop_map(|(base_calls, holes)| Shape { base_calls, holes })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn graph_matches_naive_oracle(shape in shapes()) {
        let p = program(&shape.render());
        prop_assert!(checks::check(&p).is_ok());
        let g = model_graph(&p).unwrap();
        prop_assert_eq!(&g, &naive_model_graph(&p, NAIVE_CAP).unwrap());
        prop_assert_eq!(count_nodes(&p, usize::MAX).unwrap(), g.nodes.len());
    }

    #[test]
    fn neighbours_match_adjacency(shape in shapes()) {
        let p = program(&shape.render());
        let g = model_graph(&p).unwrap();
        for (k, sel) in g.nodes.iter().enumerate() {
            let want: Vec<String> = g.adjacent(k).into_iter().map(|m| canonical(&g.nodes[m])).collect();
            let got: Vec<String> = model_neighbors(&p, sel).unwrap().iter().map(canonical).collect();
            prop_assert_eq!(&got, &want);
            let by_delta: BTreeSet<String> = neighbors_by_delta(&p, sel).unwrap().iter().map(canonical).collect();
            prop_assert_eq!(by_delta.into_iter().collect::<Vec<_>>(), want);
        }
    }

    #[test]
    fn every_node_concretizes_to_a_checked_program(shape in shapes()) {
        let src = shape.render();
        let c = compile(&src).unwrap();
        for n in model_graph(&c.program()).unwrap().nodes {
            let text = c.concretize(&canonical(&n)).unwrap();
            let again = compile(&text).unwrap();
            prop_assert!(again.program().sites().is_empty(), "{}", text);
        }
    }

    #[test]
    fn edges_change_one_binding(shape in shapes()) {
        let g = model_graph(&program(&shape.render())).unwrap();
        for e in &g.edges {
            let (a, b) = (&g.nodes[e.a], &g.nodes[e.b]);
            prop_assert_eq!(a.get(&e.hole), Some(&e.impls[0]));
            prop_assert_eq!(b.get(&e.hole), Some(&e.impls[1]));
        }
    }
}

#[test]
fn tall_chains_agree_with_the_oracle_while_small() {
    for depth in 1..=12 {
        let p = program(&tall_chain(depth));
        let g = model_graph(&p).unwrap();
        assert_eq!(g.nodes.len(), depth + 1);
        assert_eq!(g, naive_model_graph(&p, NAIVE_CAP).unwrap());
    }
}
