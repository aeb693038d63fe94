use std::collections::HashSet;

use kgwalk::rdf::build_graph;
use kgwalk::synth::{random_triples, SynthConfig};
use kgwalk::walks::{
    count_walks_oracle, extract_exhaustive, extract_per_root, sample_walks, to_corpus, Extraction,
};
use kgwalk::{KnowledgeGraph, VertexKind, WalkConfig};
use proptest::prelude::*;

fn graph(seed: u64, entities: usize, triples: usize) -> KnowledgeGraph {
    let mut rng = kgwalk::seed::rng(seed);
    let cfg = SynthConfig {
        entities,
        triples,
        ..Default::default()
    };
    build_graph(&random_triples(&mut rng, &cfg))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_matches_path_count(seed in any::<u64>(), entities in 2usize..15, triples in 1usize..30, depth in 0usize..7) {
        let g = graph(seed, entities, triples);
        let cfg = WalkConfig { depth, ..Default::default() };
        for root in g.entities() {
            let walks = extract_exhaustive(&g, root, &cfg).unwrap();
            let full = walks.iter().filter(|w| w.len() == depth + 1).count() as u128;
            prop_assert_eq!(full, count_walks_oracle(&g, root, depth));
            // every shorter walk must end in a vertex without out-edges
            for w in walks.iter().filter(|w| w.len() < depth + 1) {
                let last = *w.vertices().last().unwrap();
                prop_assert!(g.out_neighbours(last).unwrap().is_empty());
            }
            let distinct: HashSet<_> = walks.iter().collect();
            prop_assert_eq!(distinct.len(), walks.len());
        }
    }

    #[test]
    fn walks_alternate_between_nodes_and_predicates(seed in any::<u64>(), depth in 0usize..6) {
        let g = graph(seed, 10, 25);
        let cfg = WalkConfig { depth, ..Default::default() };
        for root in g.entities() {
            for w in extract_exhaustive(&g, root, &cfg).unwrap() {
                for (i, &v) in w.vertices().iter().enumerate() {
                    prop_assert_eq!(i % 2 == 1, g.kind(v) == VertexKind::PredicateInstance);
                }
                for pair in w.vertices().windows(2) {
                    prop_assert!(g.out_neighbours(pair[0]).unwrap().contains(&pair[1]));
                }
            }
        }
    }

    #[test]
    fn sampled_walks_are_a_subset(seed in any::<u64>(), cap in 1usize..20) {
        let g = graph(seed, 8, 30);
        let cfg = WalkConfig { depth: 4, max_walks_per_entity: Some(cap), seed };
        for root in g.entities() {
            let full: HashSet<_> = extract_exhaustive(&g, root, &cfg).unwrap().into_iter().collect();
            let sampled = sample_walks(&g, root, &cfg).unwrap();
            prop_assert!(sampled.len() <= cap);
            prop_assert!(sampled.iter().all(|w| full.contains(w)));
        }
    }
}

#[test]
fn extraction_is_reproducible_across_thread_counts() {
    let g = graph(5, 30, 120);
    let roots: Vec<_> = g.entities().collect();
    let cfg = WalkConfig {
        depth: 4,
        max_walks_per_entity: Some(10),
        seed: 99,
    };
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let per_root = extract_per_root(&g, &roots, &cfg, Extraction::Random).unwrap();
            let mut buf = Vec::new();
            to_corpus(&g, &per_root, "random", &cfg).write(&mut buf).unwrap();
            buf
        })
    };
    let one = render(1);
    assert_eq!(one, render(1));
    assert_eq!(one, render(4));
}
