//! Weisfeiler-Lehman relabelling over in-neighbourhoods.
//!
//! `wl_0(v)` is the integerized vertex label. For `k >= 1` the label of `v` is
//! the interned id of `(wl_{k-1}(v), sorted distinct wl_{k-1} labels of the
//! in-neighbours of v)`. Interning makes the "hash" collision-free by
//! construction, and ids are handed out in vertex-id order so the result is
//! deterministic.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::corpus::WalkCorpus;
use crate::rdf::{KnowledgeGraph, VertexId, VertexKind};
use crate::walks::Walk;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WlLabelStore {
    labels: Vec<Vec<u32>>,
}

impl WlLabelStore {
    /// Number of completed relabelling rounds (iteration 0 excluded).
    pub fn iterations(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn label(&self, k: usize, v: VertexId) -> u32 {
        self.labels[k][v.index()]
    }

    pub fn iteration(&self, k: usize) -> &[u32] {
        &self.labels[k]
    }

    /// Token used for `v` in iteration `k` walks.
    pub fn token(&self, k: usize, v: VertexId) -> String {
        format!("wl{k}_{}", self.labels[k][v.index()])
    }

    /// Writes `vertex_label TAB k TAB wl_label` rows.
    pub fn write_tsv<W: Write>(&self, g: &KnowledgeGraph, mut sink: W) -> Result<()> {
        for (k, labels) in self.labels.iter().enumerate() {
            for (v, l) in labels.iter().enumerate() {
                let label = crate::corpus::escape_token(g.label(VertexId(v as u32)));
                writeln!(sink, "{label}\t{k}\t{l}")?;
            }
        }
        Ok(())
    }
}

/// Computes `wl_0 ..= wl_iterations` for every vertex.
pub fn wl_relabel(g: &KnowledgeGraph, iterations: usize) -> WlLabelStore {
    let mut initial: HashMap<&str, u32> = HashMap::new();
    let base: Vec<u32> = g
        .vertices()
        .map(|(_, v)| {
            let next = initial.len() as u32;
            *initial.entry(v.label.as_str()).or_insert(next)
        })
        .collect();
    let mut labels = vec![base];
    for _ in 0..iterations {
        let prev = labels.last().expect("iteration 0 exists");
        let keys: Vec<(u32, Vec<u32>)> = (0..g.vertex_count())
            .into_par_iter()
            .map(|v| {
                let mut nbrs: Vec<u32> = g
                    .in_slice(VertexId(v as u32))
                    .iter()
                    .map(|u| prev[u.index()])
                    .collect();
                nbrs.sort_unstable();
                nbrs.dedup();
                (prev[v], nbrs)
            })
            .collect();
        let mut table: HashMap<&(u32, Vec<u32>), u32> = HashMap::new();
        let next: Vec<u32> = keys
            .iter()
            .map(|key| {
                let id = table.len() as u32;
                *table.entry(key).or_insert(id)
            })
            .collect();
        labels.push(next);
    }
    WlLabelStore { labels }
}

/// Pairs of distinct vertices that share a WL label at some iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BijectionReport {
    /// `(iteration, first vertex, second vertex)`.
    pub violations: Vec<(usize, VertexId, VertexId)>,
    pub checked_vertices: usize,
    pub iterations: usize,
}

impl BijectionReport {
    pub fn is_bijective(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `wl_k` is injective over the vertices of the given kinds, for every `k`.
pub fn check_wl_bijection_for(
    g: &KnowledgeGraph,
    store: &WlLabelStore,
    kinds: &[VertexKind],
) -> BijectionReport {
    let members: Vec<VertexId> = g
        .vertices()
        .filter(|(_, v)| kinds.contains(&v.kind))
        .map(|(id, _)| id)
        .collect();
    let mut report = BijectionReport {
        checked_vertices: members.len(),
        iterations: store.iterations(),
        ..Default::default()
    };
    for k in 0..=store.iterations() {
        let mut groups: HashMap<u32, Vec<VertexId>> = HashMap::new();
        for &v in &members {
            groups.entry(store.label(k, v)).or_default().push(v);
        }
        let mut clashes: Vec<&Vec<VertexId>> = groups.values().filter(|g| g.len() > 1).collect();
        clashes.sort();
        for group in clashes {
            for i in 0..group.len() {
                for j in i + 1..group.len() {
                    report.violations.push((k, group[i], group[j]));
                }
            }
        }
    }
    report
}

/// Entity-only bijection check.
pub fn check_wl_bijection(g: &KnowledgeGraph, store: &WlLabelStore) -> BijectionReport {
    check_wl_bijection_for(g, store, &[VertexKind::Entity])
}

/// For each `k` in `0..=iterations`, every base walk with its non-root hops
/// replaced by their `wl_k` tokens. Roots keep the original label unless
/// `relabel_roots` is set.
pub fn wl_walk_corpus(
    g: &KnowledgeGraph,
    base_walks: &[Vec<Walk>],
    store: &WlLabelStore,
    relabel_roots: bool,
    mut corpus: WalkCorpus,
) -> WalkCorpus {
    let iterations = store.iterations();
    let total: usize = base_walks.iter().map(Vec::len).sum();
    corpus.walks = Vec::with_capacity(total * (iterations + 1));
    for k in 0..=iterations {
        for walk in base_walks.iter().flatten() {
            let tokens = walk
                .vertices()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if i == 0 && !relabel_roots {
                        g.label(v).to_string()
                    } else {
                        store.token(k, v)
                    }
                })
                .collect();
            corpus.walks.push(tokens);
        }
    }
    corpus.set_param("wl_iterations", iterations);
    corpus
}
