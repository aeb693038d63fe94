//! Walk extraction over the expanded graph.
//!
//! Depth counts edge traversals in the expanded graph: a depth-4 walk has
//! five vertices `entity, predicate, entity, predicate, entity`.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;

use crate::community::CommunityPartition;
use crate::corpus::WalkCorpus;
use crate::rdf::{KnowledgeGraph, VertexId, VertexKind};
use crate::seed;
use crate::{Error, Result};

/// Root-anchored vertex sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Walk(pub Vec<VertexId>);

impl Walk {
    pub fn root(&self) -> VertexId {
        self.0[0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.0
    }

    pub fn tokens(&self, g: &KnowledgeGraph) -> Vec<String> {
        self.0.iter().map(|&v| g.label(v).to_string()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkConfig {
    pub depth: usize,
    pub max_walks_per_entity: Option<usize>,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            depth: 4,
            max_walks_per_entity: None,
            seed: 0,
        }
    }
}

fn check_root(g: &KnowledgeGraph, root: VertexId) -> Result<()> {
    let v = g.vertex(root)?;
    if v.kind != VertexKind::Entity {
        return Err(Error::NotAnEntity {
            id: root.index(),
            label: v.label.clone(),
        });
    }
    Ok(())
}

/// Every walk of `cfg.depth` hops from `root`, plus the maximal walks that hit
/// a vertex without out-edges earlier. Depth-first order over the adjacency.
pub fn extract_exhaustive(g: &KnowledgeGraph, root: VertexId, cfg: &WalkConfig) -> Result<Vec<Walk>> {
    check_root(g, root)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut path = vec![root];
    // stack of (depth, next neighbour index)
    let mut stack: Vec<usize> = vec![0];
    while let Some(&next) = stack.last() {
        let last = *path.last().expect("path tracks stack");
        let nbrs = g.out_slice(last);
        let depth = path.len() - 1;
        if depth == cfg.depth || nbrs.is_empty() {
            if seen.insert(path.clone()) {
                out.push(Walk(path.clone()));
            }
            stack.pop();
            path.pop();
            continue;
        }
        if next < nbrs.len() {
            *stack.last_mut().expect("non-empty") += 1;
            path.push(nbrs[next]);
            stack.push(0);
        } else {
            stack.pop();
            path.pop();
        }
    }
    Ok(out)
}

/// Number of directed paths with exactly `depth` edges from `root`,
/// by level-wise multiplicity propagation.
pub fn count_walks_oracle(g: &KnowledgeGraph, root: VertexId, depth: usize) -> u128 {
    let mut frontier: HashMap<VertexId, u128> = HashMap::from([(root, 1)]);
    for _ in 0..depth {
        let mut next: HashMap<VertexId, u128> = HashMap::new();
        for (&v, &mult) in &frontier {
            for &n in g.out_slice(v) {
                *next.entry(n).or_default() += mult;
            }
        }
        frontier = next;
    }
    frontier.values().sum()
}

/// Number of maximal walks (full-length or dead-ended) from `root`.
fn count_maximal_walks(g: &KnowledgeGraph, root: VertexId, depth: usize) -> u128 {
    let mut frontier: HashMap<VertexId, u128> = HashMap::from([(root, 1)]);
    let mut total: u128 = 0;
    for _ in 0..depth {
        let mut next: HashMap<VertexId, u128> = HashMap::new();
        for (&v, &mult) in &frontier {
            let nbrs = g.out_slice(v);
            if nbrs.is_empty() {
                total = total.saturating_add(mult);
            }
            for &n in nbrs {
                let slot = next.entry(n).or_default();
                *slot = slot.saturating_add(mult);
            }
        }
        frontier = next;
    }
    frontier.values().fold(total, |acc, &m| acc.saturating_add(m))
}

/// At most `cfg.max_walks_per_entity` distinct walks drawn by uniform random
/// descents. When the root has no more walks than the cap, the exhaustive set
/// is returned.
pub fn sample_walks(g: &KnowledgeGraph, root: VertexId, cfg: &WalkConfig) -> Result<Vec<Walk>> {
    check_root(g, root)?;
    let cap = cfg
        .max_walks_per_entity
        .ok_or_else(|| Error::Config("sampling requires max_walks_per_entity".into()))?;
    if cap == 0 {
        return Err(Error::Config("max_walks_per_entity must be positive".into()));
    }
    if count_maximal_walks(g, root, cfg.depth) <= cap as u128 {
        return extract_exhaustive(g, root, cfg);
    }
    let mut rng = seed::rng(seed::derive(cfg.seed, root.0 as u64));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(cap);
    // uniform descents are not uniform over walks; bound the number of misses
    let max_attempts = cap.saturating_mul(50).max(1000);
    let mut attempts = 0;
    while out.len() < cap && attempts < max_attempts {
        attempts += 1;
        let mut path = vec![root];
        for _ in 0..cfg.depth {
            let nbrs = g.out_slice(*path.last().expect("non-empty"));
            if nbrs.is_empty() {
                break;
            }
            path.push(nbrs[rng.gen_range(0..nbrs.len())]);
        }
        if seen.insert(path.clone()) {
            out.push(Walk(path));
        }
    }
    Ok(out)
}

/// Breadth-first extraction with community teleports.
///
/// At each level every walk is extended by each out-neighbour `n` of its last
/// vertex with probability `p`, and independently by a uniformly chosen
/// member of `n`'s community with probability `hop_prob`. Walks whose last
/// vertex has no out-edges are carried over unchanged.
pub fn community_walks(
    g: &KnowledgeGraph,
    root: VertexId,
    cfg: &WalkConfig,
    partition: &CommunityPartition,
    p: f64,
    hop_prob: f64,
) -> Result<Vec<Walk>> {
    check_root(g, root)?;
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&hop_prob) {
        return Err(Error::Config(format!(
            "probabilities must lie in [0, 1], got p={p} hop_prob={hop_prob}"
        )));
    }
    let mut rng = seed::rng(seed::derive(cfg.seed, root.0 as u64));
    let mut walks: Vec<Vec<VertexId>> = vec![vec![root]];
    for _ in 0..cfg.depth {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        let mut add = |w: Vec<VertexId>, next: &mut Vec<Vec<VertexId>>| {
            if seen.insert(w.clone()) {
                next.push(w);
            }
        };
        for walk in &walks {
            let last = *walk.last().expect("walks are non-empty");
            let nbrs = g.out_slice(last);
            if nbrs.is_empty() {
                add(walk.clone(), &mut next);
                continue;
            }
            for &n in nbrs {
                if rng.gen::<f64>() < p {
                    let mut w = walk.clone();
                    w.push(n);
                    add(w, &mut next);
                }
                if rng.gen::<f64>() < hop_prob {
                    let c = partition
                        .community_of(n)
                        .ok_or(Error::MissingCommunity(n.index()))?;
                    let members = partition.members(c);
                    let hop = members[rng.gen_range(0..members.len())];
                    let mut w = walk.clone();
                    w.push(hop);
                    add(w, &mut next);
                }
            }
        }
        walks = next;
    }
    Ok(walks.into_iter().map(Walk).collect())
}

/// How walks are drawn for each root.
#[derive(Debug, Clone, Copy)]
pub enum Extraction<'a> {
    /// Exhaustive, or sampled when `max_walks_per_entity` is set.
    Random,
    Community {
        partition: &'a CommunityPartition,
        p: f64,
        hop_prob: f64,
    },
}

/// Extracts walks for every root in parallel; results stay in root order.
pub fn extract_per_root(
    g: &KnowledgeGraph,
    roots: &[VertexId],
    cfg: &WalkConfig,
    how: Extraction<'_>,
) -> Result<Vec<Vec<Walk>>> {
    roots
        .par_iter()
        .map(|&root| match how {
            Extraction::Random => match cfg.max_walks_per_entity {
                Some(_) => sample_walks(g, root, cfg),
                None => extract_exhaustive(g, root, cfg),
            },
            Extraction::Community {
                partition,
                p,
                hop_prob,
            } => community_walks(g, root, cfg, partition, p, hop_prob),
        })
        .collect()
}

/// Renders per-root walks as a token corpus.
pub fn to_corpus(
    g: &KnowledgeGraph,
    per_root: &[Vec<Walk>],
    strategy: &str,
    cfg: &WalkConfig,
) -> WalkCorpus {
    let mut corpus = WalkCorpus::new(strategy, cfg.seed);
    corpus.set_param("depth", cfg.depth);
    if let Some(max) = cfg.max_walks_per_entity {
        corpus.set_param("max_walks", max);
    }
    corpus.walks = per_root
        .iter()
        .flat_map(|walks| walks.iter().map(|w| w.tokens(g)))
        .collect();
    corpus
}
