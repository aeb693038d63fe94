//! Louvain community detection on the undirected projection of the expanded graph.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;

use crate::rdf::{KnowledgeGraph, VertexId};
use crate::seed;
use crate::{Error, Result};

const GAIN_EPS: f64 = 1e-12;

/// Undirected weighted graph; self-loops are kept apart from the adjacency lists.
#[derive(Debug, Clone, Default)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph {
            adj: vec![Vec::new(); n],
            self_loops: vec![0.0; n],
        }
    }

    /// Builds a graph from an edge list, merging parallel edges by summing weights.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        let mut order = Vec::new();
        let mut g = WeightedGraph::new(n);
        for (u, v, w) in edges {
            if u == v {
                g.self_loops[u] += w;
                continue;
            }
            let key = (u.min(v), u.max(v));
            let slot = merged.entry(key).or_insert_with(|| {
                order.push(key);
                0.0
            });
            *slot += w;
        }
        for key in order {
            let w = merged[&key];
            g.adj[key.0].push((key.1, w));
            g.adj[key.1].push((key.0, w));
        }
        g
    }

    /// Unit-weight undirected projection of the expanded graph.
    pub fn from_knowledge_graph(g: &KnowledgeGraph) -> Self {
        WeightedGraph::from_edges(
            g.vertex_count(),
            g.edges().map(|(u, v)| (u.index(), v.index(), 1.0)),
        )
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[i]
    }

    pub fn total_weight(&self) -> f64 {
        (0..self.node_count()).map(|i| self.degree(i)).sum::<f64>() / 2.0
    }

    /// Newman modularity of `assignment` (node -> community id).
    pub fn modularity(&self, assignment: &[usize], resolution: f64) -> f64 {
        let m = self.total_weight();
        if m == 0.0 {
            return 0.0;
        }
        let k = assignment.iter().copied().max().map_or(0, |c| c + 1);
        let mut internal = vec![0.0; k];
        let mut total = vec![0.0; k];
        for i in 0..self.node_count() {
            let c = assignment[i];
            total[c] += self.degree(i);
            internal[c] += self.self_loops[i];
            for &(j, w) in &self.adj[i] {
                // each undirected edge is seen from both endpoints
                if assignment[j] == c && i < j {
                    internal[c] += w;
                }
            }
        }
        (0..k)
            .map(|c| internal[c] / m - resolution * (total[c] / (2.0 * m)).powi(2))
            .sum()
    }

    /// One round of local moving. Returns the node assignment and whether anything moved.
    fn local_moving(&self, resolution: f64, rng: &mut impl rand::Rng) -> (Vec<usize>, bool) {
        let n = self.node_count();
        let degrees: Vec<f64> = (0..n).map(|i| self.degree(i)).collect();
        let two_m: f64 = degrees.iter().sum();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = degrees.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut weight_to = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut is_touched = vec![false; n];
        let mut any_move = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let ci = comm[i];
                let ki = degrees[i];
                for &(j, w) in &self.adj[i] {
                    let cj = comm[j];
                    if !is_touched[cj] {
                        is_touched[cj] = true;
                        touched.push(cj);
                    }
                    weight_to[cj] += w;
                }
                tot[ci] -= ki;
                let gain = |c: usize, wt: f64| wt - resolution * tot[c] * ki / two_m;
                let mut best = ci;
                let mut best_gain = gain(ci, weight_to[ci]);
                for &c in &touched {
                    let g = gain(c, weight_to[c]);
                    if g > best_gain + GAIN_EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                comm[i] = best;
                if best != ci {
                    moved = true;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                    is_touched[c] = false;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
            any_move = true;
        }
        (comm, any_move)
    }

    fn aggregate(&self, comm: &[usize], k: usize) -> WeightedGraph {
        let mut edges = Vec::new();
        for i in 0..self.node_count() {
            let ci = comm[i];
            if self.self_loops[i] != 0.0 {
                edges.push((ci, ci, self.self_loops[i]));
            }
            for &(j, w) in &self.adj[i] {
                if i < j {
                    edges.push((ci, comm[j], w));
                }
            }
        }
        WeightedGraph::from_edges(k, edges)
    }

    /// Two-phase Louvain. Returns node -> community with dense ids in order of
    /// first appearance.
    pub fn louvain(&self, resolution: f64, seed: u64) -> Vec<usize> {
        let n = self.node_count();
        let mut membership: Vec<usize> = (0..n).collect();
        if self.total_weight() == 0.0 {
            return membership;
        }
        let mut rng = seed::rng(seed);
        let mut level = self.clone();
        loop {
            let (comm, moved) = level.local_moving(resolution, &mut rng);
            if !moved {
                break;
            }
            let (dense, k) = densify(&comm);
            for m in membership.iter_mut() {
                *m = dense[*m];
            }
            if k == level.node_count() {
                break;
            }
            level = level.aggregate(&dense, k);
        }
        densify(&membership).0
    }
}

fn densify(comm: &[usize]) -> (Vec<usize>, usize) {
    let mut remap = HashMap::new();
    let dense = comm
        .iter()
        .map(|&c| {
            let next = remap.len();
            *remap.entry(c).or_insert(next)
        })
        .collect();
    (dense, remap.len())
}

/// Vertex-to-community assignment plus the member list of every community.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityPartition {
    assignment: Vec<usize>,
    communities: Vec<Vec<VertexId>>,
    pub resolution: f64,
}

impl CommunityPartition {
    /// Builds a partition from per-vertex community ids (renumbered densely).
    pub fn from_assignment(assignment: &[usize], resolution: f64) -> Self {
        let (assignment, k) = densify(assignment);
        let mut communities = vec![Vec::new(); k];
        for (v, &c) in assignment.iter().enumerate() {
            communities[c].push(VertexId(v as u32));
        }
        CommunityPartition {
            assignment,
            communities,
            resolution,
        }
    }

    pub fn singletons(n: usize) -> Self {
        CommunityPartition::from_assignment(&(0..n).collect::<Vec<_>>(), 1.0)
    }

    pub fn community_of(&self, v: VertexId) -> Option<usize> {
        self.assignment.get(v.index()).copied()
    }

    pub fn members(&self, community: usize) -> &[VertexId] {
        &self.communities[community]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn communities(&self) -> &[Vec<VertexId>] {
        &self.communities
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    /// Writes `vertex_label TAB community_id`, one line per vertex in id order.
    pub fn write_tsv<W: Write>(&self, g: &KnowledgeGraph, mut sink: W) -> Result<()> {
        for (v, &c) in self.assignment.iter().enumerate() {
            let label = crate::corpus::escape_token(g.label(VertexId(v as u32)));
            writeln!(sink, "{label}\t{c}")?;
        }
        Ok(())
    }

    /// Reads a TSV written by [`CommunityPartition::write_tsv`] for the same graph.
    pub fn read_tsv<R: Read>(g: &KnowledgeGraph, source: R, resolution: f64) -> Result<Self> {
        let mut assignment = Vec::with_capacity(g.vertex_count());
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let (label, c) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected label TAB community", &line))?;
            let c: usize = c
                .parse()
                .map_err(|_| Error::parse(i + 1, "invalid community id", &line))?;
            let expected = g.vertex(VertexId(i as u32)).map_err(|_| {
                Error::parse(i + 1, "more rows than graph vertices", &line)
            })?;
            if crate::corpus::unescape_token(label).as_deref() != Some(expected.label.as_str()) {
                return Err(Error::parse(i + 1, "label does not match graph vertex", &line));
            }
            assignment.push(c);
        }
        if assignment.len() != g.vertex_count() {
            return Err(Error::Integrity(format!(
                "partition has {} rows, graph has {} vertices",
                assignment.len(),
                g.vertex_count()
            )));
        }
        Ok(CommunityPartition::from_assignment(&assignment, resolution))
    }
}

/// Louvain over the undirected unit-weight projection of `g`.
pub fn louvain(g: &KnowledgeGraph, resolution: f64, seed: u64) -> CommunityPartition {
    let wg = WeightedGraph::from_knowledge_graph(g);
    CommunityPartition::from_assignment(&wg.louvain(resolution, seed), resolution)
}

pub fn modularity(g: &KnowledgeGraph, partition: &CommunityPartition, resolution: f64) -> f64 {
    WeightedGraph::from_knowledge_graph(g).modularity(partition.assignment(), resolution)
}
