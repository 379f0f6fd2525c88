//! Directed, optionally edge-weighted graphs with dense node ids.
//!
//! A [`DirectedGraph`] is immutable once built. Edges are kept in a single
//! flat list whose order is whatever the producer chose (file order, Hilbert
//! order, source order); every consumer in this crate must produce results
//! that do not depend on that order beyond floating-point reassociation.

mod hilbert;
pub mod io;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hilbert::{grid_order, hilbert_cell, hilbert_index};

/// Dense node identifier.
pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("edge ({src}, {dst}): weight {weight} is not a positive finite number")]
    NonPositiveWeight { src: u64, dst: u64, weight: f64 },
    #[error("duplicate edge ({src}, {dst})")]
    DuplicateEdge { src: u64, dst: u64 },
    #[error("edge ({src}, {dst}) references a node outside 0..{n}")]
    NodeOutOfRange { src: u64, dst: u64, n: usize },
    #[error("node count {0} exceeds the supported maximum of 2^32")]
    TooManyNodes(u64),
    #[error("weight vector has {weights} entries for {edges} edges")]
    WeightLength { weights: usize, edges: usize },
    #[error("binary cache: {0}")]
    BadCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Order in which the edge list is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageOrder {
    AsLoaded,
    Hilbert,
    SrcSorted,
}

impl fmt::Display for StorageOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StorageOrder::AsLoaded => "as-loaded",
            StorageOrder::Hilbert => "hilbert",
            StorageOrder::SrcSorted => "src-sorted",
        })
    }
}

/// Directed graph on nodes `0..n`.
///
/// Invariants: every endpoint is `< n`, no `(src, dst)` pair appears twice and
/// every weight is positive and finite. Self-loops are allowed. Unweighted
/// graphs store no weight array at all and report weight 1.0 for every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    weights: Option<Vec<f64>>,
    order: StorageOrder,
}

impl DirectedGraph {
    /// Validates and builds a graph. Edges keep the given order.
    pub fn new(
        n: usize,
        edges: Vec<(NodeId, NodeId)>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self, GraphError> {
        if n as u64 > 1u64 << 32 {
            return Err(GraphError::TooManyNodes(n as u64));
        }
        if let Some(w) = &weights {
            if w.len() != edges.len() {
                return Err(GraphError::WeightLength {
                    weights: w.len(),
                    edges: edges.len(),
                });
            }
            for (&(src, dst), &weight) in edges.iter().zip(w) {
                if !(weight > 0.0 && weight.is_finite()) {
                    return Err(GraphError::NonPositiveWeight {
                        src: src.into(),
                        dst: dst.into(),
                        weight,
                    });
                }
            }
        }
        for &(src, dst) in &edges {
            if src as usize >= n || dst as usize >= n {
                return Err(GraphError::NodeOutOfRange {
                    src: src.into(),
                    dst: dst.into(),
                    n,
                });
            }
        }
        let mut keys: Vec<u64> = edges.iter().map(|&(s, d)| edge_key(s, d)).collect();
        keys.sort_unstable();
        if let Some(pair) = keys.windows(2).find(|p| p[0] == p[1]) {
            return Err(GraphError::DuplicateEdge {
                src: pair[0] >> 32,
                dst: pair[0] & 0xffff_ffff,
            });
        }
        Ok(DirectedGraph {
            n,
            edges,
            weights,
            order: StorageOrder::AsLoaded,
        })
    }

    /// Unweighted graph from `usize` pairs; convenient in tests and examples.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let edges = edges
            .iter()
            .map(|&(s, d)| to_pair(s, d, n))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(n, edges, None)
    }

    /// Weighted graph from `(src, dst, weight)` triples.
    pub fn from_weighted_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, GraphError> {
        let pairs = edges
            .iter()
            .map(|&(s, d, _)| to_pair(s, d, n))
            .collect::<Result<Vec<_>, _>>()?;
        let weights = edges.iter().map(|&(_, _, w)| w).collect();
        Self::new(n, pairs, Some(weights))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn storage_order(&self) -> StorageOrder {
        self.order
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Edge endpoints in storage order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Per-edge weights in storage order, `None` when unweighted.
    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    #[inline]
    pub fn weight(&self, edge: usize) -> f64 {
        match &self.weights {
            Some(w) => w[edge],
            None => 1.0,
        }
    }

    /// Iterates `(src, dst, weight)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .map(move |(e, &(s, d))| (s, d, self.weight(e)))
    }

    /// Returns a copy with the weights dropped.
    pub fn unweighted(&self) -> DirectedGraph {
        DirectedGraph {
            weights: None,
            ..self.clone()
        }
    }

    /// Returns a copy with edges sorted by the Hilbert index of `(src, dst)`.
    pub fn hilbert_reorder(&self) -> DirectedGraph {
        let order = grid_order(self.n);
        self.permuted(StorageOrder::Hilbert, |&(s, d)| hilbert_index(s, d, order))
    }

    /// Returns a copy with edges sorted by `(src, dst)`.
    pub fn src_sorted(&self) -> DirectedGraph {
        self.permuted(StorageOrder::SrcSorted, |&(s, d)| edge_key(s, d))
    }

    fn permuted<F>(&self, order: StorageOrder, key: F) -> DirectedGraph
    where
        F: Fn(&(NodeId, NodeId)) -> u64,
    {
        // Keys are unique because edges are unique, so an unstable sort is
        // still deterministic.
        let mut perm: Vec<(u64, usize)> = self
            .edges
            .iter()
            .enumerate()
            .map(|(e, pair)| (key(pair), e))
            .collect();
        perm.sort_unstable();
        let edges = perm.iter().map(|&(_, e)| self.edges[e]).collect();
        let weights = self
            .weights
            .as_ref()
            .map(|w| perm.iter().map(|&(_, e)| w[e]).collect());
        DirectedGraph {
            n: self.n,
            edges,
            weights,
            order,
        }
    }

    /// Exact in/out degree of every node.
    pub fn degree_census(&self) -> DegreeCensus {
        let mut out_degree = vec![0u64; self.n];
        let mut in_degree = vec![0u64; self.n];
        for &(s, d) in &self.edges {
            out_degree[s as usize] += 1;
            in_degree[d as usize] += 1;
        }
        DegreeCensus {
            out_degree,
            in_degree,
        }
    }

    /// Out-neighborhoods in compressed sparse row form.
    pub fn out_adjacency(&self) -> Adjacency {
        Adjacency::build(self, false)
    }

    /// In-neighborhoods in compressed sparse row form.
    pub fn in_adjacency(&self) -> Adjacency {
        Adjacency::build(self, true)
    }
}

#[inline]
fn edge_key(src: NodeId, dst: NodeId) -> u64 {
    (u64::from(src) << 32) | u64::from(dst)
}

fn to_pair(s: usize, d: usize, n: usize) -> Result<(NodeId, NodeId), GraphError> {
    if s >= n || d >= n {
        return Err(GraphError::NodeOutOfRange {
            src: s as u64,
            dst: d as u64,
            n,
        });
    }
    Ok((s as NodeId, d as NodeId))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeCensus {
    pub out_degree: Vec<u64>,
    pub in_degree: Vec<u64>,
}

/// CSR view of either the out- or in-neighborhoods.
///
/// Neighbors within a row are sorted by node id. `edge_index` maps each slot
/// back to the position of the edge in the graph's storage order.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    weights: Vec<f64>,
    edge_index: Vec<usize>,
}

impl Adjacency {
    fn build(g: &DirectedGraph, reverse: bool) -> Adjacency {
        let n = g.node_count();
        let mut offsets = vec![0usize; n + 1];
        for &(s, d) in g.edges() {
            let row = if reverse { d } else { s };
            offsets[row as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut slots: Vec<(NodeId, usize)> = vec![(0, 0); g.edge_count()];
        let mut cursor = offsets.clone();
        for (e, &(s, d)) in g.edges().iter().enumerate() {
            let (row, col) = if reverse { (d, s) } else { (s, d) };
            slots[cursor[row as usize]] = (col, e);
            cursor[row as usize] += 1;
        }
        for i in 0..n {
            slots[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        let neighbors = slots.iter().map(|&(c, _)| c).collect();
        let weights = slots.iter().map(|&(_, e)| g.weight(e)).collect();
        let edge_index = slots.iter().map(|&(_, e)| e).collect();
        Adjacency {
            offsets,
            neighbors,
            weights,
            edge_index,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn neighbors(&self, node: usize) -> &[NodeId] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn weights(&self, node: usize) -> &[f64] {
        &self.weights[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn edge_indices(&self, node: usize) -> &[usize] {
        &self.edge_index[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Row boundaries; row `i` occupies `offsets()[i]..offsets()[i + 1]`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}
