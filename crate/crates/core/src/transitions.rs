//! Per-edge transition probabilities, stored row by row.

use crate::graph::{Adjacency, NodeId};

/// Transition probabilities `p_ij` grouped by source node.
///
/// Row `i` lists the targets of `i` in ascending id order together with
/// their probabilities. A node without outgoing transitions has an empty row.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTransitionTable {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("transition ({src}, {dst}) listed twice")]
    Duplicate { src: NodeId, dst: NodeId },
    #[error("transition ({src}, {dst}) references a node outside 0..{n}")]
    OutOfRange { src: NodeId, dst: NodeId, n: usize },
    #[error("transition ({src}, {dst}) has invalid probability {p}")]
    BadProbability { src: NodeId, dst: NodeId, p: f64 },
}

impl EdgeTransitionTable {
    /// Row-normalizes nonnegative scores over each adjacency row.
    ///
    /// `score(src, dst, weight)` is evaluated once per edge. Rows whose
    /// scores sum to zero become uniform when `uniform_fallback` is set and
    /// are left empty otherwise.
    pub fn normalize_rows<F>(adj: &Adjacency, uniform_fallback: bool, mut score: F) -> Self
    where
        F: FnMut(NodeId, NodeId, f64) -> f64,
    {
        let n = adj.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        let mut row = Vec::new();
        for i in 0..n {
            let nbrs = adj.neighbors(i);
            let wts = adj.weights(i);
            row.clear();
            row.extend(
                nbrs.iter()
                    .zip(wts)
                    .map(|(&j, &w)| score(i as NodeId, j, w)),
            );
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                targets.extend_from_slice(nbrs);
                probs.extend(row.iter().map(|s| s / total));
            } else if uniform_fallback && !nbrs.is_empty() {
                targets.extend_from_slice(nbrs);
                let p = 1.0 / nbrs.len() as f64;
                probs.extend(std::iter::repeat_n(p, nbrs.len()));
            }
            offsets.push(targets.len());
        }
        EdgeTransitionTable {
            offsets,
            targets,
            probs,
        }
    }

    /// Builds a table from explicit `(src, dst, p)` triples, e.g. read from
    /// a file. Triples may come in any order; probabilities are taken as is.
    pub fn from_triples(
        n: usize,
        mut triples: Vec<(NodeId, NodeId, f64)>,
    ) -> Result<Self, TableError> {
        triples.sort_by_key(|&(s, d, _)| (s, d));
        let mut offsets = vec![0usize; n + 1];
        let mut targets = Vec::with_capacity(triples.len());
        let mut probs = Vec::with_capacity(triples.len());
        for (k, &(src, dst, p)) in triples.iter().enumerate() {
            if src as usize >= n || dst as usize >= n {
                return Err(TableError::OutOfRange { src, dst, n });
            }
            if k > 0 && triples[k - 1].0 == src && triples[k - 1].1 == dst {
                return Err(TableError::Duplicate { src, dst });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(TableError::BadProbability { src, dst, p });
            }
            offsets[src as usize + 1] += 1;
            targets.push(dst);
            probs.push(p);
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Ok(EdgeTransitionTable {
            offsets,
            targets,
            probs,
        })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of stored transitions.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, src: usize) -> (&[NodeId], &[f64]) {
        let r = self.offsets[src]..self.offsets[src + 1];
        (&self.targets[r.clone()], &self.probs[r])
    }

    pub fn get(&self, src: usize, dst: NodeId) -> Option<f64> {
        let (t, p) = self.row(src);
        t.binary_search(&dst).ok().map(|k| p[k])
    }

    /// Iterates `(src, dst, p)` in row order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            let (t, p) = self.row(i);
            t.iter().zip(p).map(move |(&d, &q)| (i as NodeId, d, q))
        })
    }

    /// Largest `|1 - row sum|` over nonempty rows.
    pub fn max_row_error(&self) -> f64 {
        (0..self.node_count())
            .filter_map(|i| {
                let (_, p) = self.row(i);
                (!p.is_empty()).then(|| (1.0 - p.iter().sum::<f64>()).abs())
            })
            .fold(0.0, f64::max)
    }
}
