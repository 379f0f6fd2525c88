//! Reference estimators that need no fitting.

use crate::graph::DirectedGraph;
use crate::inference::TrafficMarginals;
use crate::transitions::EdgeTransitionTable;

/// `q_ij` proportional to the arrival count of `j`. Rows whose targets
/// all have zero arrivals become uniform.
pub fn baseline_traffic(g: &DirectedGraph, t: &TrafficMarginals) -> EdgeTransitionTable {
    assert_eq!(
        t.len(),
        g.node_count(),
        "traffic length must match the graph"
    );
    let c_in = t.c_in();
    EdgeTransitionTable::normalize_rows(&g.out_adjacency(), true, |_, j, _| c_in[j as usize])
}

/// `q_ij` proportional to `scores[j]`.
pub fn baseline_pagerank(g: &DirectedGraph, scores: &[f64]) -> EdgeTransitionTable {
    assert_eq!(scores.len(), g.node_count(), "one score per node");
    EdgeTransitionTable::normalize_rows(&g.out_adjacency(), true, |_, j, _| scores[j as usize])
}

/// `q_ij = 1 / |N+(i)|`.
pub fn baseline_uniform(g: &DirectedGraph) -> EdgeTransitionTable {
    EdgeTransitionTable::normalize_rows(&g.out_adjacency(), true, |_, _, _| 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankOptions {
    pub damping: f64,
    /// Stop once the L1 change of the score vector drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankOptions {
    fn default() -> Self {
        PageRankOptions {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

/// Random-surfer scores by power iteration.
///
/// The surfer follows an out-link chosen uniformly (edge weights are
/// ignored) with probability `damping` and teleports uniformly otherwise.
/// Mass sitting on nodes without out-links is spread uniformly. Scores sum
/// to one.
pub fn pagerank(g: &DirectedGraph, opts: &PageRankOptions) -> Vec<f64> {
    assert!(
        opts.damping > 0.0 && opts.damping < 1.0,
        "damping must lie in (0, 1)"
    );
    let n = g.node_count();
    if n == 0 {
        return Vec::new();
    }
    let deg = g.degree_census().out_degree;
    let uniform = 1.0 / n as f64;
    let mut x = vec![uniform; n];
    let mut next = vec![0.0; n];
    for _ in 0..opts.max_iter {
        let dangling: f64 = x
            .iter()
            .zip(&deg)
            .filter(|(_, &d)| d == 0)
            .map(|(v, _)| v)
            .sum();
        let base = (1.0 - opts.damping) * uniform + opts.damping * dangling * uniform;
        next.iter_mut().for_each(|v| *v = base);
        for &(s, d) in g.edges() {
            next[d as usize] += opts.damping * x[s as usize] / deg[s as usize] as f64;
        }
        let total: f64 = next.iter().sum();
        let mut change = 0.0;
        for (v, nv) in x.iter_mut().zip(&next) {
            let nv = nv / total;
            change += (nv - *v).abs();
            *v = nv;
        }
        if change < opts.tol {
            break;
        }
    }
    x
}
