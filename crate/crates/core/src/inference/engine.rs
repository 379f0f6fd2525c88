//! Edge-streaming MM engine.
//!
//! The engine keeps four `f64` per node and nothing else: the two traffic
//! counts, a message accumulator and a slot holding either the current
//! strength or the current `gamma` depending on the phase. One iteration is
//! two scatter passes over the edges and two passes over the nodes:
//!
//! 1. `acc[i] += w_ij * lambda[j]` for every edge, then
//!    `gamma[i] = c_out[i] / acc[i]` (0 when `c_out[i] == 0`).
//! 2. `acc[j] += w_ij * gamma[i]` for every edge, then
//!    `lambda[i] = (c_in[i] + alpha - 1) / (acc[i] + beta)`.
//!
//! Edges may arrive in any order. With more than one thread the edge list is
//! cut into that many contiguous shards, each shard scatters into a private
//! buffer and the buffers are summed in shard order, so results depend on
//! the thread count but never on scheduling.

use crate::graph::DirectedGraph;

use super::{ModelError, PriorConfig, StrengthVector, TrafficMarginals};

/// The complete per-node working state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[repr(C)]
pub struct NodeState {
    pub c_in: f64,
    pub c_out: f64,
    pub acc: f64,
    /// `lambda` between iterations, `gamma` between the two phases.
    pub value: f64,
}

pub struct StreamingEngine<'g> {
    graph: &'g DirectedGraph,
    nodes: Vec<NodeState>,
    prior: PriorConfig,
    threads: usize,
    iteration: usize,
}

#[derive(Clone, Copy)]
enum Direction {
    /// Messages flow from `dst` to `src` and accumulate at `src`.
    Reverse,
    /// Messages flow from `src` to `dst` and accumulate at `dst`.
    Forward,
}

impl<'g> StreamingEngine<'g> {
    pub fn new(
        graph: &'g DirectedGraph,
        traffic: &TrafficMarginals,
        prior: PriorConfig,
        init: Option<&StrengthVector>,
    ) -> Result<Self, ModelError> {
        super::check_consistent(graph, traffic)?;
        let n = graph.node_count();
        if let Some(lam) = init {
            if lam.len() != n {
                return Err(ModelError::LengthMismatch {
                    what: "initial strengths",
                    expected: n,
                    found: lam.len(),
                });
            }
        }
        let nodes = (0..n)
            .map(|i| NodeState {
                c_in: traffic.c_in()[i],
                c_out: traffic.c_out()[i],
                acc: 0.0,
                value: init.map_or(1.0, |l| l[i]),
            })
            .collect();
        Ok(StreamingEngine {
            graph,
            nodes,
            prior,
            threads: 1,
            iteration: 0,
        })
    }

    /// Number of threads for the scatter passes; 1 is the reference mode.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn state(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn lambda(&self) -> StrengthVector {
        StrengthVector::new(self.nodes.iter().map(|s| s.value).collect())
            .expect("engine keeps strengths positive and finite")
    }

    /// Runs one full iteration.
    pub fn step(&mut self) -> Result<(), ModelError> {
        self.iteration += 1;
        self.scatter(Direction::Reverse);
        for s in &mut self.nodes {
            s.value = if s.c_out > 0.0 { s.c_out / s.acc } else { 0.0 };
        }
        self.scatter(Direction::Forward);
        let (a1, beta) = (self.prior.alpha() - 1.0, self.prior.beta());
        for s in &mut self.nodes {
            s.value = (s.c_in + a1) / (s.acc + beta);
        }
        match self
            .nodes
            .iter()
            .position(|s| !(s.value > 0.0 && s.value.is_finite()))
        {
            Some(node) => Err(ModelError::NonFinite {
                iteration: self.iteration,
                node,
            }),
            None => Ok(()),
        }
    }

    /// Runs one iteration and returns `||lambda_new - lambda_old||_1 / n`.
    ///
    /// `prev` must hold the current strengths on entry and holds the new ones
    /// on return. It lives outside the engine so that fixed-iteration runs
    /// keep the four-value state.
    pub fn step_with_delta(&mut self, prev: &mut [f64]) -> Result<f64, ModelError> {
        assert_eq!(prev.len(), self.nodes.len());
        self.step()?;
        let mut delta = 0.0;
        for (p, s) in prev.iter_mut().zip(&self.nodes) {
            delta += (s.value - *p).abs();
            *p = s.value;
        }
        Ok(delta / self.nodes.len().max(1) as f64)
    }

    fn scatter(&mut self, dir: Direction) {
        for s in &mut self.nodes {
            s.acc = 0.0;
        }
        let graph = self.graph;
        let m = graph.edge_count();
        if self.threads <= 1 || m < 2 * self.threads {
            scatter_range(graph, 0..m, dir, &mut self.nodes);
            return;
        }
        let shard = m.div_ceil(self.threads);
        let nodes = &self.nodes;
        let partials: Vec<Vec<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..self.threads)
                .map(|t| {
                    let range = (t * shard).min(m)..((t + 1) * shard).min(m);
                    scope.spawn(move || {
                        let mut acc = vec![0.0; nodes.len()];
                        scatter_range_into(graph, range, dir, nodes, &mut acc);
                        acc
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scatter worker panicked"))
                .collect()
        });
        for part in &partials {
            for (s, a) in self.nodes.iter_mut().zip(part) {
                s.acc += a;
            }
        }
    }
}

fn scatter_range(
    graph: &DirectedGraph,
    range: std::ops::Range<usize>,
    dir: Direction,
    nodes: &mut [NodeState],
) {
    let edges = &graph.edges()[range.clone()];
    match (graph.weights(), dir) {
        (None, Direction::Reverse) => {
            for &(i, j) in edges {
                nodes[i as usize].acc += nodes[j as usize].value;
            }
        }
        (None, Direction::Forward) => {
            for &(i, j) in edges {
                nodes[j as usize].acc += nodes[i as usize].value;
            }
        }
        (Some(w), Direction::Reverse) => {
            for (&(i, j), &w) in edges.iter().zip(&w[range]) {
                nodes[i as usize].acc += w * nodes[j as usize].value;
            }
        }
        (Some(w), Direction::Forward) => {
            for (&(i, j), &w) in edges.iter().zip(&w[range]) {
                nodes[j as usize].acc += w * nodes[i as usize].value;
            }
        }
    }
}

fn scatter_range_into(
    graph: &DirectedGraph,
    range: std::ops::Range<usize>,
    dir: Direction,
    nodes: &[NodeState],
    acc: &mut [f64],
) {
    let edges = &graph.edges()[range.clone()];
    let weight = |k: usize| graph.weights().map_or(1.0, |w| w[range.start + k]);
    for (k, &(i, j)) in edges.iter().enumerate() {
        let (to, from) = match dir {
            Direction::Reverse => (i, j),
            Direction::Forward => (j, i),
        };
        acc[to as usize] += weight(k) * nodes[from as usize].value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_state_is_four_words() {
        assert_eq!(
            std::mem::size_of::<NodeState>(),
            4 * std::mem::size_of::<f64>()
        );
    }

    #[test]
    fn sharded_scatter_matches_single_thread() {
        let mut edges = Vec::new();
        for i in 0..30usize {
            for k in 1..5 {
                edges.push((i, (i * 7 + k * 3) % 30));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let g = DirectedGraph::from_edges(30, &edges).unwrap();
        let c: Vec<f64> = (0..30).map(|i| (i % 7) as f64 + 1.0).collect();
        let t = TrafficMarginals::new(c.clone(), c).unwrap();
        let prior = PriorConfig::default();
        let mut a = StreamingEngine::new(&g, &t, prior, None).unwrap();
        let mut b = StreamingEngine::new(&g, &t, prior, None)
            .unwrap()
            .with_threads(4);
        for _ in 0..20 {
            a.step().unwrap();
            b.step().unwrap();
        }
        for (x, y) in a.state().iter().zip(b.state()) {
            assert!((x.value - y.value).abs() <= 1e-12 * x.value);
        }
    }
}
