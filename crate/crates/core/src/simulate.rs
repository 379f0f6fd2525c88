//! Ground-truth traffic from the choice process itself.
//!
//! A walker starts somewhere, picks a successor `j` of its current node `i`
//! with probability `w_ij * lambda_j / sum_k w_ik * lambda_k`, and repeats.
//! Sampled trajectories are reduced to per-edge counts, which can then be
//! aggregated into the marginals the inference engine consumes.
//!
//! Randomness: trajectory `k` draws from `ChaCha8Rng::seed_from_u64(seed)`
//! switched to stream `k`. Streams are independent and portable, so the
//! counts depend only on the spec, never on the thread count.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use thiserror::Error;

use crate::graph::{Adjacency, DirectedGraph, NodeId};
use crate::inference::{StrengthVector, TrafficMarginals};
use crate::transitions::EdgeTransitionTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("trajectory {trajectory} reached node {node}, which has no outgoing edge (allow early stops to truncate instead)")]
    HitSink { trajectory: u64, node: NodeId },
    #[error("invalid trajectory spec: {0}")]
    InvalidSpec(String),
    #[error("edge counts: {0}")]
    InvalidCounts(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryLength {
    /// Exactly this many hops.
    Fixed(u64),
    /// Before every hop the walker stops with this probability.
    Geometric { stop_probability: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartNode {
    Fixed(NodeId),
    Uniform,
    /// Start probabilities, one per node, summing to 1.
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub num_trajectories: u64,
    pub length: TrajectoryLength,
    pub start: StartNode,
    pub seed: u64,
    /// Truncate a trajectory at a node without successors instead of failing.
    pub allow_early_stop: bool,
}

impl TrajectorySpec {
    fn validate(&self, n: usize) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::InvalidSpec(m));
        if let TrajectoryLength::Geometric {
            stop_probability: q,
        } = self.length
        {
            if !(q > 0.0 && q < 1.0) {
                return bad(format!("stop probability must be in (0, 1), got {q}"));
            }
        }
        match &self.start {
            StartNode::Fixed(v) if *v as usize >= n => {
                bad(format!("start node {v} outside 0..{n}"))
            }
            StartNode::Uniform if n == 0 && self.num_trajectories > 0 => {
                bad("cannot start uniformly on an empty graph".into())
            }
            StartNode::Distribution(p) => {
                if p.len() != n {
                    return bad(format!(
                        "start distribution has {} entries for {n} nodes",
                        p.len()
                    ));
                }
                if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return bad("start probabilities must be nonnegative".into());
                }
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return bad(format!("start probabilities sum to {s}, not 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Transition counts `c_ij`, sorted by `(src, dst)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeCounts {
    n: usize,
    entries: Vec<(NodeId, NodeId, u64)>,
}

impl EdgeCounts {
    /// Builds counts from entries in any order; pairs must be unique.
    pub fn new(n: usize, mut entries: Vec<(NodeId, NodeId, u64)>) -> Result<Self, SimulationError> {
        entries.sort_unstable_by_key(|&(s, d, _)| (s, d));
        for (k, &(s, d, _)) in entries.iter().enumerate() {
            if s as usize >= n || d as usize >= n {
                return Err(SimulationError::InvalidCounts(format!(
                    "edge ({s}, {d}) outside 0..{n}"
                )));
            }
            if k > 0 && entries[k - 1].0 == s && entries[k - 1].1 == d {
                return Err(SimulationError::InvalidCounts(format!(
                    "edge ({s}, {d}) listed twice"
                )));
            }
        }
        Ok(EdgeCounts { n, entries })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(NodeId, NodeId, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// Graph on the listed edges, including zero-count ones.
    pub fn support_graph(&self) -> DirectedGraph {
        let edges = self.entries.iter().map(|&(s, d, _)| (s, d)).collect();
        DirectedGraph::new(self.n, edges, None).expect("counts are validated on construction")
    }
}

/// Per-node cumulative choice weights over the CSR out-rows.
struct ChoiceSampler {
    adj: Adjacency,
    targets: Vec<NodeId>,
    cumulative: Vec<f64>,
}

impl ChoiceSampler {
    fn new(g: &DirectedGraph, lam: &StrengthVector) -> Self {
        let adj = g.out_adjacency();
        let mut cumulative = Vec::with_capacity(g.edge_count());
        let mut targets = Vec::with_capacity(g.edge_count());
        for i in 0..adj.node_count() {
            targets.extend_from_slice(adj.neighbors(i));
            let mut acc = 0.0;
            for (&j, &w) in adj.neighbors(i).iter().zip(adj.weights(i)) {
                acc += w * lam[j as usize];
                cumulative.push(acc);
            }
        }
        ChoiceSampler {
            adj,
            targets,
            cumulative,
        }
    }

    /// CSR slot of the chosen edge, or `None` at a sink.
    #[inline]
    fn choose<R: Rng>(&self, node: usize, rng: &mut R) -> Option<usize> {
        let (lo, hi) = (self.adj.offsets()[node], self.adj.offsets()[node + 1]);
        if lo == hi {
            return None;
        }
        let row = &self.cumulative[lo..hi];
        let u = rng.random::<f64>() * row[row.len() - 1];
        let k = row.partition_point(|&c| c <= u).min(row.len() - 1);
        Some(lo + k)
    }
}

/// Streams reserved for the generators below, so one seed can drive a
/// whole experiment without reusing trajectory streams.
pub const GRAPH_STREAM: u64 = u64::MAX - 1;
pub const STRENGTH_STREAM: u64 = u64::MAX;

/// The RNG for trajectory `index` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Samples trajectories and returns the count on every edge of `g`
/// (zero-count edges included). `threads > 1` splits trajectories into
/// contiguous blocks; the result is identical for any thread count.
pub fn sample_trajectories(
    g: &DirectedGraph,
    lam: &StrengthVector,
    spec: &TrajectorySpec,
    threads: usize,
) -> Result<EdgeCounts, SimulationError> {
    let n = g.node_count();
    if lam.len() != n {
        return Err(SimulationError::InvalidSpec(format!(
            "{} strengths for {n} nodes",
            lam.len()
        )));
    }
    spec.validate(n)?;
    let sampler = ChoiceSampler::new(g, lam);
    let start_cdf: Option<Vec<f64>> = match &spec.start {
        StartNode::Distribution(p) => Some(
            p.iter()
                .scan(0.0, |acc, &x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect(),
        ),
        _ => None,
    };
    let run_block = |range: std::ops::Range<u64>| -> Result<Vec<u64>, SimulationError> {
        let mut counts = vec![0u64; g.edge_count()];
        for k in range {
            let mut rng = trajectory_rng(spec.seed, k);
            let mut node = match &spec.start {
                StartNode::Fixed(v) => *v as usize,
                StartNode::Uniform => rng.random_range(0..n),
                StartNode::Distribution(_) => {
                    let cdf = start_cdf.as_ref().expect("built above");
                    let u = rng.random::<f64>() * cdf[n - 1];
                    cdf.partition_point(|&c| c <= u).min(n - 1)
                }
            };
            let mut hops = 0u64;
            loop {
                let more = match spec.length {
                    TrajectoryLength::Fixed(t) => hops < t,
                    TrajectoryLength::Geometric { stop_probability } => {
                        rng.random::<f64>() >= stop_probability
                    }
                };
                if !more {
                    break;
                }
                match sampler.choose(node, &mut rng) {
                    Some(slot) => {
                        counts[slot] += 1;
                        node = sampler.targets[slot] as usize;
                        hops += 1;
                    }
                    None if spec.allow_early_stop => break,
                    None => {
                        return Err(SimulationError::HitSink {
                            trajectory: k,
                            node: node as NodeId,
                        })
                    }
                }
            }
        }
        Ok(counts)
    };

    let total = spec.num_trajectories;
    let threads = threads.max(1) as u64;
    let counts = if threads == 1 || total < 2 * threads {
        run_block(0..total)?
    } else {
        let block = total.div_ceil(threads);
        let parts: Vec<Result<Vec<u64>, SimulationError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let range = (t * block).min(total)..((t + 1) * block).min(total);
                    let run = &run_block;
                    scope.spawn(move || run(range))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation worker panicked"))
                .collect()
        });
        let mut sum = vec![0u64; g.edge_count()];
        for part in parts {
            for (s, c) in sum.iter_mut().zip(part?) {
                *s += c;
            }
        }
        sum
    };

    let adj = &sampler.adj;
    let mut entries = Vec::with_capacity(g.edge_count());
    for i in 0..n {
        let lo = adj.offsets()[i];
        for (k, &j) in adj.neighbors(i).iter().enumerate() {
            entries.push((i as NodeId, j, counts[lo + k]));
        }
    }
    Ok(EdgeCounts { n, entries })
}

/// `c_out[i] = sum_j c_ij`, `c_in[j] = sum_i c_ij`.
pub fn aggregate_marginals(counts: &EdgeCounts) -> TrafficMarginals {
    let n = counts.node_count();
    let (mut c_in, mut c_out) = (vec![0u64; n], vec![0u64; n]);
    for &(s, d, c) in counts.entries() {
        c_out[s as usize] += c;
        c_in[d as usize] += c;
    }
    let to_f = |v: Vec<u64>| v.into_iter().map(|c| c as f64).collect();
    TrafficMarginals::new(to_f(c_in), to_f(c_out)).expect("counts are nonnegative")
}

/// Row-normalized counts, `p*_ij = c_ij / sum_k c_ik`. Nodes with no
/// outgoing count get an empty row; zero-count edges in a nonempty row
/// keep probability 0.
pub fn empirical_transitions(counts: &EdgeCounts) -> EdgeTransitionTable {
    let g = counts.support_graph();
    let lookup = counts.entries();
    let mut cursor = 0usize;
    // Support-graph rows are sorted exactly like the entries.
    EdgeTransitionTable::normalize_rows(&g.out_adjacency(), false, |_, _, _| {
        let c = lookup[cursor].2 as f64;
        cursor += 1;
        c
    })
}

/// Random strongly connected digraph: a Hamiltonian cycle through a random
/// permutation plus `out_degree - 1` further distinct random successors per
/// node (no self-loops, no duplicates). Requires `out_degree < n` unless
/// `n <= 1`.
pub fn random_strongly_connected(n: usize, out_degree: usize, seed: u64) -> DirectedGraph {
    let mut rng = trajectory_rng(seed, GRAPH_STREAM);
    if n <= 1 {
        return DirectedGraph::new(n, Vec::new(), None).expect("empty graph");
    }
    let out_degree = out_degree.clamp(1, n - 1);
    let mut perm: Vec<NodeId> = (0..n as NodeId).collect();
    perm.shuffle(&mut rng);
    let mut next = vec![0 as NodeId; n];
    for k in 0..n {
        next[perm[k] as usize] = perm[(k + 1) % n];
    }
    let mut edges = Vec::with_capacity(n * out_degree);
    let mut row: Vec<NodeId> = Vec::with_capacity(out_degree);
    let mut seen: HashSet<NodeId> = HashSet::new();
    for (i, &succ) in next.iter().enumerate() {
        row.clear();
        row.push(succ);
        let dense = out_degree * 4 > n;
        if dense {
            seen.clear();
            seen.insert(succ);
            seen.insert(i as NodeId);
        }
        while row.len() < out_degree {
            let j = rng.random_range(0..n) as NodeId;
            let fresh = if dense {
                seen.insert(j)
            } else {
                j as usize != i && !row.contains(&j)
            };
            if fresh {
                row.push(j);
            }
        }
        edges.extend(row.iter().map(|&j| (i as NodeId, j)));
    }
    DirectedGraph::new(n, edges, None).expect("generator yields a valid graph")
}

/// `lambda_i = exp(sigma * z_i)` with standard normal `z_i`.
pub fn lognormal_strengths(n: usize, sigma: f64, seed: u64) -> StrengthVector {
    let mut rng = trajectory_rng(seed, STRENGTH_STREAM);
    let dist = LogNormal::new(0.0, sigma).expect("sigma must be finite and nonnegative");
    StrengthVector::new((0..n).map(|_| dist.sample(&mut rng)).collect())
        .expect("lognormal draws are positive")
}
