//! Shared oracles and instance generators for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netchoice::eval::kl_divergence;
use netchoice::graph::{DirectedGraph, NodeId};
use netchoice::inference::{PriorConfig, StrengthVector, TrafficMarginals};
use netchoice::simulate::{
    aggregate_marginals, lognormal_strengths, random_strongly_connected, sample_trajectories,
    EdgeCounts, StartNode, TrajectoryLength, TrajectorySpec,
};
use netchoice::transitions::EdgeTransitionTable;

/// Log-posterior in log-strength coordinates, written out independently of
/// the library.
pub fn objective(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    prior: &PriorConfig,
    theta: &[f64],
) -> f64 {
    let n = g.node_count();
    let mut z = vec![0.0; n];
    for (i, j, w) in g.iter() {
        z[i as usize] += w * theta[j as usize].exp();
    }
    let mut f = 0.0;
    for i in 0..n {
        f += (t.c_in()[i] + prior.alpha() - 1.0) * theta[i] - prior.beta() * theta[i].exp();
        if t.c_out()[i] > 0.0 {
            f -= t.c_out()[i] * z[i].ln();
        }
    }
    f
}

/// Maximizes the log-posterior by damped Newton steps on `theta = ln lambda`,
/// where it is strictly concave. Dense; meant for graphs of a few dozen
/// nodes.
pub fn newton_map(g: &DirectedGraph, t: &TrafficMarginals, prior: &PriorConfig) -> Vec<f64> {
    let n = g.node_count();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, w) in g.iter() {
        rows[i as usize].push((j as usize, w));
    }
    let mut theta: Vec<f64> = vec![0.0; n];
    let scale = 1.0 + t.total_in() + t.total_out();
    for _ in 0..500 {
        let lam: Vec<f64> = theta.iter().map(|x: &f64| x.exp()).collect();
        let mut grad = DVector::zeros(n);
        let mut neg_hess = DMatrix::zeros(n, n);
        for i in 0..n {
            grad[i] = t.c_in()[i] + prior.alpha() - 1.0 - prior.beta() * lam[i];
            neg_hess[(i, i)] += prior.beta() * lam[i];
        }
        for (j, row) in rows.iter().enumerate() {
            let c = t.c_out()[j];
            if c == 0.0 {
                continue;
            }
            let z: f64 = row.iter().map(|&(k, w)| w * lam[k]).sum();
            let p: Vec<(usize, f64)> = row.iter().map(|&(k, w)| (k, w * lam[k] / z)).collect();
            for &(a, pa) in &p {
                grad[a] -= c * pa;
                neg_hess[(a, a)] += c * pa;
                for &(b, pb) in &p {
                    neg_hess[(a, b)] -= c * pa * pb;
                }
            }
        }
        if grad.amax() < 1e-11 * scale {
            break;
        }
        let step = neg_hess
            .cholesky()
            .expect("negative Hessian is positive definite")
            .solve(&grad);
        let f0 = objective(g, t, prior, &theta);
        let slope = grad.dot(&step);
        let mut s = 1.0;
        loop {
            let trial: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(x, d)| x + s * d)
                .collect();
            if objective(g, t, prior, &trial) >= f0 + 1e-4 * s * slope || s < 1e-12 {
                theta = trial;
                break;
            }
            s *= 0.5;
        }
    }
    theta.iter().map(|x| x.exp()).collect()
}

/// Random strongly connected instance with traffic aggregated from sampled
/// trajectories under lognormal strengths.
pub struct Instance {
    pub graph: DirectedGraph,
    pub truth: StrengthVector,
    pub counts: EdgeCounts,
    pub traffic: TrafficMarginals,
}

pub fn simulated_instance(n: usize, out_degree: usize, transitions: u64, seed: u64) -> Instance {
    let graph = random_strongly_connected(n, out_degree, seed);
    let truth = lognormal_strengths(n, 1.0, seed);
    let spec = TrajectorySpec {
        num_trajectories: 1,
        length: TrajectoryLength::Fixed(transitions),
        start: StartNode::Uniform,
        seed,
        allow_early_stop: false,
    };
    let counts = sample_trajectories(&graph, &truth, &spec, 1).expect("strongly connected");
    let traffic = aggregate_marginals(&counts);
    Instance {
        graph,
        truth,
        counts,
        traffic,
    }
}

/// Arbitrary digraph (possibly disconnected, with sinks and self-loops)
/// plus traffic aggregated from random per-edge counts, so the marginals are
/// always realizable.
pub fn arbitrary_instance(
    seed: u64,
    max_n: usize,
    weighted: bool,
) -> (DirectedGraph, TrafficMarginals) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let density = rng.random_range(0.05..0.6);
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < density {
                edges.push((i as u32, j as u32));
                weights.push(rng.random_range(0.1..5.0));
            }
        }
    }
    let g = DirectedGraph::new(n, edges, weighted.then_some(weights)).unwrap();
    let mut c_in = vec![0.0; n];
    let mut c_out = vec![0.0; n];
    for (i, j, _) in g.iter() {
        let c = if rng.random::<f64>() < 0.3 {
            0
        } else {
            rng.random_range(0..20)
        };
        c_out[i as usize] += c as f64;
        c_in[j as usize] += c as f64;
    }
    (g, TrafficMarginals::new(c_in, c_out).unwrap())
}

/// Like `arbitrary_instance` but with independent marginals, which need not
/// come from any set of transitions.
pub fn unrealizable_instance(seed: u64, max_n: usize) -> (DirectedGraph, TrafficMarginals) {
    let (g, _) = arbitrary_instance(seed, max_n, false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = g.node_count();
    let deg = g.degree_census().out_degree;
    let c_in: Vec<f64> = (0..n).map(|_| rng.random_range(0..50) as f64).collect();
    let c_out: Vec<f64> = (0..n)
        .map(|i| {
            if deg[i] == 0 {
                0.0
            } else {
                rng.random_range(0..50) as f64
            }
        })
        .collect();
    (g, TrafficMarginals::new(c_in, c_out).unwrap())
}

pub fn random_strengths(seed: u64, n: usize) -> StrengthVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StrengthVector::new((0..n).map(|_| rng.random_range(0.05..20.0)).collect()).unwrap()
}

/// `sum_ij c_ij ln p_ij` with `p_ij` evaluated directly from the model.
pub fn full_edge_log_likelihood(g: &DirectedGraph, counts: &EdgeCounts, lam: &[f64]) -> f64 {
    let n = g.node_count();
    let mut z = vec![0.0; n];
    let mut weight = std::collections::HashMap::new();
    for (i, j, w) in g.iter() {
        z[i as usize] += w * lam[j as usize];
        weight.insert((i, j), w);
    }
    counts
        .entries()
        .iter()
        .filter(|e| e.2 > 0)
        .map(|&(i, j, c)| c as f64 * (weight[&(i, j)] * lam[j as usize] / z[i as usize]).ln())
        .sum()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x / v[0]).collect()
}

/// Mean of per-node `KL(reference || estimate)` weighted by observed
/// departures in `counts`.
pub fn choice_weighted_kl(
    counts: &EdgeCounts,
    reference: &EdgeTransitionTable,
    est: &EdgeTransitionTable,
) -> f64 {
    let mut departures = vec![0.0; counts.node_count()];
    for &(s, _, c) in counts.entries() {
        departures[s as usize] += c as f64;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &w) in departures.iter().enumerate() {
        if w > 0.0 {
            num += w * kl_divergence(reference.row(i), est.row(i)).unwrap();
            den += w;
        }
    }
    num / den
}

/// Strongly connected, but no out-neighborhood mixes {3, 4} with the rest.
pub fn split_hypergraph() -> DirectedGraph {
    DirectedGraph::from_edges(
        7,
        &[
            (0, 1),
            (0, 2),
            (0, 5),
            (1, 0),
            (1, 2),
            (2, 3),
            (2, 4),
            (3, 4),
            (4, 0),
            (4, 1),
            (5, 0),
            (5, 6),
            (6, 1),
            (6, 5),
        ],
    )
    .unwrap()
}

/// Connected hypergraph whose only feasible flow is the cycle 0 1 2 3, so
/// node 2 never wins against anybody.
pub fn one_sided_comparisons() -> (DirectedGraph, TrafficMarginals) {
    let g = DirectedGraph::from_edges(4, &[(0, 1), (0, 2), (1, 2), (2, 0), (2, 3), (3, 0), (3, 1)])
        .unwrap();
    let t = TrafficMarginals::new(vec![1.0; 4], vec![1.0; 4]).unwrap();
    (g, t)
}

/// Random row with frequent ties, normalized, ids strictly increasing.
pub fn random_row(rng: &mut ChaCha8Rng) -> (Vec<NodeId>, Vec<f64>, Vec<f64>) {
    let k = rng.random_range(1..12);
    let mut ids: Vec<NodeId> = Vec::new();
    let mut next = 0;
    for _ in 0..k {
        next += rng.random_range(1..5);
        ids.push(next);
    }
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let raw: Vec<f64> = (0..k)
            .map(|_| {
                if rng.random::<f64>() < 0.3 {
                    rng.random_range(1..4) as f64
                } else {
                    rng.random::<f64>() + 1e-3
                }
            })
            .collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    };
    let p = draw(rng);
    let q = draw(rng);
    (ids, p, q)
}

pub fn brute_kl(p: &[f64], q: &[f64]) -> f64 {
    let mut cross = 0.0;
    let mut entropy = 0.0;
    for k in 0..p.len() {
        if p[k] > 0.0 {
            entropy += p[k] * p[k].ln();
            cross += p[k] * q[k].ln();
        }
    }
    entropy - cross
}

pub fn brute_rank(ids: &[NodeId], p: &[f64], k: usize) -> usize {
    1 + (0..ids.len())
        .filter(|&m| p[m] > p[k] || (p[m] == p[k] && ids[m] < ids[k]))
        .count()
}

pub fn brute_displacement(ids: &[NodeId], p: &[f64], q: &[f64]) -> f64 {
    let k = ids.len();
    let total: usize = (0..k)
        .map(|j| brute_rank(ids, p, j).abs_diff(brute_rank(ids, q, j)))
        .sum();
    total as f64 / (k * k) as f64
}
