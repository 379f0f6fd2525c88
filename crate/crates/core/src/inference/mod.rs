//! MAP inference of node strengths from marginal traffic.
//!
//! Model: a walker at node `i` moves to `j` in its out-neighborhood with
//! probability `w_ij * lambda_j / sum_k w_ik * lambda_k`. Given only per-node
//! arrival and departure counts, the log-likelihood is, up to a constant,
//!
//! ```text
//! sum_i [ c_in[i] * log(lambda_i) - c_out[i] * log(sum_{k in N+(i)} w_ik * lambda_k) ]
//! ```
//!
//! and with i.i.d. Gamma(alpha, beta) priors the log-posterior adds
//! `sum_i [(alpha - 1) * log(lambda_i) - beta * lambda_i]`. The log-posterior
//! has a unique maximizer whenever `alpha > 1`, whatever the graph.
//!
//! [`fit`] maximizes it by minorization-maximization: bounding
//! `log x <= log y + x / y - 1` at the current iterate gives a separable
//! surrogate whose maximizer is
//!
//! ```text
//! gamma_j   = c_out[j] / sum_{k in N+(j)} w_jk * lambda_k
//! lambda_i' = (c_in[i] + alpha - 1) / (sum_{j in N-(i)} w_ji * gamma_j + beta)
//! ```
//!
//! Each update never decreases the log-posterior and the iterates converge
//! to the maximizer from any positive start. The same update is what EM
//! produces with latent `Z_i ~ Gamma(c_out[i], sum_k w_ik * lambda_k)`: the
//! expected complete-data log-posterior differs from the MM surrogate by a
//! term that does not depend on `lambda`, so both yield the same iterates
//! and only the MM form is implemented.

mod engine;
mod types;

use thiserror::Error;

use crate::graph::{DirectedGraph, NodeId};
use crate::transitions::EdgeTransitionTable;

pub use engine::{NodeState, StreamingEngine};
pub use types::{conserve_flow, PartialMarginals, PriorConfig, StrengthVector, TrafficMarginals};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("node {node} has {c_out} departures but no outgoing edge")]
    SinkWithTraffic { node: usize, c_out: f64 },
    #[error("node {node}: traffic count {value} is not a nonnegative finite number")]
    InvalidTraffic { node: usize, value: f64 },
    #[error("node {node}: strength {value} is not a positive finite number")]
    InvalidStrength { node: usize, value: f64 },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("non-finite strength at node {node} in iteration {iteration}")]
    NonFinite { iteration: usize, node: usize },
    #[error("cannot conserve flow: {0}")]
    ConserveFlow(&'static str),
}

/// Settings for [`fit`]. Defaults: Gamma(2, 1) prior, tolerance 1e-8,
/// 10 000 iterations, all-ones start, one thread, no trace.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub prior: PriorConfig,
    pub tol: f64,
    pub max_iter: usize,
    pub init: Option<StrengthVector>,
    pub threads: usize,
    pub record_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            prior: PriorConfig::default(),
            tol: 1e-8,
            max_iter: 10_000,
            init: None,
            threads: 1,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub lambda: StrengthVector,
    pub iterations: usize,
    /// `||lambda(t) - lambda(t-1)||_1 / n` after the last iteration;
    /// infinite when no iteration ran.
    pub final_delta: f64,
    pub converged: bool,
    /// Log-posterior at the start and after every iteration.
    pub log_posterior_trace: Option<Vec<f64>>,
}

pub(crate) fn check_consistent(g: &DirectedGraph, t: &TrafficMarginals) -> Result<(), ModelError> {
    let n = g.node_count();
    if t.len() != n {
        return Err(ModelError::LengthMismatch {
            what: "traffic",
            expected: n,
            found: t.len(),
        });
    }
    let census = g.degree_census();
    for (node, (&c, &deg)) in t.c_out().iter().zip(&census.out_degree).enumerate() {
        if c > 0.0 && deg == 0 {
            return Err(ModelError::SinkWithTraffic { node, c_out: c });
        }
    }
    Ok(())
}

fn check_strengths(g: &DirectedGraph, lam: &StrengthVector) -> Result<(), ModelError> {
    if lam.len() != g.node_count() {
        return Err(ModelError::LengthMismatch {
            what: "strengths",
            expected: g.node_count(),
            found: lam.len(),
        });
    }
    Ok(())
}

/// `sum_{k in N+(i)} w_ik * lambda_k` for every node.
fn out_sums(g: &DirectedGraph, lam: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; g.node_count()];
    for (i, j, w) in g.iter() {
        z[i as usize] += w * lam[j as usize];
    }
    z
}

/// Marginal log-likelihood, dropping the `sum c_ij log w_ij` constant.
pub fn log_likelihood(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    lam: &StrengthVector,
) -> Result<f64, ModelError> {
    check_consistent(g, t)?;
    check_strengths(g, lam)?;
    let z = out_sums(g, lam.as_slice());
    let mut ll = 0.0;
    for i in 0..g.node_count() {
        let (c_in, c_out) = (t.c_in()[i], t.c_out()[i]);
        if c_in > 0.0 {
            ll += c_in * lam[i].ln();
        }
        if c_out > 0.0 {
            ll -= c_out * z[i].ln();
        }
    }
    Ok(ll)
}

/// Log-posterior under i.i.d. Gamma priors, up to an additive constant.
pub fn log_posterior(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    lam: &StrengthVector,
    prior: &PriorConfig,
) -> Result<f64, ModelError> {
    Ok(log_likelihood(g, t, lam)? + log_prior(lam, prior))
}

/// `sum_i [(alpha - 1) log(lambda_i) - beta * lambda_i]`.
pub fn log_prior(lam: &StrengthVector, prior: &PriorConfig) -> f64 {
    let a1 = prior.alpha() - 1.0;
    lam.as_slice()
        .iter()
        .map(|&l| a1 * l.ln() - prior.beta() * l)
        .sum()
}

/// One MM update starting from `lam`.
pub fn mm_step(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    lam: &StrengthVector,
    prior: &PriorConfig,
) -> Result<StrengthVector, ModelError> {
    check_strengths(g, lam)?;
    let mut engine = StreamingEngine::new(g, t, *prior, Some(lam))?;
    engine.step()?;
    Ok(engine.lambda())
}

/// Iterates the MM update until the mean absolute change of the strengths
/// drops below `opts.tol` or `opts.max_iter` iterations have run.
pub fn fit(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    opts: &FitOptions,
) -> Result<FitReport, ModelError> {
    fit_with_progress(g, t, opts, |_, _| {})
}

/// Like [`fit`], calling `progress(iteration, delta)` after every iteration.
pub fn fit_with_progress<F>(
    g: &DirectedGraph,
    t: &TrafficMarginals,
    opts: &FitOptions,
    mut progress: F,
) -> Result<FitReport, ModelError>
where
    F: FnMut(usize, f64),
{
    if let Some(init) = &opts.init {
        check_strengths(g, init)?;
    }
    let mut engine =
        StreamingEngine::new(g, t, opts.prior, opts.init.as_ref())?.with_threads(opts.threads);
    let mut prev: Vec<f64> = engine.state().iter().map(|s| s.value).collect();
    let mut trace = if opts.record_trace {
        Some(vec![log_posterior(g, t, &engine.lambda(), &opts.prior)?])
    } else {
        None
    };
    let mut delta = f64::INFINITY;
    let mut converged = false;
    while engine.iteration() < opts.max_iter {
        delta = engine.step_with_delta(&mut prev)?;
        progress(engine.iteration(), delta);
        if let Some(tr) = trace.as_mut() {
            tr.push(log_posterior(g, t, &engine.lambda(), &opts.prior)?);
        }
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FitReport {
        lambda: engine.lambda(),
        iterations: engine.iteration(),
        final_delta: delta,
        converged,
        log_posterior_trace: trace,
    })
}

/// `p_ij = w_ij * lambda_j / sum_{k in N+(i)} w_ik * lambda_k`.
///
/// Panics if `lam` does not have one entry per node.
pub fn transition_probabilities(g: &DirectedGraph, lam: &StrengthVector) -> EdgeTransitionTable {
    assert_eq!(lam.len(), g.node_count(), "one strength per node");
    let lam = lam.as_slice();
    EdgeTransitionTable::normalize_rows(&g.out_adjacency(), false, |_, j: NodeId, w| {
        w * lam[j as usize]
    })
}
