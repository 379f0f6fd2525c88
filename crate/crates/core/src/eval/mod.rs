//! Baseline estimators and choice-weighted error reports.
//!
//! Every node with observed departures is scored against the reference
//! distribution `p*_ij ∝ c_ij`, and each node's error is weighted by its
//! departure count when summarizing.

mod baselines;
mod metrics;

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::graph::NodeId;
use crate::simulate::{aggregate_marginals, empirical_transitions, EdgeCounts};
use crate::transitions::EdgeTransitionTable;

pub use baselines::{
    baseline_pagerank, baseline_traffic, baseline_uniform, pagerank, PageRankOptions,
};
pub use metrics::{kl_divergence, rank_displacement, rank_positions, MetricError, Row};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("method {method} covers {found} nodes, counts cover {expected}")]
    NodeCount {
        method: String,
        expected: usize,
        found: usize,
    },
    #[error("method {method} has no row for node {node}, which has observed departures")]
    MissingRow { method: String, node: NodeId },
    #[error("method {method}, node {node}: observed transitions outside the estimated row")]
    SupportMismatch { method: String, node: NodeId },
}

/// Errors of one node under every method, in the report's method order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeEval {
    pub node: NodeId,
    pub out_degree: usize,
    /// Observed departures from the node.
    pub weight: f64,
    pub kl: Vec<f64>,
    pub rank_disp: Vec<f64>,
}

/// Weighted location statistics of one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSummary {
    pub nodes: usize,
    pub total_weight: f64,
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
}

impl WeightedSummary {
    /// `None` when no value carries positive weight.
    pub fn of(values: &[f64], weights: &[f64]) -> Option<WeightedSummary> {
        assert_eq!(values.len(), weights.len());
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&v, &w)| (v, w))
            .collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if pairs.is_empty() {
            return None;
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mean = pairs.iter().map(|(v, w)| v * w).sum::<f64>() / total;
        let q = |f: f64| weighted_quantile_sorted(&pairs, total, f);
        Some(WeightedSummary {
            nodes: pairs.len(),
            total_weight: total,
            mean,
            median: q(0.5),
            p5: q(0.05),
            p25: q(0.25),
            p75: q(0.75),
            p95: q(0.95),
        })
    }
}

/// Smallest value whose cumulative weight reaches `fraction` of the total.
/// Equivalent to repeating each value by its (integer) weight and taking
/// the `ceil(fraction * total)`-th smallest.
pub fn weighted_quantile(values: &[f64], weights: &[f64], fraction: f64) -> Option<f64> {
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = pairs.iter().map(|p| p.1).sum();
    Some(weighted_quantile_sorted(&pairs, total, fraction))
}

fn weighted_quantile_sorted(pairs: &[(f64, f64)], total: f64, fraction: f64) -> f64 {
    let target = fraction * total * (1.0 - 1e-12);
    let mut cum = 0.0;
    for &(v, w) in pairs {
        cum += w;
        if cum >= target {
            return v;
        }
    }
    pairs[pairs.len() - 1].0
}

/// Mean KL over nodes sharing an out-degree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeBucket {
    pub out_degree: usize,
    pub nodes: usize,
    pub weight: f64,
    pub weighted_mean_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub kl: Option<WeightedSummary>,
    /// Out-degree-1 nodes are left out: their displacement is always zero.
    pub rank_disp: Option<WeightedSummary>,
    pub kl_by_degree: Vec<DegreeBucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub kl_log_base: &'static str,
    pub rank_ties: &'static str,
    pub weighting: &'static str,
    pub rank_disp_excludes_out_degree_1: bool,
}

impl Default for ReportMetadata {
    fn default() -> Self {
        ReportMetadata {
            kl_log_base: "e",
            rank_ties: "ascending node id",
            weighting: "observed departures per node",
            rank_disp_excludes_out_degree_1: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub methods: Vec<String>,
    pub summary: Vec<MethodSummary>,
    #[serde(skip)]
    pub nodes: Vec<NodeEval>,
}

impl EvalReport {
    pub fn method_summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// Weighted mean KL of a method, if it scored any node.
    pub fn mean_kl(&self, method: &str) -> Option<f64> {
        self.method_summary(method)?.kl.as_ref().map(|s| s.mean)
    }

    /// Per-node table: `node out_degree weight` then `kl_<m>` and
    /// `rank_disp_<m>` for each method `m`. Tab separated with a header.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "node\tout_degree\tweight")?;
        for m in &self.methods {
            write!(out, "\tkl_{m}\trank_disp_{m}")?;
        }
        writeln!(out)?;
        for r in &self.nodes {
            write!(out, "{}\t{}\t{}", r.node, r.out_degree, r.weight)?;
            for (kl, rd) in r.kl.iter().zip(&r.rank_disp) {
                write!(out, "\t{kl:.12e}\t{rd:.12e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Summary document as pretty-printed JSON.
    pub fn write_json<W: Write>(&self, out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(std::io::Error::other)
    }
}

/// Scores each method against the reference transitions derived from
/// `truth`.
///
/// A node is evaluated when it has observed departures. Each estimate row
/// defines the support; reference transitions missing from `truth` count
/// as zero, while observed transitions missing from the estimate are an
/// error.
pub fn evaluate(
    truth: &EdgeCounts,
    estimates: &[(String, EdgeTransitionTable)],
) -> Result<EvalReport, EvalError> {
    let n = truth.node_count();
    for (m, table) in estimates {
        if table.node_count() != n {
            return Err(EvalError::NodeCount {
                method: m.clone(),
                expected: n,
                found: table.node_count(),
            });
        }
    }
    let reference = empirical_transitions(truth);
    let weight = aggregate_marginals(truth).c_out().to_vec();
    let mut nodes = Vec::new();
    let mut aligned = Vec::new();
    for (i, &w) in weight.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let (ref_t, ref_p) = reference.row(i);
        let mut record = NodeEval {
            node: i as NodeId,
            out_degree: 0,
            weight: w,
            kl: Vec::with_capacity(estimates.len()),
            rank_disp: Vec::with_capacity(estimates.len()),
        };
        for (m, table) in estimates {
            let (est_t, est_p) = table.row(i);
            if est_t.is_empty() {
                return Err(EvalError::MissingRow {
                    method: m.clone(),
                    node: i as NodeId,
                });
            }
            align(ref_t, ref_p, est_t, &mut aligned).map_err(|_| EvalError::SupportMismatch {
                method: m.clone(),
                node: i as NodeId,
            })?;
            let truth_row = (est_t, aligned.as_slice());
            record.out_degree = est_t.len();
            record
                .kl
                .push(kl_divergence(truth_row, (est_t, est_p)).expect("rows aligned"));
            record
                .rank_disp
                .push(rank_displacement(truth_row, (est_t, est_p)).expect("rows aligned"));
        }
        nodes.push(record);
    }

    let summary = estimates
        .iter()
        .enumerate()
        .map(|(k, (m, _))| summarize(m, k, &nodes))
        .collect();
    Ok(EvalReport {
        metadata: ReportMetadata::default(),
        methods: estimates.iter().map(|(m, _)| m.clone()).collect(),
        summary,
        nodes,
    })
}

/// Spreads a sorted reference row onto the sorted `support`, filling gaps
/// with zero. Fails if the reference has a target outside the support.
fn align(
    ref_t: &[NodeId],
    ref_p: &[f64],
    support: &[NodeId],
    out: &mut Vec<f64>,
) -> Result<(), ()> {
    out.clear();
    out.resize(support.len(), 0.0);
    let mut k = 0;
    for (&t, &p) in ref_t.iter().zip(ref_p) {
        while k < support.len() && support[k] < t {
            k += 1;
        }
        if k == support.len() || support[k] != t {
            if p > 0.0 {
                return Err(());
            }
            continue;
        }
        out[k] = p;
    }
    Ok(())
}

fn summarize(method: &str, k: usize, nodes: &[NodeEval]) -> MethodSummary {
    let weights: Vec<f64> = nodes.iter().map(|r| r.weight).collect();
    let kl: Vec<f64> = nodes.iter().map(|r| r.kl[k]).collect();
    let (rd, rd_w): (Vec<f64>, Vec<f64>) = nodes
        .iter()
        .filter(|r| r.out_degree > 1)
        .map(|r| (r.rank_disp[k], r.weight))
        .unzip();
    let mut buckets: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
    for r in nodes {
        let b = buckets.entry(r.out_degree).or_default();
        b.0 += 1;
        b.1 += r.weight;
        b.2 += r.weight * r.kl[k];
    }
    MethodSummary {
        method: method.to_string(),
        kl: WeightedSummary::of(&kl, &weights),
        rank_disp: WeightedSummary::of(&rd, &rd_w),
        kl_by_degree: buckets
            .into_iter()
            .map(|(d, (count, w, s))| DegreeBucket {
                out_degree: d,
                nodes: count,
                weight: w,
                weighted_mean_kl: s / w,
            })
            .collect(),
    }
}
