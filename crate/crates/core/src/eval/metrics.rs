//! Per-row error metrics between a reference and an estimated distribution.
//!
//! A row is a pair of slices: target ids and their probabilities. Both rows
//! of a comparison must list the same targets in the same order.

use std::cmp::Ordering;

use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("rows have different supports")]
    SupportMismatch,
    #[error("row has {targets} targets but {probs} probabilities")]
    RaggedRow { targets: usize, probs: usize },
}

pub type Row<'a> = (&'a [NodeId], &'a [f64]);

fn check(truth: Row, est: Row) -> Result<(), MetricError> {
    for (t, p) in [truth, est] {
        if t.len() != p.len() {
            return Err(MetricError::RaggedRow {
                targets: t.len(),
                probs: p.len(),
            });
        }
    }
    if truth.0 != est.0 {
        return Err(MetricError::SupportMismatch);
    }
    Ok(())
}

/// `sum_j p_j * ln(p_j / q_j)` with `0 * ln 0 = 0`. Infinite when some
/// `q_j = 0 < p_j`.
pub fn kl_divergence(truth: Row, est: Row) -> Result<f64, MetricError> {
    check(truth, est)?;
    let mut kl = 0.0;
    for (&p, &q) in truth.1.iter().zip(est.1) {
        if p > 0.0 {
            kl += p * (p / q).ln();
        }
    }
    // Rounding can leave a tiny negative sum for equal rows.
    Ok(kl.max(0.0))
}

/// One-based positions of the targets when sorted by decreasing
/// probability, ties broken by ascending id.
pub fn rank_positions(row: Row) -> Vec<usize> {
    let (ids, probs) = row;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| match probs[b].total_cmp(&probs[a]) {
        Ordering::Equal => ids[a].cmp(&ids[b]),
        o => o,
    });
    let mut pos = vec![0; ids.len()];
    for (rank, &k) in order.iter().enumerate() {
        pos[k] = rank + 1;
    }
    pos
}

/// `sum_j |rank_truth(j) - rank_est(j)| / k^2` for a row of `k` targets.
/// Always in `[0, 1/2]`; zero for an empty row.
pub fn rank_displacement(truth: Row, est: Row) -> Result<f64, MetricError> {
    check(truth, est)?;
    let k = truth.0.len();
    if k == 0 {
        return Ok(0.0);
    }
    let a = rank_positions(truth);
    let b = rank_positions(est);
    let total: usize = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y)).sum();
    Ok(total as f64 / (k * k) as f64)
}
