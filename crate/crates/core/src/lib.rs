//! Network choice models: infer per-node strengths from marginal traffic
//! and turn them into edge transition probabilities.

pub mod diagnostics;
pub mod eval;
pub mod formats;
pub mod graph;
pub mod inference;
pub mod simulate;
pub mod transitions;
