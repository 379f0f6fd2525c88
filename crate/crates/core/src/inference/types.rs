use serde::Serialize;

use super::ModelError;

/// Observed per-node traffic: arrivals `c_in[i]` and departures `c_out[i]`.
///
/// Counts are real-valued so that averaged or rescaled logs are accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMarginals {
    c_in: Vec<f64>,
    c_out: Vec<f64>,
}

impl TrafficMarginals {
    pub fn new(c_in: Vec<f64>, c_out: Vec<f64>) -> Result<Self, ModelError> {
        if c_in.len() != c_out.len() {
            return Err(ModelError::LengthMismatch {
                what: "c_out",
                expected: c_in.len(),
                found: c_out.len(),
            });
        }
        check_counts(&c_in)?;
        check_counts(&c_out)?;
        Ok(TrafficMarginals { c_in, c_out })
    }

    pub fn zeros(n: usize) -> Self {
        TrafficMarginals {
            c_in: vec![0.0; n],
            c_out: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.c_in.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_in.is_empty()
    }

    pub fn c_in(&self) -> &[f64] {
        &self.c_in
    }

    pub fn c_out(&self) -> &[f64] {
        &self.c_out
    }

    pub fn total_in(&self) -> f64 {
        self.c_in.iter().sum()
    }

    pub fn total_out(&self) -> f64 {
        self.c_out.iter().sum()
    }

    /// True when every count is a whole number small enough for exact
    /// integer arithmetic.
    pub fn is_integral(&self) -> bool {
        self.c_in
            .iter()
            .chain(&self.c_out)
            .all(|&c| c.fract() == 0.0 && c < 2f64.powi(53))
    }
}

fn check_counts(c: &[f64]) -> Result<(), ModelError> {
    match c.iter().position(|&v| !(v >= 0.0 && v.is_finite())) {
        Some(node) => Err(ModelError::InvalidTraffic {
            node,
            value: c[node],
        }),
        None => Ok(()),
    }
}

/// Marginals where one side may be missing.
#[derive(Debug, Clone, Default)]
pub struct PartialMarginals {
    pub c_in: Option<Vec<f64>>,
    pub c_out: Option<Vec<f64>>,
}

/// Fills in the missing side of the marginals assuming conserved flow
/// (`c_in[i] == c_out[i]`).
///
/// Refuses to run when both sides are present, so that real data is never
/// silently overwritten, and when both are missing.
pub fn conserve_flow(partial: PartialMarginals) -> Result<TrafficMarginals, ModelError> {
    match (partial.c_in, partial.c_out) {
        (Some(c_in), None) => TrafficMarginals::new(c_in.clone(), c_in),
        (None, Some(c_out)) => TrafficMarginals::new(c_out.clone(), c_out),
        (Some(_), Some(_)) => Err(ModelError::ConserveFlow(
            "both c_in and c_out are present; nothing to fill in",
        )),
        (None, None) => Err(ModelError::ConserveFlow("both c_in and c_out are missing")),
    }
}

/// Gamma(alpha, beta) prior on every strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorConfig {
    alpha: f64,
    beta: f64,
}

impl PriorConfig {
    /// `alpha` must be strictly greater than 1 (the prior needs a nonzero
    /// mode) and `beta` strictly positive.
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(ModelError::InvalidPrior(format!(
                "alpha must be > 1, got {alpha}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ModelError::InvalidPrior(format!(
                "beta must be > 0, got {beta}"
            )));
        }
        Ok(PriorConfig { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Mode of the prior, `(alpha - 1) / beta`.
    pub fn mode(&self) -> f64 {
        (self.alpha - 1.0) / self.beta
    }
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            alpha: 2.0,
            beta: 1.0,
        }
    }
}

/// Positive, finite strength per node.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthVector(Vec<f64>);

impl StrengthVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(node) = values.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(ModelError::InvalidStrength {
                node,
                value: values[node],
            });
        }
        Ok(StrengthVector(values))
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        assert!(value > 0.0 && value.is_finite());
        StrengthVector(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, s: f64) -> StrengthVector {
        assert!(s > 0.0 && s.is_finite());
        StrengthVector(self.0.iter().map(|v| v * s).collect())
    }

    /// Rescaled so that the first entry equals 1.
    pub fn normalized_to_first(&self) -> StrengthVector {
        match self.0.first() {
            Some(&first) => self.scaled(1.0 / first),
            None => self.clone(),
        }
    }
}

impl std::ops::Index<usize> for StrengthVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
