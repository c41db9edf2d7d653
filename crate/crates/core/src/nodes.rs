//! Chebyshev node families used as encoder targets (first kind) and worker
//! evaluation points (second kind).

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NodeError {
    #[error("first-kind node count must be at least 1")]
    EmptyAlpha,
    #[error("second-kind node count must be at least 2, got {0}")]
    TooFewBeta(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    First,
    Second,
}

/// Sorted-ascending nodes in `[-1, 1]`. Node `i` pairs with data row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    values: Vec<f64>,
    kind: NodeKind,
}

impl NodeSet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nodes at the given (ascending) positions.
    pub fn select(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.values[i]).collect()
    }
}

/// `cos((2k-1) pi / 2K)`, `k = 1..K`, ascending.
pub fn alpha_points(k: usize) -> Result<NodeSet, NodeError> {
    if k == 0 {
        return Err(NodeError::EmptyAlpha);
    }
    let kf = k as f64;
    // k = K..1 walks the cosine from near -1 up to near 1
    let mut values: Vec<f64> = (1..=k)
        .rev()
        .map(|j| ((2 * j - 1) as f64 * PI / (2.0 * kf)).cos())
        .collect();
    symmetrize(&mut values);
    Ok(NodeSet {
        values,
        kind: NodeKind::First,
    })
}

/// `cos((n-1) pi / (N-1))`, `n = 1..N`, ascending; endpoints are exactly -1 and 1.
pub fn beta_points(n: usize) -> Result<NodeSet, NodeError> {
    if n < 2 {
        return Err(NodeError::TooFewBeta(n));
    }
    let denom = (n - 1) as f64;
    let mut values: Vec<f64> = (1..=n).rev().map(|j| ((j - 1) as f64 * PI / denom).cos()).collect();
    symmetrize(&mut values);
    values[0] = -1.0;
    values[n - 1] = 1.0;
    Ok(NodeSet {
        values,
        kind: NodeKind::Second,
    })
}

/// Forces exact mirror symmetry: `cos` rounding leaves the two halves a few
/// ulps apart, and the middle node of an odd set at ~6e-17 instead of 0.
fn symmetrize(values: &mut [f64]) {
    let n = values.len();
    for i in 0..n / 2 {
        let mag = 0.5 * (values[n - 1 - i] - values[i]);
        values[i] = -mag;
        values[n - 1 - i] = mag;
    }
    if n % 2 == 1 {
        values[n / 2] = 0.0;
    }
}
