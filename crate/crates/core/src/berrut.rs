//! Berrut's first-form barycentric rational interpolant.
//!
//! ```text
//!        sum_j (-1)^j / (x - t_j) * y_j
//! b(x) = -------------------------------
//!          sum_j (-1)^j / (x - t_j)
//! ```
//!
//! Signs alternate by rank among the nodes actually supplied, so a decoder
//! built on a survivor subset stays pole-free on the real line.

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

/// Queries closer than this to a node return the node value.
pub const NODE_SNAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BerrutError {
    #[error("interpolant needs at least one node")]
    Empty,
    #[error("nodes must be strictly increasing (violated at index {0})")]
    NonIncreasingNodes(usize),
    #[error("{nodes} nodes but {rows} value rows")]
    ShapeMismatch { nodes: usize, rows: usize },
    #[error("non-finite input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerrutInterpolant {
    nodes: Vec<f64>,
    values: Array2<f64>,
}

impl BerrutInterpolant {
    pub fn new(nodes: Vec<f64>, values: ArrayView2<'_, f64>) -> Result<Self, BerrutError> {
        if nodes.is_empty() {
            return Err(BerrutError::Empty);
        }
        if nodes.len() != values.nrows() {
            return Err(BerrutError::ShapeMismatch {
                nodes: nodes.len(),
                rows: values.nrows(),
            });
        }
        if nodes.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(BerrutError::NonFinite);
        }
        if let Some(i) = nodes.windows(2).position(|w| w[0] >= w[1]) {
            return Err(BerrutError::NonIncreasingNodes(i + 1));
        }
        Ok(Self {
            nodes,
            values: values.to_owned(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Evaluates at each query, returning a `p x q` matrix.
    pub fn eval(&self, queries: &[f64]) -> Result<Array2<f64>, BerrutError> {
        if queries.iter().any(|x| !x.is_finite()) {
            return Err(BerrutError::NonFinite);
        }
        let q = self.values.ncols();
        let mut out = Array2::zeros((queries.len(), q));
        let mut num = vec![0.0; q];
        for (p, &x) in queries.iter().enumerate() {
            if let Some(j) = self.snap(x) {
                out.row_mut(p).assign(&self.values.row(j));
                continue;
            }
            num.iter_mut().for_each(|v| *v = 0.0);
            let mut den = 0.0;
            for (j, &t) in self.nodes.iter().enumerate() {
                let w = if j % 2 == 0 { 1.0 } else { -1.0 } / (x - t);
                den += w;
                for (acc, &y) in num.iter_mut().zip(self.values.row(j)) {
                    *acc += w * y;
                }
            }
            for (c, acc) in num.iter().enumerate() {
                out[[p, c]] = acc / den;
            }
        }
        Ok(out)
    }

    fn snap(&self, x: f64) -> Option<usize> {
        let pos = self.nodes.partition_point(|&t| t < x);
        [pos.checked_sub(1), (pos < self.nodes.len()).then_some(pos)]
            .into_iter()
            .flatten()
            .find(|&j| (self.nodes[j] - x).abs() <= NODE_SNAP)
    }
}

/// Builds the interpolant and evaluates it in one step.
pub fn berrut_eval(nodes: &[f64], values: ArrayView2<'_, f64>, queries: &[f64]) -> Result<Array2<f64>, BerrutError> {
    BerrutInterpolant::new(nodes.to_vec(), values)?.eval(queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_nodes_midpoint_is_average() {
        let y = array![[3.0], [7.0]];
        let v = berrut_eval(&[-1.0, 1.0], y.view(), &[0.0]).unwrap();
        assert_eq!(v[[0, 0]], 5.0);
    }

    #[test]
    fn node_exactness() {
        let nodes = [-0.9, -0.3, 0.1, 0.8];
        let y = array![[1.0, 2.0], [-3.0, 0.5], [4.0, 4.0], [0.0, -1.0]];
        let v = berrut_eval(&nodes, y.view(), &nodes).unwrap();
        assert_eq!(v, y);
        let near = berrut_eval(&nodes, y.view(), &[0.1 + 5e-13]).unwrap();
        assert_eq!(near.row(0), y.row(2));
    }

    #[test]
    fn constants_reproduced() {
        let nodes = [-1.0, -0.2, 0.4, 0.5, 0.95];
        let y = Array2::from_elem((5, 3), 2.5);
        let v = berrut_eval(&nodes, y.view(), &[-0.99, 0.0, 0.45, 0.7, 1.0, 3.0]).unwrap();
        assert!(v.iter().all(|x| (x - 2.5).abs() < 1e-12));
    }

    #[test]
    fn single_node_is_constant() {
        let y = array![[4.0]];
        let v = berrut_eval(&[0.3], y.view(), &[-1.0, 0.3, 1.0]).unwrap();
        assert!(v.iter().all(|&x| x == 4.0));
    }

    #[test]
    fn validation() {
        let y = array![[1.0], [2.0]];
        assert_eq!(
            berrut_eval(&[], Array2::zeros((0, 1)).view(), &[0.0]),
            Err(BerrutError::Empty)
        );
        assert_eq!(
            berrut_eval(&[0.5, 0.1], y.view(), &[0.0]),
            Err(BerrutError::NonIncreasingNodes(1))
        );
        assert_eq!(
            berrut_eval(&[0.1], y.view(), &[0.0]),
            Err(BerrutError::ShapeMismatch { nodes: 1, rows: 2 })
        );
        assert_eq!(
            berrut_eval(&[0.1, 0.5], y.view(), &[f64::NAN]),
            Err(BerrutError::NonFinite)
        );
    }
}
