//! Vector-valued natural cubic smoothing splines.
//!
//! A fit minimises, independently for each output column,
//!
//! ```text
//! sum_i (y_i - u(t_i))^2 + lambda * integral u''(t)^2 dt
//! ```
//!
//! whose unique minimiser is the natural cubic spline with knots at `t`.
//! [`fit`] uses the banded Reinsch formulation: with `h_i = t_{i+1} - t_i`,
//! `Q` the `n x (n-2)` second-difference matrix and `R` the `(n-2) x (n-2)`
//! tridiagonal Gram matrix, the interior second derivatives solve
//!
//! ```text
//! (R + lambda Q^T Q) gamma = Q^T y        g = y - lambda Q gamma
//! ```
//!
//! `R + lambda Q^T Q` is symmetric positive definite and pentadiagonal, so one
//! LDL^T factorisation serves every output column.
//!
//! [`fit_dense_oracle`] solves the same problem through an explicit basis and
//! exists to cross-check [`fit`].

mod oracle;

pub use oracle::{dense_oracle_eval, fit_dense_oracle, DenseOracleFit, NaturalSplineBasis};

use ndarray::{Array2, ArrayView2, Axis};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("natural cubic smoothing spline needs at least 3 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knots must be strictly increasing (violated at index {0})")]
    NonIncreasingKnots(usize),
    #[error("knot {0} lies outside [-1, 1]")]
    KnotOutOfRange(f64),
    #[error("non-finite input value")]
    NonFiniteInput,
    #[error("non-finite query point")]
    NonFiniteQuery,
    #[error("smoothing parameter must be finite and non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("{knots} knots but {rows} value rows")]
    ShapeMismatch { knots: usize, rows: usize },
    #[error("normal matrix is numerically singular")]
    SingularSystem,
}

pub type Result<T> = std::result::Result<T, SplineError>;

/// Strictly increasing knots inside `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector(Vec<f64>);

impl KnotVector {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.len() < 3 {
            return Err(SplineError::TooFewKnots(t.len()));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(SplineError::NonFiniteInput);
        }
        if let Some(&bad) = t.iter().find(|v| v.abs() > 1.0) {
            return Err(SplineError::KnotOutOfRange(bad));
        }
        if let Some(i) = t.windows(2).position(|w| w[0] >= w[1]) {
            return Err(SplineError::NonIncreasingKnots(i + 1));
        }
        Ok(Self(t))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn spacings(&self) -> Vec<f64> {
        self.0.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Roughness penalty weight. Zero means exact interpolation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct SmoothingParam(f64);

impl SmoothingParam {
    pub const ZERO: SmoothingParam = SmoothingParam(0.0);

    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(SplineError::NegativeLambda(lambda));
        }
        Ok(Self(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A fitted natural cubic smoothing spline with `q` output dimensions.
///
/// Stored in value/second-derivative form: `fitted[i]` is `u(t_i)` and
/// `second_derivs[i]` is `u''(t_i)`; the first and last rows of
/// `second_derivs` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    knots: KnotVector,
    fitted: Array2<f64>,
    second_derivs: Array2<f64>,
    lambda: SmoothingParam,
}

impl SplineFit {
    pub(crate) fn from_parts(
        knots: KnotVector,
        fitted: Array2<f64>,
        second_derivs: Array2<f64>,
        lambda: SmoothingParam,
    ) -> Self {
        debug_assert_eq!(fitted.dim(), second_derivs.dim());
        Self {
            knots,
            fitted,
            second_derivs,
            lambda,
        }
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn fitted(&self) -> &Array2<f64> {
        &self.fitted
    }

    pub fn second_derivs(&self) -> &Array2<f64> {
        &self.second_derivs
    }

    pub fn lambda(&self) -> SmoothingParam {
        self.lambda
    }

    pub fn output_dim(&self) -> usize {
        self.fitted.ncols()
    }

    /// Sum of squared residuals `sum_i ||y_i - u(t_i)||^2` against `values`.
    pub fn training_sse(&self, values: ArrayView2<'_, f64>) -> f64 {
        self.fitted
            .iter()
            .zip(values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Evaluates the spline at `points`, returning a `p x q` matrix.
    pub fn evaluate(&self, points: &[f64]) -> Result<Array2<f64>> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(SplineError::NonFiniteQuery);
        }
        let t = self.knots.as_slice();
        let n = t.len();
        let q = self.output_dim();
        let mut out = Array2::zeros((points.len(), q));
        for (row, &x) in out.axis_iter_mut(Axis(0)).zip(points) {
            let mut row = row;
            if x < t[0] {
                // Linear continuation; u'' vanishes at the boundary.
                let h = t[1] - t[0];
                let dx = x - t[0];
                for c in 0..q {
                    let g0 = self.fitted[[0, c]];
                    let slope = (self.fitted[[1, c]] - g0) / h - h * self.second_derivs[[1, c]] / 6.0;
                    row[c] = g0 + slope * dx;
                }
            } else if x > t[n - 1] {
                let h = t[n - 1] - t[n - 2];
                let dx = x - t[n - 1];
                for c in 0..q {
                    let g1 = self.fitted[[n - 1, c]];
                    let slope = (g1 - self.fitted[[n - 2, c]]) / h + h * self.second_derivs[[n - 2, c]] / 6.0;
                    row[c] = g1 + slope * dx;
                }
            } else {
                let i = interval_index(t, x);
                let h = t[i + 1] - t[i];
                let a = x - t[i];
                let b = t[i + 1] - x;
                if a == 0.0 {
                    row.assign(&self.fitted.row(i));
                    continue;
                }
                if b == 0.0 {
                    row.assign(&self.fitted.row(i + 1));
                    continue;
                }
                let cubic = a * b / 6.0;
                let w_right = 1.0 + a / h;
                let w_left = 1.0 + b / h;
                for c in 0..q {
                    let lin = (a * self.fitted[[i + 1, c]] + b * self.fitted[[i, c]]) / h;
                    row[c] =
                        lin - cubic * (w_right * self.second_derivs[[i + 1, c]] + w_left * self.second_derivs[[i, c]]);
                }
            }
        }
        Ok(out)
    }

    /// `integral ||u''||^2` over the knot span, summed over output columns.
    ///
    /// `u''` is piecewise linear between knots, so each interval contributes
    /// `h/3 (g_i^2 + g_i g_{i+1} + g_{i+1}^2)` exactly.
    pub fn roughness(&self) -> f64 {
        let h = self.knots.spacings();
        let mut total = 0.0;
        for (i, &hi) in h.iter().enumerate() {
            for c in 0..self.output_dim() {
                let g0 = self.second_derivs[[i, c]];
                let g1 = self.second_derivs[[i + 1, c]];
                total += hi / 3.0 * (g0 * g0 + g0 * g1 + g1 * g1);
            }
        }
        total
    }
}

/// Index `i` with `t[i] <= x <= t[i+1]`, assuming `x` is inside the span.
fn interval_index(t: &[f64], x: f64) -> usize {
    let n = t.len();
    match t.binary_search_by(|v| v.partial_cmp(&x).expect("finite knots")) {
        Ok(i) => i.min(n - 2),
        Err(i) => (i - 1).min(n - 2),
    }
}

fn check_values(knots: &KnotVector, values: ArrayView2<'_, f64>) -> Result<()> {
    if values.nrows() != knots.len() {
        return Err(SplineError::ShapeMismatch {
            knots: knots.len(),
            rows: values.nrows(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SplineError::NonFiniteInput);
    }
    Ok(())
}

/// Second-difference operator `Q` for interior column `j`: the three nonzero
/// entries at rows `j, j+1, j+2`.
fn q_column(h: &[f64], j: usize) -> [f64; 3] {
    let a = 1.0 / h[j];
    let c = 1.0 / h[j + 1];
    [a, -a - c, c]
}

/// LDL^T factorisation of a symmetric pentadiagonal matrix.
struct PentaLdl {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl PentaLdl {
    /// `diag[j] = A[j][j]`, `off1[j] = A[j+1][j]`, `off2[j] = A[j+2][j]`.
    fn factor(diag: &[f64], off1: &[f64], off2: &[f64]) -> Self {
        let m = diag.len();
        let mut d = vec![0.0; m];
        let mut l1 = vec![0.0; m.saturating_sub(1)];
        let mut l2 = vec![0.0; m.saturating_sub(2)];
        for j in 0..m {
            let mut dj = diag[j];
            if j >= 1 {
                dj -= l1[j - 1] * l1[j - 1] * d[j - 1];
            }
            if j >= 2 {
                dj -= l2[j - 2] * l2[j - 2] * d[j - 2];
            }
            d[j] = dj;
            if j + 1 < m {
                let mut v = off1[j];
                if j >= 1 {
                    v -= l2[j - 1] * l1[j - 1] * d[j - 1];
                }
                l1[j] = v / dj;
            }
            if j + 2 < m {
                l2[j] = off2[j] / dj;
            }
        }
        Self { d, l1, l2 }
    }

    /// Solves in place for every column of `b` (`m x q`).
    fn solve_in_place(&self, b: &mut Array2<f64>) {
        let m = self.d.len();
        let q = b.ncols();
        for j in 1..m {
            for c in 0..q {
                let mut v = b[[j, c]] - self.l1[j - 1] * b[[j - 1, c]];
                if j >= 2 {
                    v -= self.l2[j - 2] * b[[j - 2, c]];
                }
                b[[j, c]] = v;
            }
        }
        for j in 0..m {
            let inv = 1.0 / self.d[j];
            for c in 0..q {
                b[[j, c]] *= inv;
            }
        }
        for j in (0..m).rev() {
            for c in 0..q {
                let mut v = b[[j, c]];
                if j + 1 < m {
                    v -= self.l1[j] * b[[j + 1, c]];
                }
                if j + 2 < m {
                    v -= self.l2[j] * b[[j + 2, c]];
                }
                b[[j, c]] = v;
            }
        }
    }
}

/// Fits a natural cubic smoothing spline to the rows of `values` (`n x q`)
/// at `knots`.
pub fn fit(knots: &KnotVector, values: ArrayView2<'_, f64>, lambda: SmoothingParam) -> Result<SplineFit> {
    check_values(knots, values)?;
    let t = knots.as_slice();
    let n = t.len();
    let m = n - 2;
    let q = values.ncols();
    let h = knots.spacings();
    let lam = lambda.value();

    let cols: Vec<[f64; 3]> = (0..m).map(|j| q_column(&h, j)).collect();

    let mut diag = vec![0.0; m];
    let mut off1 = vec![0.0; m.saturating_sub(1)];
    let mut off2 = vec![0.0; m.saturating_sub(2)];
    for j in 0..m {
        let [a, b, c] = cols[j];
        diag[j] = (h[j] + h[j + 1]) / 3.0 + lam * (a * a + b * b + c * c);
        if j + 1 < m {
            let [a1, b1, _] = cols[j + 1];
            off1[j] = h[j + 1] / 6.0 + lam * (b * a1 + c * b1);
        }
        if j + 2 < m {
            off2[j] = lam * c * cols[j + 2][0];
        }
    }
    let ldl = PentaLdl::factor(&diag, &off1, &off2);

    // Q^T y
    let mut gamma = Array2::zeros((m, q));
    for j in 0..m {
        let [a, b, c] = cols[j];
        for col in 0..q {
            gamma[[j, col]] = a * values[[j, col]] + b * values[[j + 1, col]] + c * values[[j + 2, col]];
        }
    }
    ldl.solve_in_place(&mut gamma);

    let mut fitted = values.to_owned();
    if lam > 0.0 {
        for j in 0..m {
            let [a, b, c] = cols[j];
            for col in 0..q {
                let g = lam * gamma[[j, col]];
                fitted[[j, col]] -= a * g;
                fitted[[j + 1, col]] -= b * g;
                fitted[[j + 2, col]] -= c * g;
            }
        }
    }

    let mut second_derivs = Array2::zeros((n, q));
    second_derivs.slice_mut(ndarray::s![1..n - 1, ..]).assign(&gamma);

    Ok(SplineFit::from_parts(knots.clone(), fitted, second_derivs, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn knots3() -> KnotVector {
        KnotVector::new(vec![-1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn knot_validation() {
        assert_eq!(KnotVector::new(vec![0.0, 1.0]), Err(SplineError::TooFewKnots(2)));
        assert_eq!(
            KnotVector::new(vec![-1.0, 0.0, 0.0]),
            Err(SplineError::NonIncreasingKnots(2))
        );
        assert_eq!(
            KnotVector::new(vec![-1.0, 0.5, 0.2]),
            Err(SplineError::NonIncreasingKnots(2))
        );
        assert_eq!(
            KnotVector::new(vec![-1.5, 0.0, 1.0]),
            Err(SplineError::KnotOutOfRange(-1.5))
        );
        assert_eq!(
            KnotVector::new(vec![-1.0, f64::NAN, 1.0]),
            Err(SplineError::NonFiniteInput)
        );
    }

    #[test]
    fn lambda_validation() {
        assert!(SmoothingParam::new(0.0).is_ok());
        assert_eq!(SmoothingParam::new(-1e-3), Err(SplineError::NegativeLambda(-1e-3)));
        assert!(SmoothingParam::new(f64::INFINITY).is_err());
        assert!(SmoothingParam::new(f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let y = array![[1.0], [2.0]];
        assert_eq!(
            fit(&knots3(), y.view(), SmoothingParam::ZERO),
            Err(SplineError::ShapeMismatch { knots: 3, rows: 2 })
        );
        let y = array![[1.0], [f64::INFINITY], [0.0]];
        assert_eq!(
            fit(&knots3(), y.view(), SmoothingParam::ZERO),
            Err(SplineError::NonFiniteInput)
        );
    }

    #[test]
    fn collinear_data_is_reproduced_for_any_lambda() {
        let y = array![[-1.0], [1.0], [3.0]];
        for lam in [0.0, 1.0, 1e6] {
            let f = fit(&knots3(), y.view(), SmoothingParam::new(lam).unwrap()).unwrap();
            for (a, b) in f.fitted().iter().zip(y.iter()) {
                assert!((a - b).abs() <= 1e-9, "lambda {lam}: {a} vs {b}");
            }
            assert!(f.second_derivs().iter().all(|g| g.abs() <= 1e-12));
            assert!(f.roughness().abs() <= 1e-18);
            let v = f.evaluate(&[0.5]).unwrap();
            assert!((v[[0, 0]] - 2.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn huge_lambda_tends_to_least_squares_line() {
        // LS line through (-1,1),(0,0),(1,1): slope 0, intercept 2/3.
        let y = array![[1.0], [0.0], [1.0]];
        let f = fit(&knots3(), y.view(), SmoothingParam::new(1e12).unwrap()).unwrap();
        let v = f.evaluate(&[-1.0, -0.3, 0.0, 0.7, 1.0]).unwrap();
        for x in v.iter() {
            assert!((x - 2.0 / 3.0).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn zero_lambda_interpolates() {
        let y = array![[1.0], [0.0], [1.0]];
        let f = fit(&knots3(), y.view(), SmoothingParam::ZERO).unwrap();
        assert_eq!(f.fitted(), &y);
        assert_eq!(f.second_derivs()[[0, 0]], 0.0);
        assert_eq!(f.second_derivs()[[2, 0]], 0.0);
        // Natural interpolant through three points: u''(0) = 3 with h = 1.
        assert!((f.second_derivs()[[1, 0]] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn evaluate_at_knots_returns_fitted_rows() {
        let knots = KnotVector::new(vec![-1.0, -0.2, 0.3, 1.0]).unwrap();
        let y = array![[1.0, 2.0], [0.5, -1.0], [2.0, 0.0], [-1.0, 4.0]];
        let f = fit(&knots, y.view(), SmoothingParam::new(0.3).unwrap()).unwrap();
        let v = f.evaluate(knots.as_slice()).unwrap();
        assert_eq!(&v, f.fitted());
    }

    #[test]
    fn extrapolation_is_linear_with_boundary_slope() {
        let y = array![[1.0], [0.0], [1.0]];
        let f = fit(&knots3(), y.view(), SmoothingParam::ZERO).unwrap();
        let inside = f.evaluate(&[-1.0 + 1e-7]).unwrap()[[0, 0]];
        let slope = (inside - 1.0) / 1e-7;
        let out = f.evaluate(&[-1.5, -2.0, 1.5, 2.0]).unwrap();
        assert!((out[[0, 0]] - (1.0 - 0.5 * slope)).abs() < 1e-5);
        assert!((out[[1, 0]] - (1.0 - slope)).abs() < 1e-5);
        // symmetric data, mirrored slope on the right
        assert!((out[[2, 0]] - out[[0, 0]]).abs() < 1e-12);
        assert!((out[[3, 0]] - out[[1, 0]]).abs() < 1e-12);
        assert_eq!(f.evaluate(&[f64::NAN]), Err(SplineError::NonFiniteQuery));
    }

    #[test]
    fn roughness_of_three_point_interpolant() {
        // u'' is the hat 0 -> 3 -> 0 over two unit intervals: 2 * 9/3 = 6.
        let y = array![[1.0], [0.0], [1.0]];
        let f = fit(&knots3(), y.view(), SmoothingParam::ZERO).unwrap();
        assert!((f.roughness() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn pentadiagonal_solver_matches_dense_product() {
        let diag = [4.0, 5.0, 6.0, 5.5, 4.5];
        let off1 = [1.0, -0.5, 0.7, 0.2];
        let off2 = [0.3, 0.1, -0.2];
        let ldl = PentaLdl::factor(&diag, &off1, &off2);
        let x = array![[1.0], [-2.0], [0.5], [3.0], [-1.0]];
        let mut a = Array2::<f64>::zeros((5, 5));
        for j in 0..5 {
            a[[j, j]] = diag[j];
        }
        for j in 0..4 {
            a[[j + 1, j]] = off1[j];
            a[[j, j + 1]] = off1[j];
        }
        for j in 0..3 {
            a[[j + 2, j]] = off2[j];
            a[[j, j + 2]] = off2[j];
        }
        let mut b = a.dot(&x);
        ldl.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(x.iter()) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
