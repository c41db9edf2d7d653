//! Dense reference solver: `theta = (M^T M + lambda Omega)^{-1} M^T y`.
//!
//! The basis is `{1, t, eta_1, .., eta_{n-2}}` where `eta_j` is the natural
//! cubic spline that is 1 at interior knot `j` and 0 at every other knot.
//! It spans the same space as the full cardinal basis, but its first two
//! members have identically zero second derivative, so the penalty's null
//! space is exact in floating point instead of cancelling only to rounding
//! (which large `lambda` would amplify).
//!
//! Each spline member is built from its own piecewise-polynomial coefficients
//! by solving the full `4(n-1)` system of interpolation, C1/C2 continuity and
//! natural boundary conditions. `M_ij = eta_j(t_i)` is evaluated from those
//! polynomials and `Omega_ij = integral eta_i'' eta_j''` is integrated with
//! Simpson's rule per interval (exact: the integrand is quadratic there).
//! O(n^3); only meant for checking [`super::fit`].

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};

use super::{check_values, KnotVector, Result, SmoothingParam, SplineError, SplineFit};

/// Piecewise cubic `a + b s + c s^2 + d s^3` on each interval, `s = t - t_i`.
#[derive(Debug, Clone)]
struct PiecewiseCubic {
    coeffs: Vec<[f64; 4]>,
}

impl PiecewiseCubic {
    fn value(&self, knots: &[f64], x: f64) -> f64 {
        let (i, s) = locate(knots, x);
        let [a, b, c, d] = self.coeffs[i];
        a + s * (b + s * (c + s * d))
    }

    fn second_deriv(&self, knots: &[f64], x: f64) -> f64 {
        let (i, s) = locate(knots, x);
        let [_, _, c, d] = self.coeffs[i];
        2.0 * c + 6.0 * d * s
    }
}

fn locate(knots: &[f64], x: f64) -> (usize, f64) {
    let last = knots.len() - 2;
    let i = knots[..=last].iter().rposition(|&k| k <= x).unwrap_or(0);
    (i, x - knots[i])
}

/// Explicit basis of the natural cubic splines on a knot vector.
#[derive(Debug, Clone)]
pub struct NaturalSplineBasis {
    knots: Vec<f64>,
    funcs: Vec<PiecewiseCubic>,
}

impl NaturalSplineBasis {
    pub fn new(knots: &KnotVector) -> Result<Self> {
        let t = knots.as_slice().to_vec();
        let n = t.len();
        let segs = n - 1;
        let size = 4 * segs;
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();

        let mut a = DMatrix::<f64>::zeros(size, size);
        let mut row = 0;
        let col = |seg: usize, k: usize| 4 * seg + k;
        // values at both ends of each segment
        for s in 0..segs {
            a[(row, col(s, 0))] = 1.0;
            row += 1;
            let hs = h[s];
            a[(row, col(s, 0))] = 1.0;
            a[(row, col(s, 1))] = hs;
            a[(row, col(s, 2))] = hs * hs;
            a[(row, col(s, 3))] = hs * hs * hs;
            row += 1;
        }
        // first and second derivative continuity at interior knots
        for s in 0..segs - 1 {
            let hs = h[s];
            a[(row, col(s, 1))] = 1.0;
            a[(row, col(s, 2))] = 2.0 * hs;
            a[(row, col(s, 3))] = 3.0 * hs * hs;
            a[(row, col(s + 1, 1))] = -1.0;
            row += 1;
            a[(row, col(s, 2))] = 2.0;
            a[(row, col(s, 3))] = 6.0 * hs;
            a[(row, col(s + 1, 2))] = -2.0;
            row += 1;
        }
        // natural boundary
        a[(row, col(0, 2))] = 2.0;
        row += 1;
        a[(row, col(segs - 1, 2))] = 2.0;
        a[(row, col(segs - 1, 3))] = 6.0 * h[segs - 1];
        row += 1;
        debug_assert_eq!(row, size);

        let mut funcs = Vec::with_capacity(n);
        funcs.push(PiecewiseCubic {
            coeffs: vec![[1.0, 0.0, 0.0, 0.0]; segs],
        });
        funcs.push(PiecewiseCubic {
            coeffs: (0..segs).map(|s| [t[s], 1.0, 0.0, 0.0]).collect(),
        });

        let lu = a.lu();
        for j in 1..n - 1 {
            let mut rhs = DVector::<f64>::zeros(size);
            // segment j-1 ends at knot j, segment j starts there
            rhs[2 * (j - 1) + 1] = 1.0;
            rhs[2 * j] = 1.0;
            let sol = lu.solve(&rhs).ok_or(SplineError::SingularSystem)?;
            let coeffs = (0..segs)
                .map(|s| [sol[4 * s], sol[4 * s + 1], sol[4 * s + 2], sol[4 * s + 3]])
                .collect();
            funcs.push(PiecewiseCubic { coeffs });
        }
        Ok(Self { knots: t, funcs })
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    /// Basis member `j` at `x` (inside the knot span).
    pub fn eval(&self, j: usize, x: f64) -> f64 {
        self.funcs[j].value(&self.knots, x)
    }

    pub fn eval_second(&self, j: usize, x: f64) -> f64 {
        self.funcs[j].second_deriv(&self.knots, x)
    }

    /// `M_ij = eta_j(t_i)`.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.eval(j, self.knots[i]))
    }

    /// `Omega_ij = integral eta_i'' eta_j''` by per-interval Simpson quadrature.
    pub fn penalty_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut omega = DMatrix::<f64>::zeros(n, n);
        for s in 0..n - 1 {
            let lo = self.knots[s];
            let hi = self.knots[s + 1];
            let half = 0.5 * (hi - lo);
            let w = (hi - lo) / 6.0;
            // each member's own polynomial on this segment, at both ends and the middle
            let at = |j: usize, ds: f64| {
                let [_, _, c, d] = self.funcs[j].coeffs[s];
                2.0 * c + 6.0 * d * ds
            };
            for i in 0..n {
                let (ei0, eim, ei1) = (at(i, 0.0), at(i, half), at(i, hi - lo));
                for j in i..n {
                    let v = w * (ei0 * at(j, 0.0) + 4.0 * eim * at(j, half) + ei1 * at(j, hi - lo));
                    omega[(i, j)] += v;
                    if i != j {
                        omega[(j, i)] += v;
                    }
                }
            }
        }
        omega
    }
}

const REFINE_STEPS: usize = 3;

/// `b - A x`, each entry accumulated in double-double arithmetic.
fn residual(a: &DMatrix<f64>, x: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(b.nrows(), b.ncols(), |i, c| {
        let (mut hi, mut lo) = (b[(i, c)], 0.0);
        for k in 0..a.ncols() {
            let p = -a[(i, k)] * x[(k, c)];
            let p_err = (-a[(i, k)]).mul_add(x[(k, c)], -p);
            let (s, s_err) = two_sum(hi, p);
            hi = s;
            lo += s_err + p_err;
        }
        hi + lo
    })
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Coefficients of a penalised fit in a [`NaturalSplineBasis`].
#[derive(Debug, Clone)]
pub struct DenseOracleFit {
    knots: KnotVector,
    basis: NaturalSplineBasis,
    theta: DMatrix<f64>,
    lambda: SmoothingParam,
}

impl DenseOracleFit {
    pub fn new(knots: &KnotVector, values: ArrayView2<'_, f64>, lambda: SmoothingParam) -> Result<Self> {
        check_values(knots, values)?;
        let basis = NaturalSplineBasis::new(knots)?;
        let n = basis.len();
        let q = values.ncols();
        let m = basis.design_matrix();
        let omega = basis.penalty_matrix();
        let normal = m.transpose() * &m + omega * lambda.value();
        let y = DMatrix::from_fn(n, q, |i, c| values[[i, c]]);
        let rhs = m.transpose() * y;
        let lu = normal.clone().lu();
        if !lu.is_invertible() {
            return Err(SplineError::SingularSystem);
        }
        let mut theta = lu.solve(&rhs).ok_or(SplineError::SingularSystem)?;
        // the normal matrix is ill-conditioned for large lambda; one LU solve
        // alone loses ~cond * eps
        for _ in 0..REFINE_STEPS {
            let r = residual(&normal, &theta, &rhs);
            theta += lu.solve(&r).ok_or(SplineError::SingularSystem)?;
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(SplineError::SingularSystem);
        }
        Ok(Self {
            knots: knots.clone(),
            basis,
            theta,
            lambda,
        })
    }

    fn combine(&self, points: &[f64], member: impl Fn(usize, f64) -> f64) -> Array2<f64> {
        let q = self.theta.ncols();
        let mut out = Array2::zeros((points.len(), q));
        for (p, &x) in points.iter().enumerate() {
            for j in 0..self.basis.len() {
                let e = member(j, x);
                for c in 0..q {
                    out[[p, c]] += self.theta[(j, c)] * e;
                }
            }
        }
        out
    }

    /// `u(x)` from the basis polynomials, for points inside the knot span.
    pub fn values_at(&self, points: &[f64]) -> Array2<f64> {
        self.combine(points, |j, x| self.basis.eval(j, x))
    }

    /// `u''(x)` from the basis polynomials, for points inside the knot span.
    pub fn second_derivs_at(&self, points: &[f64]) -> Array2<f64> {
        self.combine(points, |j, x| self.basis.eval_second(j, x))
    }

    pub fn into_spline_fit(self) -> SplineFit {
        let t = self.knots.as_slice();
        let n = t.len();
        let fitted = self.values_at(t);
        let mut second = self.second_derivs_at(t);
        second.row_mut(0).fill(0.0);
        second.row_mut(n - 1).fill(0.0);
        SplineFit::from_parts(self.knots, fitted, second, self.lambda)
    }
}

/// Same contract as [`super::fit`], solved densely through an explicit basis.
pub fn fit_dense_oracle(knots: &KnotVector, values: ArrayView2<'_, f64>, lambda: SmoothingParam) -> Result<SplineFit> {
    Ok(DenseOracleFit::new(knots, values, lambda)?.into_spline_fit())
}

/// Dense fit evaluated at `points` inside the knot span.
pub fn dense_oracle_eval(
    knots: &KnotVector,
    values: ArrayView2<'_, f64>,
    lambda: SmoothingParam,
    points: &[f64],
) -> Result<Array2<f64>> {
    let t = knots.as_slice();
    if let Some(&p) = points.iter().find(|&&p| !(t[0]..=t[t.len() - 1]).contains(&p)) {
        return Err(SplineError::KnotOutOfRange(p));
    }
    Ok(DenseOracleFit::new(knots, values, lambda)?.values_at(points))
}
