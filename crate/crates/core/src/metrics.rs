//! Accuracy metrics and loss-decomposition diagnostics.

use std::fmt;

use ndarray::{ArrayView1, ArrayView2};
use thiserror::Error;

use crate::codec::Scheme;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("{0} labels for {1} rows")]
    LabelCount(usize, usize),
    #[error("argmax agreement needs at least 2 output columns, got {0}")]
    TooFewClasses(usize),
    #[error("base predictor has zero labelled accuracy")]
    ZeroBaseAccuracy,
    #[error("need at least {needed} rows, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn same_shape(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(MetricsError::ShapeMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// `(1/K) sum_k ||y_k - yhat_k||^2`.
pub fn mse(y: ArrayView2<'_, f64>, yhat: ArrayView2<'_, f64>) -> Result<f64> {
    same_shape(y, yhat)?;
    if y.nrows() == 0 {
        return Ok(0.0);
    }
    let sse: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sse / y.nrows() as f64)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelAcc {
    /// Fraction of rows whose argmax matches the exact model's argmax.
    pub agreement: f64,
    /// `acc(estimate) / acc(base)` against labels, when labels were given.
    pub ratio: Option<f64>,
}

pub fn rel_acc(y_base: ArrayView2<'_, f64>, y_hat: ArrayView2<'_, f64>, labels: Option<&[usize]>) -> Result<RelAcc> {
    same_shape(y_base, y_hat)?;
    if y_base.ncols() < 2 {
        return Err(MetricsError::TooFewClasses(y_base.ncols()));
    }
    let k = y_base.nrows();
    let base_pred: Vec<usize> = y_base.rows().into_iter().map(argmax).collect();
    let hat_pred: Vec<usize> = y_hat.rows().into_iter().map(argmax).collect();
    let agree = base_pred.iter().zip(&hat_pred).filter(|(a, b)| a == b).count();
    let agreement = if k == 0 { 1.0 } else { agree as f64 / k as f64 };
    let ratio = match labels {
        None => None,
        Some(labels) => {
            if labels.len() != k {
                return Err(MetricsError::LabelCount(labels.len(), k));
            }
            let base_ok = base_pred.iter().zip(labels).filter(|(p, l)| p == l).count();
            if base_ok == 0 {
                return Err(MetricsError::ZeroBaseAccuracy);
            }
            let hat_ok = hat_pred.iter().zip(labels).filter(|(p, l)| p == l).count();
            Some(hat_ok as f64 / base_ok as f64)
        }
    };
    Ok(RelAcc { agreement, ratio })
}

/// End-to-end loss and its triangle-inequality bound, all in unsquared
/// Euclidean norm so that `l2_loss <= term1 + term2` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// `sum_k ||u_dec(alpha_k) - f(x_k)||`
    pub l2_loss: f64,
    /// `sum_k ||u_dec(alpha_k) - f(u_enc(alpha_k))||`, the decoder's generalisation error.
    pub term1: f64,
    /// `sum_k ||f(u_enc(alpha_k)) - f(x_k)||`, driven by the encoder's training error.
    pub term2: f64,
}

impl Decomposition {
    pub fn bound(&self) -> f64 {
        self.term1 + self.term2
    }
}

fn row_dist_sum(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    a.rows()
        .into_iter()
        .zip(b.rows())
        .map(|(r, s)| {
            r.iter()
                .zip(s.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

pub fn decomposition(
    u_dec_at_alpha: ArrayView2<'_, f64>,
    f_of_enc_at_alpha: ArrayView2<'_, f64>,
    f_at_x: ArrayView2<'_, f64>,
) -> Result<Decomposition> {
    same_shape(u_dec_at_alpha, f_of_enc_at_alpha)?;
    same_shape(u_dec_at_alpha, f_at_x)?;
    Ok(Decomposition {
        l2_loss: row_dist_sum(u_dec_at_alpha, f_at_x),
        term1: row_dist_sum(u_dec_at_alpha, f_of_enc_at_alpha),
        term2: row_dist_sum(f_of_enc_at_alpha, f_at_x),
    })
}

/// First-order bound on the squared encoder-induced error:
/// `||grad f||_inf^2 * sum_k ||u_enc(alpha_k) - x_k||^2`.
pub fn taylor_proxy_bound(enc_train_sse: f64, grad_infnorm: f64) -> f64 {
    grad_infnorm * grad_infnorm * enc_train_sse
}

/// Mean squared second difference of consecutive coded rows,
/// `(1/(N-2)) sum_n ||x_{n+1} - 2 x_n + x_{n-1}||^2`.
pub fn batch_roughness(coded: ArrayView2<'_, f64>) -> Result<f64> {
    let n = coded.nrows();
    if n < 3 {
        return Err(MetricsError::TooFewPoints { needed: 3, got: n });
    }
    let mut total = 0.0;
    for i in 1..n - 1 {
        let (prev, cur, next) = (coded.row(i - 1), coded.row(i), coded.row(i + 1));
        total += prev
            .iter()
            .zip(cur.iter())
            .zip(next.iter())
            .map(|((p, c), x)| {
                let d = x - 2.0 * c + p;
                d * d
            })
            .sum::<f64>();
    }
    Ok(total / (n - 2) as f64)
}

/// Median of a slice; the mean of the two central values for even lengths.
/// NaNs sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Trial index of a record, or the per-group median summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialLabel {
    Index(usize),
    Median,
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialLabel::Index(i) => write!(f, "{i}"),
            TrialLabel::Median => f.write_str("median"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Fewer survivors than the scheme's decoder accepts; the decoder-side
    /// metrics are NaN.
    DecodingInfeasible,
    /// Summary over `feasible` of `total` trials.
    Summary {
        feasible: usize,
        total: usize,
    },
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowStatus::Ok => f.write_str("ok"),
            RowStatus::DecodingInfeasible => f.write_str("DecodingInfeasible"),
            RowStatus::Summary { feasible, total } => write!(f, "median-of-{feasible}/{total}"),
        }
    }
}

/// One experiment record. Column order of the CSV follows [`MetricsRow::COLUMNS`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub trial: TrialLabel,
    pub scheme: Scheme,
    pub n: usize,
    pub k: usize,
    /// Number of survivors; a median for summary rows.
    pub s_size: f64,
    pub lambda_enc: f64,
    pub lambda_dec: f64,
    pub mse: f64,
    /// Labelled accuracy ratio when labels exist, otherwise `agreement`.
    pub rel_acc: f64,
    pub agreement: f64,
    pub term1: f64,
    pub term2: f64,
    pub l2_loss: f64,
    pub enc_train_sse: f64,
    pub coded_roughness: f64,
    pub grad_infnorm: f64,
    pub runtime_ms: f64,
    /// Straggler count, or deadline in delay mode.
    pub setting: f64,
    pub status: RowStatus,
}

impl MetricsRow {
    pub const COLUMNS: [&'static str; 19] = [
        "trial",
        "scheme",
        "N",
        "K",
        "S_size",
        "lambda_enc",
        "lambda_dec",
        "mse",
        "rel_acc",
        "agreement",
        "term1",
        "term2",
        "l2_loss",
        "enc_train_sse",
        "coded_roughness",
        "grad_infnorm",
        "runtime_ms",
        "setting",
        "status",
    ];

    /// Median of every numeric column over the feasible rows of `group`;
    /// identifying columns come from the first row.
    pub fn summarize(group: &[MetricsRow]) -> Option<MetricsRow> {
        let first = group.first()?;
        let ok: Vec<&MetricsRow> = group.iter().filter(|r| r.status == RowStatus::Ok).collect();
        let med = |get: fn(&MetricsRow) -> f64| -> f64 {
            let v: Vec<f64> = ok.iter().map(|r| get(r)).collect();
            median(&v).unwrap_or(f64::NAN)
        };
        Some(MetricsRow {
            trial: TrialLabel::Median,
            s_size: med(|r| r.s_size),
            mse: med(|r| r.mse),
            rel_acc: med(|r| r.rel_acc),
            agreement: med(|r| r.agreement),
            term1: med(|r| r.term1),
            term2: med(|r| r.term2),
            l2_loss: med(|r| r.l2_loss),
            enc_train_sse: med(|r| r.enc_train_sse),
            coded_roughness: med(|r| r.coded_roughness),
            grad_infnorm: med(|r| r.grad_infnorm),
            runtime_ms: med(|r| r.runtime_ms),
            status: RowStatus::Summary {
                feasible: ok.len(),
                total: group.len(),
            },
            ..first.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn mse_cases() {
        let y = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(mse(y.view(), y.view()).unwrap(), 0.0);
        assert_eq!(mse(array![[1.0, 0.0]].view(), array![[0.0, 0.0]].view()).unwrap(), 1.0);
        let a = array![[3.0, 4.0], [1.0, 1.0]];
        let b = array![[0.0, 0.0], [1.0, 1.0]];
        assert_eq!(mse(a.view(), b.view()).unwrap(), 12.5);
        assert!(mse(a.view(), array![[1.0]].view()).is_err());
    }

    #[test]
    fn agreement_cases() {
        let y = array![[0.1, 0.9], [0.8, 0.2], [0.5, 0.6]];
        assert_eq!(rel_acc(y.view(), y.view(), None).unwrap().agreement, 1.0);
        let flipped = array![[0.9, 0.1], [0.2, 0.8], [0.7, 0.3]];
        assert_eq!(rel_acc(y.view(), flipped.view(), None).unwrap().agreement, 0.0);
        assert!(matches!(
            rel_acc(array![[1.0]].view(), array![[1.0]].view(), None),
            Err(MetricsError::TooFewClasses(1))
        ));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(array![0.5, 0.5, 0.1].view()), 0);
        assert_eq!(argmax(array![0.1, 0.7, 0.7].view()), 1);
    }

    #[test]
    fn labelled_ratio() {
        // both predictors right on rows 0..3, wrong on row 3
        let base = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]];
        let hat = array![[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.7, 0.3]];
        let labels = [0, 1, 0, 1];
        let r = rel_acc(base.view(), hat.view(), Some(&labels)).unwrap();
        assert_eq!(r.ratio, Some(1.0));
        let wrong = [1, 0, 1, 1];
        assert_eq!(
            rel_acc(base.view(), hat.view(), Some(&wrong[..])),
            Err(MetricsError::ZeroBaseAccuracy)
        );
        assert!(matches!(
            rel_acc(base.view(), hat.view(), Some(&[0, 1][..])),
            Err(MetricsError::LabelCount(2, 4))
        ));
    }

    #[test]
    fn decomposition_cases() {
        let f = array![[1.0, 2.0], [0.0, -1.0]];
        let d = decomposition(f.view(), f.view(), f.view()).unwrap();
        assert_eq!((d.l2_loss, d.term1, d.term2), (0.0, 0.0, 0.0));
        let dec = array![[4.0, 6.0], [0.0, -1.0]];
        let d = decomposition(dec.view(), f.view(), f.view()).unwrap();
        assert_eq!(d.term2, 0.0);
        assert_eq!(d.l2_loss, d.term1);
        assert_eq!(d.term1, 5.0);
    }

    #[test]
    fn decomposition_triangle_on_fixed_matrices() {
        let a = array![[0.3, -1.2], [2.0, 0.5], [-0.7, 0.1], [1.1, 1.1]];
        let b = array![[1.0, 0.0], [-0.4, 0.9], [0.2, -0.3], [0.0, 2.0]];
        let c = array![[-0.5, 0.6], [1.5, -1.0], [0.9, 0.9], [0.3, -0.2]];
        let d = decomposition(a.view(), b.view(), c.view()).unwrap();
        // hand-expanded sums of row distances
        let dist = |x: &Array2<f64>, y: &Array2<f64>| -> f64 {
            (0..4)
                .map(|k| ((x[[k, 0]] - y[[k, 0]]).powi(2) + (x[[k, 1]] - y[[k, 1]]).powi(2)).sqrt())
                .sum()
        };
        assert_eq!(d.l2_loss, dist(&a, &c));
        assert_eq!(d.term1, dist(&a, &b));
        assert_eq!(d.term2, dist(&b, &c));
        assert!(d.l2_loss <= d.bound() + 1e-9);
    }

    #[test]
    fn taylor_proxy() {
        assert_eq!(taylor_proxy_bound(0.0, 5.0), 0.0);
        assert_eq!(taylor_proxy_bound(3.0, 2.0), 12.0);
    }

    #[test]
    fn roughness_cases() {
        assert_eq!(batch_roughness(Array2::from_elem((5, 2), 3.0).view()).unwrap(), 0.0);
        let lin = Array2::from_shape_fn((6, 2), |(n, j)| n as f64 * (j as f64 + 1.0) - 2.0);
        assert_eq!(batch_roughness(lin.view()).unwrap(), 0.0);
        assert_eq!(batch_roughness(array![[0.0], [1.0], [0.0]].view()).unwrap(), 4.0);
        assert!(batch_roughness(array![[0.0], [1.0]].view()).is_err());
    }

    fn row(trial: usize, mse: f64, status: RowStatus) -> MetricsRow {
        MetricsRow {
            trial: TrialLabel::Index(trial),
            scheme: Scheme::Nercc,
            n: 10,
            k: 4,
            s_size: 8.0,
            lambda_enc: 0.0,
            lambda_dec: 0.0,
            mse,
            rel_acc: 1.0,
            agreement: 1.0,
            term1: 0.0,
            term2: 0.0,
            l2_loss: 0.0,
            enc_train_sse: 0.0,
            coded_roughness: 0.0,
            grad_infnorm: 1.0,
            runtime_ms: 0.0,
            setting: 2.0,
            status,
        }
    }

    #[test]
    fn summary_skips_infeasible_rows() {
        let rows = [
            row(0, 1.0, RowStatus::Ok),
            row(1, f64::NAN, RowStatus::DecodingInfeasible),
            row(2, 3.0, RowStatus::Ok),
        ];
        let s = MetricsRow::summarize(&rows).unwrap();
        assert_eq!(s.trial, TrialLabel::Median);
        assert_eq!(s.mse, 2.0);
        assert_eq!(s.setting, 2.0);
        assert_eq!(s.status.to_string(), "median-of-2/3");
        assert!(MetricsRow::summarize(&[]).is_none());
        let none_ok = MetricsRow::summarize(&rows[1..2]).unwrap();
        assert!(none_ok.mse.is_nan());
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
