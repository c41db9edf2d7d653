//! Encoder and decoder for the three coding schemes.
//!
//! Encoding fits a regression `u_enc` through `(alpha_k, x_k)` and samples it
//! at every worker node `beta_n`. Decoding fits `u_dec` through the surviving
//! `(beta_j, f(x~_j))` and samples it back at the `alpha_k`. Both regressions
//! are linear in the values, so every coded row is a linear combination of
//! all data rows.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::berrut::{BerrutError, BerrutInterpolant};
use crate::nodes::NodeSet;
use crate::spline::{self, KnotVector, SmoothingParam, SplineError, SplineFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-finite data")]
    NonFiniteData,
    #[error("decoding infeasible: {survivors} survivors, scheme needs {needed}")]
    DecodingInfeasible { survivors: usize, needed: usize },
    #[error("survivor index {index} out of range for {workers} workers")]
    IndexOutOfRange { index: usize, workers: usize },
    #[error("survivor indices must be strictly increasing")]
    UnsortedSurvivors,
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Berrut(#[from] BerrutError),
}

pub type Result<T> = std::result::Result<T, CodecError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Smoothing splines with tuned `(lambda_enc, lambda_dec)`.
    Nercc,
    /// Smoothing splines with both parameters forced to zero.
    NerccAg,
    /// Berrut rational interpolation on both sides.
    Bacc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Nercc, Scheme::NerccAg, Scheme::Bacc];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Nercc => "nercc",
            Scheme::NerccAg => "nercc-ag",
            Scheme::Bacc => "bacc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nercc" => Ok(Scheme::Nercc),
            "nercc-ag" => Ok(Scheme::NerccAg),
            "bacc" => Ok(Scheme::Bacc),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

/// A scheme together with its smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    scheme: Scheme,
    lambda_enc: SmoothingParam,
    lambda_dec: SmoothingParam,
}

impl SchemeConfig {
    /// `nercc-ag` ignores the supplied parameters and uses zero for both;
    /// `bacc` carries zeros since it has no smoothing.
    pub fn new(scheme: Scheme, lambda_enc: SmoothingParam, lambda_dec: SmoothingParam) -> Self {
        match scheme {
            Scheme::Nercc => Self {
                scheme,
                lambda_enc,
                lambda_dec,
            },
            Scheme::NerccAg | Scheme::Bacc => Self {
                scheme,
                lambda_enc: SmoothingParam::ZERO,
                lambda_dec: SmoothingParam::ZERO,
            },
        }
    }

    pub fn nercc(lambda_enc: f64, lambda_dec: f64) -> std::result::Result<Self, SplineError> {
        Ok(Self::new(
            Scheme::Nercc,
            SmoothingParam::new(lambda_enc)?,
            SmoothingParam::new(lambda_dec)?,
        ))
    }

    pub fn agnostic() -> Self {
        Self::new(Scheme::NerccAg, SmoothingParam::ZERO, SmoothingParam::ZERO)
    }

    pub fn bacc() -> Self {
        Self::new(Scheme::Bacc, SmoothingParam::ZERO, SmoothingParam::ZERO)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn lambda_enc(&self) -> SmoothingParam {
        self.lambda_enc
    }

    pub fn lambda_dec(&self) -> SmoothingParam {
        self.lambda_dec
    }

    fn uses_spline(&self) -> bool {
        self.scheme != Scheme::Bacc
    }
}

/// Smallest survivor count the decoder accepts.
pub fn min_survivors(cfg: &SchemeConfig) -> usize {
    if cfg.uses_spline() {
        3
    } else {
        1
    }
}

/// `K x d` batch of input points, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(Array2<f64>);

impl DataMatrix {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() < 3 {
            return Err(CodecError::TooFewPoints {
                needed: 3,
                got: rows.nrows(),
            });
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(CodecError::NonFiniteData);
        }
        Ok(Self(rows))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Coded rows `x~_n = u_enc(beta_n)` sent to the workers.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedBatch {
    pub betas: NodeSet,
    pub coded: Array2<f64>,
}

/// Outputs returned by the non-straggling workers.
///
/// `indices` are zero-based worker positions, strictly increasing;
/// `outputs` row `r` belongs to worker `indices[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivorResults {
    pub indices: Vec<usize>,
    pub outputs: Array2<f64>,
}

impl SurvivorResults {
    pub fn new(indices: Vec<usize>, outputs: Array2<f64>) -> Result<Self> {
        if indices.len() != outputs.nrows() {
            return Err(CodecError::ShapeMismatch(format!(
                "{} survivor indices but {} output rows",
                indices.len(),
                outputs.nrows()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CodecError::UnsortedSurvivors);
        }
        Ok(Self { indices, outputs })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// A fitted regression through `(node, value)` pairs.
#[derive(Debug, Clone)]
pub enum Regression {
    Spline(SplineFit),
    Berrut(BerrutInterpolant),
}

impl Regression {
    fn fit(cfg: &SchemeConfig, nodes: &[f64], values: ArrayView2<'_, f64>, lambda: SmoothingParam) -> Result<Self> {
        if cfg.uses_spline() {
            let knots = KnotVector::new(nodes.to_vec())?;
            Ok(Regression::Spline(spline::fit(&knots, values, lambda)?))
        } else {
            Ok(Regression::Berrut(BerrutInterpolant::new(nodes.to_vec(), values)?))
        }
    }

    pub fn sample(&self, points: &[f64]) -> Result<Array2<f64>> {
        match self {
            Regression::Spline(f) => Ok(f.evaluate(points)?),
            Regression::Berrut(b) => Ok(b.eval(points)?),
        }
    }

    pub fn as_spline(&self) -> Option<&SplineFit> {
        match self {
            Regression::Spline(f) => Some(f),
            Regression::Berrut(_) => None,
        }
    }
}

/// Fits the encoding regression through `(alpha_k, x_k)`.
pub fn fit_encoder(x: &DataMatrix, alphas: &NodeSet, cfg: &SchemeConfig) -> Result<Regression> {
    if alphas.len() != x.rows() {
        return Err(CodecError::ShapeMismatch(format!(
            "{} alpha nodes for {} data rows",
            alphas.len(),
            x.rows()
        )));
    }
    Regression::fit(cfg, alphas.values(), x.view(), cfg.lambda_enc())
}

pub fn encode(x: &DataMatrix, alphas: &NodeSet, betas: &NodeSet, cfg: &SchemeConfig) -> Result<CodedBatch> {
    if betas.len() < 2 {
        return Err(CodecError::TooFewPoints {
            needed: 2,
            got: betas.len(),
        });
    }
    let enc = fit_encoder(x, alphas, cfg)?;
    Ok(CodedBatch {
        betas: betas.clone(),
        coded: enc.sample(betas.values())?,
    })
}

/// Recovers approximations of `f(x_k)` at every `alpha_k` (`K x m`).
pub fn decode(results: &SurvivorResults, betas: &NodeSet, alphas: &NodeSet, cfg: &SchemeConfig) -> Result<Array2<f64>> {
    let needed = min_survivors(cfg);
    if results.len() < needed {
        return Err(CodecError::DecodingInfeasible {
            survivors: results.len(),
            needed,
        });
    }
    if let Some(&index) = results.indices.iter().find(|&&i| i >= betas.len()) {
        return Err(CodecError::IndexOutOfRange {
            index,
            workers: betas.len(),
        });
    }
    if results.indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CodecError::UnsortedSurvivors);
    }
    if results.outputs.nrows() != results.len() {
        return Err(CodecError::ShapeMismatch(format!(
            "{} survivor indices but {} output rows",
            results.len(),
            results.outputs.nrows()
        )));
    }
    if results.outputs.iter().any(|v| !v.is_finite()) {
        return Err(CodecError::NonFiniteData);
    }
    let nodes = betas.select(&results.indices);
    let dec = Regression::fit(cfg, &nodes, results.outputs.view(), cfg.lambda_dec())?;
    dec.sample(alphas.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodes::{alpha_points, beta_points};
    use ndarray::{array, Array1};

    fn cfgs() -> Vec<SchemeConfig> {
        vec![
            SchemeConfig::nercc(0.0, 0.0).unwrap(),
            SchemeConfig::nercc(0.5, 2.0).unwrap(),
            SchemeConfig::agnostic(),
            SchemeConfig::bacc(),
        ]
    }

    #[test]
    fn min_survivor_floor() {
        assert_eq!(min_survivors(&SchemeConfig::nercc(1.0, 1.0).unwrap()), 3);
        assert_eq!(min_survivors(&SchemeConfig::agnostic()), 3);
        assert_eq!(min_survivors(&SchemeConfig::bacc()), 1);
    }

    #[test]
    fn agnostic_forces_zero_lambdas() {
        let one = SmoothingParam::new(1.0).unwrap();
        let cfg = SchemeConfig::new(Scheme::NerccAg, one, one);
        assert_eq!(cfg.lambda_enc().value(), 0.0);
        assert_eq!(cfg.lambda_dec().value(), 0.0);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("lcc".parse::<Scheme>().is_err());
    }

    #[test]
    fn constant_rows_encode_to_constants() {
        let c = array![1.5, -2.0, 0.25];
        let x = DataMatrix::new(Array2::from_shape_fn((6, 3), |(_, j)| c[j])).unwrap();
        let alphas = alpha_points(6).unwrap();
        let betas = beta_points(11).unwrap();
        for cfg in cfgs() {
            let coded = encode(&x, &alphas, &betas, &cfg).unwrap();
            for row in coded.coded.rows() {
                for (a, b) in row.iter().zip(c.iter()) {
                    assert!((a - b).abs() < 1e-12, "{cfg:?}");
                }
            }
        }
    }

    #[test]
    fn linear_in_node_data_is_reproduced_by_splines() {
        let v = array![2.0, -1.0];
        let alphas = alpha_points(7).unwrap();
        let betas = beta_points(13).unwrap();
        let x = DataMatrix::new(Array2::from_shape_fn((7, 2), |(k, j)| alphas.values()[k] * v[j])).unwrap();
        for lam in [0.0, 1.0, 1e8] {
            let cfg = SchemeConfig::nercc(lam, lam).unwrap();
            let coded = encode(&x, &alphas, &betas, &cfg).unwrap();
            for (n, row) in coded.coded.rows().into_iter().enumerate() {
                let want: Array1<f64> = &v * betas.values()[n];
                for (a, b) in row.iter().zip(want.iter()) {
                    assert!((a - b).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn constant_outputs_decode_to_constants() {
        let alphas = alpha_points(5).unwrap();
        let betas = beta_points(9).unwrap();
        let idx = vec![0, 2, 3, 7, 8];
        let out = Array2::from_elem((5, 2), -0.75);
        let res = SurvivorResults::new(idx, out).unwrap();
        for cfg in cfgs() {
            let dec = decode(&res, &betas, &alphas, &cfg).unwrap();
            assert!(dec.iter().all(|v| (v + 0.75).abs() < 1e-12));
        }
    }

    #[test]
    fn decode_preconditions() {
        let alphas = alpha_points(5).unwrap();
        let betas = beta_points(9).unwrap();
        let two = SurvivorResults::new(vec![1, 4], Array2::zeros((2, 1))).unwrap();
        assert_eq!(
            decode(&two, &betas, &alphas, &SchemeConfig::nercc(0.0, 0.0).unwrap()),
            Err(CodecError::DecodingInfeasible {
                survivors: 2,
                needed: 3
            })
        );
        assert!(decode(&two, &betas, &alphas, &SchemeConfig::bacc()).is_ok());
        let bad = SurvivorResults::new(vec![1, 4, 9], Array2::zeros((3, 1))).unwrap();
        assert_eq!(
            decode(&bad, &betas, &alphas, &SchemeConfig::agnostic()),
            Err(CodecError::IndexOutOfRange { index: 9, workers: 9 })
        );
        assert_eq!(
            SurvivorResults::new(vec![3, 1], Array2::zeros((2, 1))),
            Err(CodecError::UnsortedSurvivors)
        );
        let empty = SurvivorResults::new(vec![], Array2::zeros((0, 1))).unwrap();
        assert!(matches!(
            decode(&empty, &betas, &alphas, &SchemeConfig::bacc()),
            Err(CodecError::DecodingInfeasible {
                survivors: 0,
                needed: 1
            })
        ));
    }

    #[test]
    fn encode_shape_checks() {
        let x = DataMatrix::new(Array2::zeros((4, 2))).unwrap();
        let alphas = alpha_points(5).unwrap();
        let betas = beta_points(9).unwrap();
        assert!(matches!(
            encode(&x, &alphas, &betas, &SchemeConfig::agnostic()),
            Err(CodecError::ShapeMismatch(_))
        ));
        assert!(matches!(
            DataMatrix::new(Array2::zeros((2, 2))),
            Err(CodecError::TooFewPoints { needed: 3, got: 2 })
        ));
        assert_eq!(
            DataMatrix::new(array![[0.0], [f64::NAN], [1.0]]),
            Err(CodecError::NonFiniteData)
        );
    }
}
