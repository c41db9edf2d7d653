//! Desk-scale compute functions `f: R^d -> R^m` run by the workers.
//!
//! Every model is applied row by row with plain loops, so a row's output
//! does not depend on how rows are batched or which thread evaluates it.

mod manifest;
pub mod ntf;

pub use manifest::{load_model, save_model, LayerSpec, ModelManifest, RbfSpec};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite result")]
    NonFiniteResult,
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("manifest parse error: {0}")]
    ParseError(String),
    #[error("missing tensor file {0}")]
    MissingTensorFile(String),
    #[error("tensor file: {0}")]
    Tensor(#[from] ntf::NtfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Identity,
    Linear,
    AffineSoftmax,
    RbfMixture,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    /// No nonlinearity; used for an mlp's output layer.
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

/// `y = W x + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "weight is {}x{} but bias has length {}",
                weight.nrows(),
                weight.ncols(),
                bias.len()
            )));
        }
        check_finite(weight.iter().chain(bias.iter()))?;
        Ok(Self { weight, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (w_row, &b) in self.weight.rows().into_iter().zip(self.bias.iter()) {
            let mut acc = b;
            for (w, xi) in w_row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    pub affine: Affine,
    pub activation: Activation,
}

/// Sum of isotropic Gaussian bumps: `f_i(x) = sum_c A[c,i] exp(-||x - mu_c||^2 / sigma^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfMixture {
    pub centers: Array2<f64>,
    pub amplitudes: Array2<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComputeModel {
    Identity { dim: usize },
    Linear(Affine),
    AffineSoftmax(Affine),
    RbfMixture(RbfMixture),
    Mlp(Vec<MlpLayer>),
}

fn check_finite<'a>(mut it: impl Iterator<Item = &'a f64>) -> Result<()> {
    if it.any(|v| !v.is_finite()) {
        Err(ModelError::ShapeMismatch("non-finite parameter".into()))
    } else {
        Ok(())
    }
}

impl ComputeModel {
    pub fn identity(dim: usize) -> Self {
        ComputeModel::Identity { dim }
    }

    pub fn rbf_mixture(centers: Array2<f64>, amplitudes: Array2<f64>, sigma: f64) -> Result<Self> {
        if centers.nrows() != amplitudes.nrows() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} centers but {} amplitude rows",
                centers.nrows(),
                amplitudes.nrows()
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ModelError::ShapeMismatch(format!(
                "rbf width must be positive, got {sigma}"
            )));
        }
        check_finite(centers.iter().chain(amplitudes.iter()))?;
        Ok(ComputeModel::RbfMixture(RbfMixture {
            centers,
            amplitudes,
            sigma,
        }))
    }

    pub fn mlp(layers: Vec<MlpLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(ModelError::ShapeMismatch("mlp needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].affine.output_dim() != pair[1].affine.input_dim() {
                return Err(ModelError::ShapeMismatch(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].affine.output_dim(),
                    pair[1].affine.input_dim()
                )));
            }
        }
        Ok(ComputeModel::Mlp(layers))
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ComputeModel::Identity { .. } => ModelKind::Identity,
            ComputeModel::Linear(_) => ModelKind::Linear,
            ComputeModel::AffineSoftmax(_) => ModelKind::AffineSoftmax,
            ComputeModel::RbfMixture(_) => ModelKind::RbfMixture,
            ComputeModel::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ComputeModel::Identity { dim } => *dim,
            ComputeModel::Linear(a) | ComputeModel::AffineSoftmax(a) => a.input_dim(),
            ComputeModel::RbfMixture(r) => r.centers.ncols(),
            ComputeModel::Mlp(layers) => layers[0].affine.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ComputeModel::Identity { dim } => *dim,
            ComputeModel::Linear(a) | ComputeModel::AffineSoftmax(a) => a.output_dim(),
            ComputeModel::RbfMixture(r) => r.amplitudes.ncols(),
            ComputeModel::Mlp(layers) => layers[layers.len() - 1].affine.output_dim(),
        }
    }

    /// Evaluates a single input row.
    pub fn apply_row(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(ModelError::ShapeMismatch(format!(
                "input has {} columns, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteInput);
        }
        let x: Vec<f64> = x.iter().copied().collect();
        let out = match self {
            ComputeModel::Identity { .. } => x,
            ComputeModel::Linear(a) => {
                let mut out = Vec::new();
                a.forward(&x, &mut out);
                out
            }
            ComputeModel::AffineSoftmax(a) => {
                let mut out = Vec::new();
                a.forward(&x, &mut out);
                softmax_in_place(&mut out);
                out
            }
            ComputeModel::RbfMixture(r) => {
                let inv = 1.0 / (r.sigma * r.sigma);
                let mut out = vec![0.0; r.amplitudes.ncols()];
                for (mu, amp) in r.centers.rows().into_iter().zip(r.amplitudes.rows()) {
                    let dist2: f64 = mu.iter().zip(&x).map(|(m, v)| (v - m) * (v - m)).sum();
                    let k = (-dist2 * inv).exp();
                    for (o, a) in out.iter_mut().zip(amp.iter()) {
                        *o += a * k;
                    }
                }
                out
            }
            ComputeModel::Mlp(layers) => {
                let mut cur = x;
                let mut next = Vec::new();
                for layer in layers {
                    layer.affine.forward(&cur, &mut next);
                    next.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
                    std::mem::swap(&mut cur, &mut next);
                }
                cur
            }
        };
        Ok(Array1::from(out))
    }

    /// Row-wise application to an `n x d` matrix.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(ModelError::ShapeMismatch(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let mut out = Array2::zeros((x.nrows(), self.output_dim()));
        for (row, mut dst) in x.rows().into_iter().zip(out.rows_mut()) {
            dst.assign(&self.apply_row(row)?);
        }
        Ok(out)
    }

    /// Random softmax classifier with `W_ij ~ N(0, scale^2 / d)` and `b_i ~ N(0, scale^2)`.
    pub fn random_affine_softmax<R: Rng + ?Sized>(d: usize, m: usize, scale: f64, rng: &mut R) -> Self {
        ComputeModel::AffineSoftmax(random_affine(d, m, scale, rng))
    }

    /// Random linear map, same parameter law as [`Self::random_affine_softmax`].
    pub fn random_linear<R: Rng + ?Sized>(d: usize, m: usize, scale: f64, rng: &mut R) -> Self {
        ComputeModel::Linear(random_affine(d, m, scale, rng))
    }

    /// `centers` Gaussian bumps with standard-normal centres and amplitudes.
    pub fn random_rbf<R: Rng + ?Sized>(d: usize, m: usize, centers: usize, sigma: f64, rng: &mut R) -> Result<Self> {
        let mu = Array2::from_shape_fn((centers, d), |_| StandardNormal.sample(rng));
        let amp = Array2::from_shape_fn((centers, m), |_| StandardNormal.sample(rng));
        Self::rbf_mixture(mu, amp, sigma)
    }

    /// Fully connected network `d -> hidden.. -> m`; hidden layers use
    /// `activation`, the output layer is linear.
    pub fn random_mlp<R: Rng + ?Sized>(
        d: usize,
        hidden: &[usize],
        m: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut widths = vec![d];
        widths.extend_from_slice(hidden);
        widths.push(m);
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| MlpLayer {
                affine: random_affine(w[0], w[1], 1.0, rng),
                activation: if i == last { Activation::Identity } else { activation },
            })
            .collect();
        Self::mlp(layers)
    }
}

fn random_affine<R: Rng + ?Sized>(d: usize, m: usize, scale: f64, rng: &mut R) -> Affine {
    let w_scale = scale / (d.max(1) as f64).sqrt();
    let weight = Array2::from_shape_fn((m, d), |_| {
        let z: f64 = StandardNormal.sample(rng);
        w_scale * z
    });
    let bias = Array1::from_shape_fn(m, |_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    });
    Affine { weight, bias }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Largest absolute partial derivative of `f` over the rows of `x`, by
/// central differences with step `h`.
pub fn estimate_grad_infnorm(model: &ComputeModel, x: ArrayView2<'_, f64>, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(ModelError::InvalidStep(h));
    }
    let mut best: f64 = 0.0;
    let mut probe = Array1::zeros(x.ncols());
    for row in x.rows() {
        for j in 0..x.ncols() {
            probe.assign(&row);
            probe[j] = row[j] + h;
            let up = model.apply_row(probe.view())?;
            probe[j] = row[j] - h;
            let down = model.apply_row(probe.view())?;
            for (u, d) in up.iter().zip(down.iter()) {
                let g = (u - d) / (2.0 * h);
                if !g.is_finite() {
                    return Err(ModelError::NonFiniteResult);
                }
                best = best.max(g.abs());
            }
        }
    }
    Ok(best)
}
