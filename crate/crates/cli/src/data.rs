//! Models and input batches named by an [`ExperimentConfig`].

use std::fs;
use std::path::Path;

use ndarray::{Array2, Ix2};
use nercc_core::models::ntf;
use nercc_core::sim::splitmix64;
use nercc_core::{load_model, ComputeModel, DataMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal, Uniform};

use crate::config::{BuiltinModel, DatasetSpec, Distribution, ModelSpec};
use crate::error::{ExperimentError, Result};

const MODEL_STREAM: u64 = 0x4d4f_4445_4c00_0001;
const DATA_STREAM: u64 = 0x4441_5441_0000_0002;

pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<ComputeModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ MODEL_STREAM));
    let model = match spec {
        ModelSpec::Manifest(path) => load_model(path)?,
        ModelSpec::Builtin(b) => match *b {
            BuiltinModel::Identity { d } => ComputeModel::identity(d),
            BuiltinModel::Linear { d, m, scale } => ComputeModel::random_linear(d, m, scale, &mut rng),
            BuiltinModel::AffineSoftmax { d, m, scale } => ComputeModel::random_affine_softmax(d, m, scale, &mut rng),
            BuiltinModel::RbfMixture { d, m, centers, sigma } => {
                ComputeModel::random_rbf(d, m, centers, sigma, &mut rng)?
            }
            BuiltinModel::Mlp {
                d,
                ref hidden,
                m,
                activation,
            } => ComputeModel::random_mlp(d, hidden, m, activation, &mut rng)?,
        },
    };
    Ok(model)
}

/// Source of per-trial input batches.
#[derive(Debug, Clone)]
pub enum Dataset {
    Synthetic {
        distribution: Distribution,
        d: usize,
        seed: u64,
    },
    Rows {
        rows: Array2<f64>,
        labels: Option<Vec<usize>>,
    },
}

/// One trial's batch and optional labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: DataMatrix,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn from_spec(spec: &DatasetSpec, seed: u64) -> Result<Self> {
        match spec {
            DatasetSpec::Synthetic(s) => Ok(Dataset::Synthetic {
                distribution: s.distribution,
                d: s.d,
                seed: seed.wrapping_add(s.seed),
            }),
            DatasetSpec::File { path, labels } => {
                let rows = read_rows(path)?;
                let labels = match labels {
                    Some(p) => {
                        let l = read_labels(p)?;
                        if l.len() != rows.nrows() {
                            return Err(ExperimentError::Dataset(format!(
                                "{} labels for {} data rows",
                                l.len(),
                                rows.nrows()
                            )));
                        }
                        Some(l)
                    }
                    None => None,
                };
                Ok(Dataset::Rows { rows, labels })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Dataset::Synthetic { d, .. } => *d,
            Dataset::Rows { rows, .. } => rows.ncols(),
        }
    }

    /// Batch of `alphas.len()` rows for trial `trial` under stream `stream`.
    pub fn batch(&self, alphas: &[f64], trial: usize, stream: u64) -> Result<Batch> {
        let k = alphas.len();
        let (x, labels) = match self {
            Dataset::Synthetic { distribution, d, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
                    splitmix64(seed ^ DATA_STREAM ^ stream).wrapping_add(trial as u64),
                ));
                let x = match distribution {
                    Distribution::Normal => Array2::from_shape_fn((k, *d), |_| StandardNormal.sample(&mut rng)),
                    Distribution::SmoothCurve => smooth_curve(alphas, *d, &mut rng),
                };
                (x, None)
            }
            Dataset::Rows { rows, labels } => {
                let start = trial * k;
                let pick = |i: usize| (start + i) % rows.nrows();
                let x = Array2::from_shape_fn((k, rows.ncols()), |(i, j)| rows[[pick(i), j]]);
                (x, labels.as_ref().map(|l| (0..k).map(|i| l[pick(i)]).collect()))
            }
        };
        Ok(Batch {
            x: DataMatrix::new(x)?,
            labels,
        })
    }
}

/// `x_kj = sum_{r=1..3} a_jr / r * cos(r pi t / 2 + phi_jr)` at `t = alpha_k`,
/// with `a ~ N(0,1)` and `phi ~ U(0, 2 pi)`.
fn smooth_curve(alphas: &[f64], d: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    const HARMONICS: usize = 3;
    let phase = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
    let amp = Array2::from_shape_fn((d, HARMONICS), |_| -> f64 { StandardNormal.sample(rng) });
    let phi = Array2::from_shape_fn((d, HARMONICS), |_| phase.sample(rng));
    Array2::from_shape_fn((alphas.len(), d), |(k, j)| {
        (0..HARMONICS)
            .map(|r| {
                let freq = (r + 1) as f64;
                amp[[j, r]] / freq * (freq * std::f64::consts::FRAC_PI_2 * alphas[k] + phi[[j, r]]).cos()
            })
            .sum()
    })
}

/// CSV without header, or an NTF1 rank-2 tensor when the extension is `.ntf`.
pub fn read_rows(path: &Path) -> Result<Array2<f64>> {
    if path.extension().is_some_and(|e| e == "ntf") {
        let t = ntf::load(path).map_err(|e| ExperimentError::Dataset(format!("{}: {e}", path.display())))?;
        return t
            .into_dimensionality::<Ix2>()
            .map_err(|_| ExperimentError::Dataset(format!("{}: expected a rank-2 tensor", path.display())));
    }
    let file = fs::File::open(path).map_err(|e| ExperimentError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    let mut width = None;
    let mut n = 0;
    for record in reader.records() {
        let record = record?;
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(ExperimentError::Dataset(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                n + 1,
                record.len(),
                width.unwrap_or(0)
            )));
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                ExperimentError::Dataset(format!("{}: row {}: bad number {field:?}", path.display(), n + 1))
            })?;
            values.push(v);
        }
        n += 1;
    }
    let width = width.ok_or_else(|| ExperimentError::Dataset(format!("{}: no rows", path.display())))?;
    Array2::from_shape_vec((n, width), values).map_err(|e| ExperimentError::Dataset(e.to_string()))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse()
                .map_err(|_| ExperimentError::Dataset(format!("{}: bad label {l:?}", path.display())))
        })
        .collect()
}
