//! JSON model manifests referencing NTF1 tensors.
//!
//! ```json
//! {
//!   "kind": "mlp", "d": 8, "m": 4,
//!   "layers": [
//!     {"weight": "l0_w.ntf", "bias": "l0_b.ntf", "activation": "tanh"},
//!     {"weight": "l1_w.ntf", "bias": "l1_b.ntf", "activation": "identity"}
//!   ]
//! }
//! ```
//!
//! `linear` and `affine-softmax` take exactly one layer (activation ignored);
//! `rbf-mixture` uses the `rbf` block instead of `layers`. Tensor paths are
//! resolved relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayD, Ix1, Ix2};
use serde::{Deserialize, Serialize};

use super::{ntf, Activation, Affine, ComputeModel, MlpLayer, ModelError, ModelKind, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub weight: String,
    pub bias: String,
    #[serde(default)]
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbfSpec {
    pub centers: String,
    pub amplitudes: String,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub kind: ModelKind,
    pub d: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<LayerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rbf: Option<RbfSpec>,
}

fn load_tensor(base: &Path, rel: &str) -> Result<ArrayD<f64>> {
    let path = base.join(rel);
    if !path.is_file() {
        return Err(ModelError::MissingTensorFile(path.display().to_string()));
    }
    Ok(ntf::load(&path)?)
}

fn as_matrix(t: ArrayD<f64>, name: &str, rows: Option<usize>, cols: Option<usize>) -> Result<Array2<f64>> {
    let shape = t.shape().to_vec();
    let m = t
        .into_dimensionality::<Ix2>()
        .map_err(|_| ModelError::ShapeMismatch(format!("{name} must be rank 2, got shape {shape:?}")))?;
    if rows.is_some_and(|r| r != m.nrows()) || cols.is_some_and(|c| c != m.ncols()) {
        return Err(ModelError::ShapeMismatch(format!(
            "{name} has shape {shape:?}, expected [{}, {}]",
            rows.map_or("*".into(), |r| r.to_string()),
            cols.map_or("*".into(), |c| c.to_string()),
        )));
    }
    Ok(m)
}

fn as_vector(t: ArrayD<f64>, name: &str, len: usize) -> Result<Array1<f64>> {
    let shape = t.shape().to_vec();
    let v = t
        .into_dimensionality::<Ix1>()
        .map_err(|_| ModelError::ShapeMismatch(format!("{name} must be rank 1, got shape {shape:?}")))?;
    if v.len() != len {
        return Err(ModelError::ShapeMismatch(format!(
            "{name} has length {}, expected {len}",
            v.len()
        )));
    }
    Ok(v)
}

fn load_affine(base: &Path, spec: &LayerSpec, d_in: usize, d_out: Option<usize>) -> Result<Affine> {
    let w = as_matrix(load_tensor(base, &spec.weight)?, &spec.weight, d_out, Some(d_in))?;
    let b = as_vector(load_tensor(base, &spec.bias)?, &spec.bias, w.nrows())?;
    Affine::new(w, b)
}

impl ModelManifest {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ModelError::ParseError(e.to_string()))
    }

    /// Loads and validates the referenced tensors.
    pub fn build(&self, base: &Path) -> Result<ComputeModel> {
        let model = match self.kind {
            ModelKind::Identity => {
                if self.d != self.m {
                    return Err(ModelError::ShapeMismatch(format!(
                        "identity needs d == m, got {} and {}",
                        self.d, self.m
                    )));
                }
                ComputeModel::identity(self.d)
            }
            ModelKind::Linear | ModelKind::AffineSoftmax => {
                let [layer] = self.layers.as_slice() else {
                    return Err(ModelError::ParseError(format!(
                        "{:?} manifest needs exactly one layer, got {}",
                        self.kind,
                        self.layers.len()
                    )));
                };
                let a = load_affine(base, layer, self.d, Some(self.m))?;
                if self.kind == ModelKind::Linear {
                    ComputeModel::Linear(a)
                } else {
                    ComputeModel::AffineSoftmax(a)
                }
            }
            ModelKind::RbfMixture => {
                let spec = self
                    .rbf
                    .as_ref()
                    .ok_or_else(|| ModelError::ParseError("rbf-mixture manifest needs an `rbf` block".into()))?;
                let centers = as_matrix(load_tensor(base, &spec.centers)?, &spec.centers, None, Some(self.d))?;
                let amplitudes = as_matrix(
                    load_tensor(base, &spec.amplitudes)?,
                    &spec.amplitudes,
                    Some(centers.nrows()),
                    Some(self.m),
                )?;
                ComputeModel::rbf_mixture(centers, amplitudes, spec.sigma)?
            }
            ModelKind::Mlp => {
                if self.layers.is_empty() {
                    return Err(ModelError::ParseError("mlp manifest needs layers".into()));
                }
                let mut layers = Vec::with_capacity(self.layers.len());
                let mut width = self.d;
                for (i, spec) in self.layers.iter().enumerate() {
                    let out = (i + 1 == self.layers.len()).then_some(self.m);
                    let affine = load_affine(base, spec, width, out)?;
                    width = affine.output_dim();
                    layers.push(MlpLayer {
                        affine,
                        activation: spec.activation,
                    });
                }
                ComputeModel::mlp(layers)?
            }
        };
        Ok(model)
    }
}

/// Reads a manifest and every tensor it references.
pub fn load_model(path: &Path) -> Result<ComputeModel> {
    let text = fs::read_to_string(path)?;
    let manifest = ModelManifest::parse(&text)?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    manifest.build(&base)
}

/// Writes `model` as `<dir>/<stem>.json` plus its tensor files; returns the
/// manifest path.
pub fn save_model(model: &ComputeModel, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let save = |name: String, t: ArrayD<f64>| -> Result<String> {
        ntf::save(&dir.join(&name), &t)?;
        Ok(name)
    };
    let affine_spec = |tag: &str, a: &Affine, act: Activation| -> Result<LayerSpec> {
        Ok(LayerSpec {
            weight: save(format!("{stem}_{tag}_w.ntf"), a.weight.clone().into_dyn())?,
            bias: save(format!("{stem}_{tag}_b.ntf"), a.bias.clone().into_dyn())?,
            activation: act,
        })
    };
    let mut manifest = ModelManifest {
        kind: model.kind(),
        d: model.input_dim(),
        m: model.output_dim(),
        layers: Vec::new(),
        rbf: None,
    };
    match model {
        ComputeModel::Identity { .. } => {}
        ComputeModel::Linear(a) | ComputeModel::AffineSoftmax(a) => {
            manifest.layers.push(affine_spec("l0", a, Activation::Identity)?);
        }
        ComputeModel::RbfMixture(r) => {
            manifest.rbf = Some(RbfSpec {
                centers: save(format!("{stem}_centers.ntf"), r.centers.clone().into_dyn())?,
                amplitudes: save(format!("{stem}_amplitudes.ntf"), r.amplitudes.clone().into_dyn())?,
                sigma: r.sigma,
            });
        }
        ComputeModel::Mlp(layers) => {
            for (i, l) in layers.iter().enumerate() {
                manifest
                    .layers
                    .push(affine_spec(&format!("l{i}"), &l.affine, l.activation)?);
            }
        }
    }
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| ModelError::ParseError(e.to_string()))?;
    fs::write(&path, text)?;
    Ok(path)
}
