//! Experiment configuration (JSON).
//!
//! ```json
//! {
//!   "N": 100, "K": 25,
//!   "schemes": ["nercc", "nercc-ag", "bacc"],
//!   "model": {"builtin": {"kind": "rbf-mixture", "d": 8, "m": 4, "centers": 6, "sigma": 1.5}},
//!   "dataset": {"synthetic": {"distribution": "normal", "d": 8}},
//!   "stragglers": {"counts": [10, 40, 70]},
//!   "lambda_enc": 1e-4, "lambda_dec": 1e-2,
//!   "trials": 20, "seed": 7, "out_dir": "out"
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nercc_core::{Activation, Scheme, StragglerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    pub model: ModelSpec,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub stragglers: StragglerSweep,
    /// Smoothing pair used by `nercc` in `run` and `sweep-stragglers`.
    #[serde(default)]
    pub lambda_enc: f64,
    #[serde(default)]
    pub lambda_dec: f64,
    #[serde(default = "default_lambda_grid")]
    pub lambda_enc_grid: Vec<f64>,
    #[serde(default = "default_lambda_grid")]
    pub lambda_dec_grid: Vec<f64>,
    /// Which axis `sweep-lambda` varies; the other stays at `fixed`.
    #[serde(default)]
    pub sweep: LambdaSweep,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Write measured wall-clock times into `runtime_ms`; off by default so
    /// that reruns are byte-identical.
    #[serde(default)]
    pub record_runtime: bool,
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn one() -> usize {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// `{0} ∪ {10^e : e = -6..=2}`.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend((-6..=2).map(|e| 10f64.powi(e)));
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Builtin(BuiltinModel),
    /// Path to a JSON model manifest, relative to the config file.
    Manifest(PathBuf),
}

/// Randomly initialised model; parameters are drawn from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuiltinModel {
    Identity {
        d: usize,
    },
    Linear {
        d: usize,
        m: usize,
        #[serde(default = "unit")]
        scale: f64,
    },
    AffineSoftmax {
        d: usize,
        m: usize,
        #[serde(default = "unit")]
        scale: f64,
    },
    RbfMixture {
        d: usize,
        m: usize,
        #[serde(default = "default_centers")]
        centers: usize,
        #[serde(default = "unit")]
        sigma: f64,
    },
    Mlp {
        d: usize,
        hidden: Vec<usize>,
        m: usize,
        #[serde(default)]
        activation: Activation,
    },
}

fn unit() -> f64 {
    1.0
}

fn default_centers() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    /// CSV (one point per row, no header) or NTF1 rank-2 tensor. Trial `t`
    /// uses rows `tK .. tK+K`, wrapping around.
    File {
        path: PathBuf,
        /// One integer class label per line, aligned with the data rows.
        #[serde(default)]
        labels: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub distribution: Distribution,
    pub d: usize,
    /// Added to the master seed; lets two configs share models but not data.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// i.i.d. standard normal rows.
    Normal,
    /// `x_k = g(alpha_k)` for a random smooth curve `g`.
    SmoothCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum StragglerSweep {
    Counts(Vec<usize>),
    Delay {
        base_delay: f64,
        mean_extra: f64,
        deadlines: Vec<f64>,
    },
}

impl Default for StragglerSweep {
    fn default() -> Self {
        StragglerSweep::Counts(vec![0])
    }
}

/// One straggler setting and its numeric label for the `setting` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub value: f64,
    pub straggler: StragglerConfig,
}

impl StragglerSweep {
    pub fn settings(&self) -> Vec<Setting> {
        match self {
            StragglerSweep::Counts(counts) => counts
                .iter()
                .map(|&c| Setting {
                    value: c as f64,
                    straggler: StragglerConfig::FixedCount { stragglers: c },
                })
                .collect(),
            StragglerSweep::Delay {
                base_delay,
                mean_extra,
                deadlines,
            } => deadlines
                .iter()
                .map(|&deadline| Setting {
                    value: deadline,
                    straggler: StragglerConfig::DelayDeadline {
                        base_delay: *base_delay,
                        mean_extra: *mean_extra,
                        deadline,
                    },
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaAxis {
    Enc,
    #[default]
    Dec,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSweep {
    #[serde(default)]
    pub axis: LambdaAxis,
    #[serde(default)]
    pub fixed: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config; relative model and dataset paths are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ModelSpec::Manifest(p) = &mut self.model {
            fix(p);
        }
        if let DatasetSpec::File { path, labels } = &mut self.dataset {
            fix(path);
            if let Some(l) = labels {
                fix(l);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ExperimentError::ConfigInvalid(msg));
        if self.n < 2 {
            return bad(format!("N = {} must be >= 2", self.n));
        }
        if self.k < 3 {
            return bad(format!("K = {} must be >= 3", self.k));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.schemes.is_empty() {
            return bad("scheme list is empty".into());
        }
        for (name, grid) in [
            ("lambda_enc_grid", &self.lambda_enc_grid),
            ("lambda_dec_grid", &self.lambda_dec_grid),
        ] {
            if grid.is_empty() {
                return bad(format!("{name} is empty"));
            }
            if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return bad(format!("{name} must hold finite non-negative values"));
            }
            if !grid.contains(&0.0) {
                return bad(format!("{name} must include 0"));
            }
        }
        for (name, l) in [
            ("lambda_enc", self.lambda_enc),
            ("lambda_dec", self.lambda_dec),
            ("sweep.fixed", self.sweep.fixed),
        ] {
            if !(l.is_finite() && l >= 0.0) {
                return bad(format!("{name} = {l} must be finite and >= 0"));
            }
        }
        let settings = self.stragglers.settings();
        if settings.is_empty() {
            return bad("straggler sweep is empty".into());
        }
        for s in &settings {
            s.straggler
                .validate(self.n)
                .map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
        }
        if let ModelSpec::Builtin(b) = &self.model {
            let d = b.input_dim();
            if let DatasetSpec::Synthetic(s) = &self.dataset {
                if s.d != d {
                    return bad(format!("dataset d = {} but model expects {d}", s.d));
                }
            }
            if d == 0 || b.output_dim() == 0 {
                return bad("model dimensions must be positive".into());
            }
        }
        Ok(())
    }
}

impl BuiltinModel {
    pub fn input_dim(&self) -> usize {
        match *self {
            BuiltinModel::Identity { d }
            | BuiltinModel::Linear { d, .. }
            | BuiltinModel::AffineSoftmax { d, .. }
            | BuiltinModel::RbfMixture { d, .. }
            | BuiltinModel::Mlp { d, .. } => d,
        }
    }

    pub fn output_dim(&self) -> usize {
        match *self {
            BuiltinModel::Identity { d } => d,
            BuiltinModel::Linear { m, .. }
            | BuiltinModel::AffineSoftmax { m, .. }
            | BuiltinModel::RbfMixture { m, .. }
            | BuiltinModel::Mlp { m, .. } => m,
        }
    }
}
