//! Paired-trial experiment runs, sweeps and smoothing-parameter tuning.

use std::time::Instant;

use ndarray::Array2;
use nercc_core::metrics::{self, MetricsRow, RowStatus, TrialLabel};
use nercc_core::sim::{self, splitmix64};
use nercc_core::{
    alpha_points, beta_points, codec, estimate_grad_infnorm, CodecError, ComputeModel, NodeSet, Scheme, SchemeConfig,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, LambdaAxis, Setting};
use crate::data::{build_model, Batch, Dataset};
use crate::error::{ExperimentError, Result};

/// Slack on `l2_loss <= term1 + term2` before a run is aborted.
pub const TRIANGLE_SLACK: f64 = 1e-9;
/// Central-difference step for `grad_infnorm`.
pub const GRAD_STEP: f64 = 1e-5;
/// Two median MSEs tie in [`tune_lambdas`] when they differ by at most
/// `TIE_RTOL * max + TIE_ATOL`.
pub const TIE_RTOL: f64 = 1e-9;
pub const TIE_ATOL: f64 = 1e-15;

const ROUND_STREAM: u64 = 0x524f_554e_4400_0003;
/// Stream selector for `run` and the sweeps.
const EVAL_STREAM: u64 = 0;
/// Stream selector for tuning, so tuned values are not scored on the data
/// that picked them.
const VALIDATION_STREAM: u64 = 0x5641_4c49_4400_0004;

/// Everything that stays fixed across the rows of one experiment.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: ComputeModel,
    pub dataset: Dataset,
    pub alphas: NodeSet,
    pub betas: NodeSet,
    pub settings: Vec<Setting>,
}

/// A trial's batch with the exact model outputs it is scored against.
struct TrialInput {
    batch: Batch,
    f_at_x: Array2<f64>,
    grad_infnorm: f64,
}

/// Seed for the straggler pattern of (`trial`, `setting`); shared by every
/// scheme so comparisons are paired.
pub fn round_seed(master: u64, stream: u64, trial: usize, setting: usize) -> u64 {
    splitmix64(splitmix64(master ^ ROUND_STREAM ^ stream).wrapping_add(trial as u64) ^ (setting as u64).rotate_left(32))
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = build_model(&config.model, config.seed)?;
        let dataset = Dataset::from_spec(&config.dataset, config.seed)?;
        if dataset.dim() != model.input_dim() {
            return Err(ExperimentError::ConfigInvalid(format!(
                "dataset has {} columns but the model expects {}",
                dataset.dim(),
                model.input_dim()
            )));
        }
        let alphas = alpha_points(config.k).map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
        let betas = beta_points(config.n).map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
        Ok(Self {
            config: config.clone(),
            model,
            dataset,
            alphas,
            betas,
            settings: config.stragglers.settings(),
        })
    }

    fn trial_input(&self, trial: usize, stream: u64) -> Result<TrialInput> {
        let batch = self.dataset.batch(self.alphas.values(), trial, stream)?;
        let f_at_x = self.model.apply(batch.x.view())?;
        let grad_infnorm = estimate_grad_infnorm(&self.model, batch.x.view(), GRAD_STEP)?;
        Ok(TrialInput {
            batch,
            f_at_x,
            grad_infnorm,
        })
    }

    fn trial_inputs(&self, stream: u64) -> Result<Vec<TrialInput>> {
        (0..self.config.trials)
            .into_par_iter()
            .map(|t| self.trial_input(t, stream))
            .collect()
    }

    /// Scores one scheme on one trial under one straggler setting.
    fn evaluate(
        &self,
        input: &TrialInput,
        trial: usize,
        setting: usize,
        cfg: &SchemeConfig,
        stream: u64,
    ) -> Result<MetricsRow> {
        let start = Instant::now();
        let x = &input.batch.x;
        let seed = round_seed(self.config.seed, stream, trial, setting);
        let straggler = &self.settings[setting].straggler;
        let outcome = sim::dispatch(x, &self.model, &self.alphas, &self.betas, cfg, straggler, seed)?;
        let decoded = codec::decode(&outcome.survivors, &self.betas, &self.alphas, cfg);
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

        let enc = codec::fit_encoder(x, &self.alphas, cfg)?;
        let enc_at_alpha = enc.sample(self.alphas.values())?;
        let enc_train_sse: f64 = enc_at_alpha
            .iter()
            .zip(x.view().iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let coded_roughness = metrics::batch_roughness(outcome.coded.coded.view())?;

        let mut row = MetricsRow {
            trial: TrialLabel::Index(trial),
            scheme: cfg.scheme(),
            n: self.config.n,
            k: self.config.k,
            s_size: outcome.survivors.len() as f64,
            lambda_enc: cfg.lambda_enc().value(),
            lambda_dec: cfg.lambda_dec().value(),
            mse: f64::NAN,
            rel_acc: f64::NAN,
            agreement: f64::NAN,
            term1: f64::NAN,
            term2: f64::NAN,
            l2_loss: f64::NAN,
            enc_train_sse,
            coded_roughness,
            grad_infnorm: input.grad_infnorm,
            runtime_ms: if self.config.record_runtime { runtime_ms } else { 0.0 },
            setting: self.settings[setting].value,
            status: RowStatus::Ok,
        };
        let decoded = match decoded {
            Ok(d) => d,
            Err(CodecError::DecodingInfeasible { .. }) => {
                row.status = RowStatus::DecodingInfeasible;
                return Ok(row);
            }
            Err(e) => return Err(e.into()),
        };

        row.mse = metrics::mse(input.f_at_x.view(), decoded.view())?;
        if self.model.output_dim() >= 2 {
            let r = metrics::rel_acc(input.f_at_x.view(), decoded.view(), input.batch.labels.as_deref())?;
            row.agreement = r.agreement;
            row.rel_acc = r.ratio.unwrap_or(r.agreement);
        }
        let f_of_enc = self.model.apply(enc_at_alpha.view())?;
        let dec = metrics::decomposition(decoded.view(), f_of_enc.view(), input.f_at_x.view())?;
        // NaN counts as a violation
        if dec
            .l2_loss
            .partial_cmp(&(dec.bound() + TRIANGLE_SLACK))
            .is_none_or(|o| o.is_gt())
        {
            return Err(ExperimentError::TriangleViolated {
                scheme: cfg.scheme().to_string(),
                trial,
                l2_loss: dec.l2_loss,
                bound: dec.bound(),
            });
        }
        row.term1 = dec.term1;
        row.term2 = dec.term2;
        row.l2_loss = dec.l2_loss;
        Ok(row)
    }

    fn scheme_config(&self, scheme: Scheme) -> Result<SchemeConfig> {
        match scheme {
            Scheme::Nercc => SchemeConfig::nercc(self.config.lambda_enc, self.config.lambda_dec)
                .map_err(|e| ExperimentError::ConfigInvalid(e.to_string())),
            Scheme::NerccAg => Ok(SchemeConfig::agnostic()),
            Scheme::Bacc => Ok(SchemeConfig::bacc()),
        }
    }

    /// Rows for every (scheme config, setting, trial), in that nesting order.
    fn grid_rows(&self, configs: &[SchemeConfig], stream: u64) -> Result<Vec<MetricsRow>> {
        let inputs = self.trial_inputs(stream)?;
        let trials = self.config.trials;
        let jobs: Vec<(usize, usize, usize)> = (0..configs.len())
            .flat_map(|c| (0..self.settings.len()).flat_map(move |s| (0..trials).map(move |t| (c, s, t))))
            .collect();
        jobs.par_iter()
            .map(|&(c, s, t)| self.evaluate(&inputs[t], t, s, &configs[c], stream))
            .collect()
    }
}

/// One row per (scheme, straggler setting, trial).
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let exp = Experiment::new(config)?;
    let configs = config
        .schemes
        .iter()
        .map(|&s| exp.scheme_config(s))
        .collect::<Result<Vec<_>>>()?;
    exp.grid_rows(&configs, EVAL_STREAM)
}

/// Follows each group of `group_len` consecutive detail rows with its median row.
fn with_summaries(rows: Vec<MetricsRow>, group_len: usize) -> Vec<MetricsRow> {
    let mut out = Vec::with_capacity(rows.len() + rows.len() / group_len.max(1));
    for group in rows.chunks(group_len.max(1)) {
        out.extend_from_slice(group);
        out.extend(MetricsRow::summarize(group));
    }
    out
}

/// [`run_experiment`] with a median row after each (scheme, setting) group.
pub fn sweep_stragglers(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    Ok(with_summaries(run_experiment(config)?, config.trials))
}

/// Median MSE at one grid point of a smoothing sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaPoint {
    pub setting: f64,
    pub lambda: f64,
    pub median_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSweepReport {
    pub axis: LambdaAxis,
    /// Detail rows of each grid point followed by its summary row.
    pub rows: Vec<MetricsRow>,
    pub points: Vec<LambdaPoint>,
}

impl LambdaSweepReport {
    /// Grid point with the lowest median MSE for straggler setting `setting`.
    pub fn best(&self, setting: f64) -> Option<LambdaPoint> {
        self.points
            .iter()
            .filter(|p| p.setting == setting && !p.median_mse.is_nan())
            .copied()
            .min_by(|a, b| a.median_mse.total_cmp(&b.median_mse))
    }

    pub fn at_zero(&self, setting: f64) -> Option<LambdaPoint> {
        self.points
            .iter()
            .find(|p| p.setting == setting && p.lambda == 0.0)
            .copied()
    }
}

/// `nercc` over the grid of the configured axis, the other smoothing
/// parameter held at `sweep.fixed`.
pub fn sweep_lambda(config: &ExperimentConfig) -> Result<LambdaSweepReport> {
    let exp = Experiment::new(config)?;
    let axis = config.sweep.axis;
    let grid = match axis {
        LambdaAxis::Enc => &config.lambda_enc_grid,
        LambdaAxis::Dec => &config.lambda_dec_grid,
    };
    let fixed = config.sweep.fixed;
    let configs = grid
        .iter()
        .map(|&l| match axis {
            LambdaAxis::Enc => SchemeConfig::nercc(l, fixed),
            LambdaAxis::Dec => SchemeConfig::nercc(fixed, l),
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
    let detail = exp.grid_rows(&configs, EVAL_STREAM)?;
    // grid_rows nests settings inside configs; regroup as (setting, lambda, trial)
    let trials = config.trials;
    let settings = exp.settings.len();
    let mut rows = Vec::with_capacity(detail.len() + detail.len() / trials);
    let mut points = Vec::new();
    for s in 0..settings {
        for (c, &lambda) in grid.iter().enumerate() {
            let start = (c * settings + s) * trials;
            let group = &detail[start..start + trials];
            rows.extend_from_slice(group);
            let summary = MetricsRow::summarize(group).expect("trials >= 1");
            points.push(LambdaPoint {
                setting: exp.settings[s].value,
                lambda,
                median_mse: summary.mse,
            });
            rows.push(summary);
        }
    }
    Ok(LambdaSweepReport { axis, rows, points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunePoint {
    pub lambda_enc: f64,
    pub lambda_dec: f64,
    pub median_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    /// Every grid pair in ascending lexicographic order.
    pub grid: Vec<TunePoint>,
    pub best: TunePoint,
}

/// Exhaustive search over `lambda_enc_grid x lambda_dec_grid` for the pair
/// with the lowest median `nercc` MSE on validation trials (pooled over
/// straggler settings). Near-ties go to the lexicographically smaller pair.
pub fn tune_lambdas(config: &ExperimentConfig) -> Result<TuneReport> {
    let exp = Experiment::new(config)?;
    let sorted = |g: &[f64]| {
        let mut g = g.to_vec();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    };
    let enc = sorted(&config.lambda_enc_grid);
    let dec = sorted(&config.lambda_dec_grid);
    let pairs: Vec<(f64, f64)> = enc.iter().flat_map(|&e| dec.iter().map(move |&d| (e, d))).collect();
    let configs = pairs
        .iter()
        .map(|&(e, d)| SchemeConfig::nercc(e, d))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
    let rows = exp.grid_rows(&configs, VALIDATION_STREAM)?;
    let per_pair = exp.settings.len() * config.trials;
    let grid: Vec<TunePoint> = pairs
        .iter()
        .zip(rows.chunks(per_pair))
        .map(|(&(lambda_enc, lambda_dec), chunk)| {
            let mses: Vec<f64> = chunk
                .iter()
                .filter(|r| r.status == RowStatus::Ok)
                .map(|r| r.mse)
                .collect();
            TunePoint {
                lambda_enc,
                lambda_dec,
                median_mse: metrics::median(&mses).unwrap_or(f64::INFINITY),
            }
        })
        .collect();
    let min = grid.iter().map(|p| p.median_mse).fold(f64::INFINITY, f64::min);
    let tol = TIE_RTOL * min.abs() + TIE_ATOL;
    let best = *grid.iter().find(|p| p.median_mse <= min + tol).unwrap_or(&grid[0]);
    Ok(TuneReport { grid, best })
}
