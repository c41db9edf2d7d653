//! Simulated master/worker round.
//!
//! The master encodes a batch, each worker applies the model to its coded
//! row, stragglers are erased and the master decodes from the rest. All
//! randomness derives from the round seed; per-worker draws use
//! [`worker_seed`] so the outcome does not depend on execution order.

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError, CodedBatch, DataMatrix, SchemeConfig, SurvivorResults};
use crate::models::{ComputeModel, ModelError};
use crate::nodes::NodeSet;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("straggler count {stragglers} out of range for {workers} workers")]
    CountOutOfRange { stragglers: usize, workers: usize },
    #[error("invalid straggler config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl SimError {
    pub fn is_decoding_infeasible(&self) -> bool {
        matches!(self, SimError::Codec(CodecError::DecodingInfeasible { .. }))
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum StragglerConfig {
    /// A uniformly random set of exactly `stragglers` workers never returns.
    FixedCount { stragglers: usize },
    /// Worker `n` arrives at `base_delay + Exp(mean mean_extra)`; results
    /// after `deadline` are dropped.
    DelayDeadline {
        base_delay: f64,
        mean_extra: f64,
        deadline: f64,
    },
    /// The listed (zero-based) workers straggle.
    ExplicitList { stragglers: Vec<usize> },
}

impl StragglerConfig {
    pub fn validate(&self, workers: usize) -> Result<()> {
        match self {
            StragglerConfig::FixedCount { stragglers } => {
                if *stragglers >= workers {
                    return Err(SimError::CountOutOfRange {
                        stragglers: *stragglers,
                        workers,
                    });
                }
            }
            StragglerConfig::DelayDeadline {
                base_delay,
                mean_extra,
                deadline,
            } => {
                if !(base_delay.is_finite() && *base_delay >= 0.0) {
                    return Err(SimError::InvalidConfig(format!("base delay {base_delay} must be >= 0")));
                }
                if !(mean_extra.is_finite() && *mean_extra > 0.0) {
                    return Err(SimError::InvalidConfig(format!(
                        "mean extra delay {mean_extra} must be > 0"
                    )));
                }
                if !(deadline.is_finite() && deadline >= base_delay) {
                    return Err(SimError::InvalidConfig(format!(
                        "deadline {deadline} must be finite and >= base delay {base_delay}"
                    )));
                }
            }
            StragglerConfig::ExplicitList { stragglers } => {
                if let Some(&bad) = stragglers.iter().find(|&&i| i >= workers) {
                    return Err(SimError::InvalidConfig(format!(
                        "straggler index {bad} out of range for {workers} workers"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for worker `index`'s private random stream.
pub fn worker_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ index as u64)
}

/// Uniform random survivor set of size `workers - stragglers`, ascending.
pub fn sample_survivors(workers: usize, stragglers: usize, seed: u64) -> Result<Vec<usize>> {
    if stragglers >= workers {
        return Err(SimError::CountOutOfRange { stragglers, workers });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let mut keep = index::sample(&mut rng, workers, workers - stragglers).into_vec();
    keep.sort_unstable();
    Ok(keep)
}

/// Arrival time per worker and the survivor set for one round.
pub fn schedule(workers: usize, cfg: &StragglerConfig, seed: u64) -> Result<(Vec<f64>, Vec<usize>)> {
    cfg.validate(workers)?;
    match cfg {
        StragglerConfig::FixedCount { stragglers } => {
            let keep = sample_survivors(workers, *stragglers, seed)?;
            Ok((arrivals_from_survivors(workers, &keep), keep))
        }
        StragglerConfig::ExplicitList { stragglers } => {
            let keep: Vec<usize> = (0..workers).filter(|i| !stragglers.contains(i)).collect();
            Ok((arrivals_from_survivors(workers, &keep), keep))
        }
        StragglerConfig::DelayDeadline {
            base_delay,
            mean_extra,
            deadline,
        } => {
            let exp = Exp::new(1.0 / mean_extra).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            let arrivals: Vec<f64> = (0..workers)
                .map(|n| {
                    let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(seed, n));
                    base_delay + exp.sample(&mut rng)
                })
                .collect();
            let keep = (0..workers).filter(|&n| arrivals[n] <= *deadline).collect();
            Ok((arrivals, keep))
        }
    }
}

fn arrivals_from_survivors(workers: usize, keep: &[usize]) -> Vec<f64> {
    let mut arrivals = vec![f64::INFINITY; workers];
    for &i in keep {
        arrivals[i] = 0.0;
    }
    arrivals
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub coded: CodedBatch,
    /// Arrival time per worker; `+inf` for erased workers in count/list modes.
    pub arrivals: Vec<f64>,
    pub survivors: SurvivorResults,
    pub seed: u64,
}

/// Runs every surviving worker's computation in parallel.
fn compute_workers(model: &ComputeModel, coded: &Array2<f64>, keep: &[usize]) -> Result<Array2<f64>> {
    let rows: Vec<Array1<f64>> = keep
        .par_iter()
        .map(|&n| model.apply_row(coded.row(n)))
        .collect::<std::result::Result<_, _>>()?;
    let mut out = Array2::zeros((keep.len(), model.output_dim()));
    for (mut dst, row) in out.rows_mut().into_iter().zip(rows) {
        dst.assign(&row);
    }
    Ok(out)
}

/// Encode, compute and collect survivors, without decoding.
pub fn dispatch(
    x: &DataMatrix,
    model: &ComputeModel,
    alphas: &NodeSet,
    betas: &NodeSet,
    cfg: &SchemeConfig,
    straggler: &StragglerConfig,
    seed: u64,
) -> Result<RoundOutcome> {
    let coded = codec::encode(x, alphas, betas, cfg)?;
    let (arrivals, keep) = schedule(betas.len(), straggler, seed)?;
    let outputs = compute_workers(model, &coded.coded, &keep)?;
    let survivors = SurvivorResults::new(keep, outputs)?;
    Ok(RoundOutcome {
        coded,
        arrivals,
        survivors,
        seed,
    })
}

/// One full round; returns the outcome and the decoded `K x m` estimate of
/// `f(x_k)`.
pub fn run_round(
    x: &DataMatrix,
    model: &ComputeModel,
    alphas: &NodeSet,
    betas: &NodeSet,
    cfg: &SchemeConfig,
    straggler: &StragglerConfig,
    seed: u64,
) -> Result<(RoundOutcome, Array2<f64>)> {
    let outcome = dispatch(x, model, alphas, betas, cfg, straggler, seed)?;
    let decoded = codec::decode(&outcome.survivors, betas, alphas, cfg)?;
    Ok((outcome, decoded))
}
