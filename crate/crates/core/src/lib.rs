//! Nested-regression coded computing.
//!
//! A master node encodes a batch of `K` inputs into `N` coded inputs by
//! fitting a smoothing spline through `(alpha_k, x_k)` and sampling it at the
//! worker nodes `beta_n`. Workers apply the model `f` to their coded input;
//! the master fits a second smoothing spline through whatever results arrive
//! and samples it at the `alpha_k` to approximate `f(x_k)`. Berrut rational
//! interpolation is provided as the baseline scheme.
//!
//! - [`spline`]: natural cubic smoothing splines (banded solver + dense oracle)
//! - [`nodes`]: Chebyshev node families
//! - [`berrut`]: Berrut rational interpolation
//! - [`codec`]: encoder and decoder for each [`Scheme`]
//! - [`models`]: desk-scale compute models and their file formats
//! - [`sim`]: seeded master/worker round simulation
//! - [`metrics`]: accuracy metrics and loss decomposition

pub mod berrut;
pub mod codec;
pub mod metrics;
pub mod models;
pub mod nodes;
pub mod sim;
pub mod spline;

pub use berrut::{berrut_eval, BerrutInterpolant};
pub use codec::{
    decode, encode, fit_encoder, min_survivors, CodecError, CodedBatch, DataMatrix, Regression, Scheme, SchemeConfig,
    SurvivorResults,
};
pub use metrics::{
    batch_roughness, decomposition, mse, rel_acc, taylor_proxy_bound, Decomposition, MetricsRow, RelAcc, RowStatus,
    TrialLabel,
};
pub use models::{estimate_grad_infnorm, load_model, save_model, Activation, ComputeModel, ModelError, ModelKind};
pub use nodes::{alpha_points, beta_points, NodeKind, NodeSet};
pub use sim::{dispatch, run_round, sample_survivors, RoundOutcome, SimError, StragglerConfig};
pub use spline::{fit, fit_dense_oracle, KnotVector, SmoothingParam, SplineError, SplineFit};
