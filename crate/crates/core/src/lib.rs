//! Heart-rate forecasting with a nonlinear autoregressive (NAR) network
//! trained by a from-scratch Levenberg-Marquardt optimizer.
//!
//! The crate is split along the pipeline:
//!
//! - [`lm`]: damped Gauss-Newton least squares with accept/reject damping.
//! - [`nar`]: the lag → tanh hidden layer → linear output network, its
//!   analytic Jacobian and min-max normalization.
//! - [`series`]: CSV ingestion, the synthetic generator, lag embeddings and
//!   contiguous block splits.
//! - [`metrics`]: MSE, MAE, MAPE, R, R², accuracy, efficiency and the error
//!   histogram / autocorrelation diagnostics.
//! - [`session`]: one training run with validation early stopping, and the
//!   multi-scenario sweep.
//! - [`config`], [`report`] and [`plot`]: the pieces the `lm-forecast` binary
//!   is assembled from.

pub mod config;
pub mod error;
pub mod lm;
pub mod metrics;
pub mod nar;
pub mod plot;
pub mod report;
pub mod rng;
pub mod series;
pub mod session;

pub use error::{Error, Result};
pub use lm::{lm_fit, lm_step, solve_damped_normal, LeastSquaresProblem, LmConfig, LmOutcome, StopReason};
pub use metrics::{EvaluationPair, MetricsReport};
pub use nar::{NarLayout, NarWeights, NormParams};
pub use series::{LagEmbedding, SeriesData, SplitIndices, SplitSpec};
pub use session::{run_scenarios, run_session, SessionConfig, SessionResult, TrainTrace};
