//! One training experiment and the multi-scenario sweep.
//!
//! Pipeline: block split on the raw series → min-max bounds from the
//! training segment → lag embedding → Levenberg-Marquardt fit on training
//! rows with validation early stopping → best-validation weights evaluated
//! on all three splits in bpm.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{lm_fit, EpochState, LeastSquaresProblem, LmConfig, LmOutcome, StopReason};
use crate::metrics::{
    error_autocorrelation, error_histogram, Autocorrelation, EvaluationPair, HistogramBin, MetricsReport,
};
use crate::nar::{init_weights, one_step_predictions, NarLayout, NarProblem, NarWeights, NormParams};
use crate::series::{embed, split_embedded, SeriesData, SplitIndices, SplitSpec};

/// Minimum number of samples beyond the largest lag.
pub const MIN_SAMPLES_BEYOND_LAG: usize = 10;
pub const HISTOGRAM_BINS: usize = 20;
pub const AUTOCORRELATION_MAX_LAG: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub layout: NarLayout,
    pub lm: LmConfig,
    pub split: SplitSpec,
    /// Consecutive non-improving validation checks before stopping; `None`
    /// disables early stopping.
    pub max_fail: Option<usize>,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            layout: NarLayout::default(),
            lm: LmConfig::default(),
            split: SplitSpec::new(0.70, 0.15, 0.15).expect("valid default split"),
            max_fail: Some(6),
            seed: 42,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_fail == Some(0) {
            return Err(Error::Config("max_fail must be at least 1".into()));
        }
        self.lm.validate()?;
        self.split.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
    pub mu: f64,
    pub gradient_inf_norm: f64,
    /// Consecutive validation checks failed so far.
    pub validation_fails: usize,
}

/// Per-epoch training history; `records[k].epoch == k`, epoch 0 being the
/// initial weights. MSEs are in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_epoch: usize,
    pub stop_reason: StopReason,
}

/// Result of [`fit_with_early_stopping`].
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopFit {
    /// Best-validation parameters, or the final ones when early stopping is
    /// disabled.
    pub params: DVector<f64>,
    pub trace: TrainTrace,
    pub lm: LmOutcome,
}

/// Runs [`lm_fit`] and evaluates `validation_mse` after every epoch. A check
/// fails unless it is strictly below the best value so far; `max_fail`
/// consecutive failures stop the fit and the best-validation parameters are
/// returned.
pub fn fit_with_early_stopping<P, V>(
    problem: &P,
    init: DVector<f64>,
    lm: &LmConfig,
    max_fail: Option<usize>,
    mut validation_mse: V,
) -> Result<EarlyStopFit>
where
    P: LeastSquaresProblem + ?Sized,
    V: FnMut(&DVector<f64>) -> f64,
{
    let residual_count = problem.residual_count().max(1) as f64;
    let mut records = Vec::new();
    let mut best: Option<(usize, f64, DVector<f64>)> = None;
    let mut fails = 0usize;

    let mut on_epoch = |state: &EpochState<'_>| -> bool {
        let v = validation_mse(state.params);
        match &best {
            Some((_, best_v, _)) if v.partial_cmp(best_v) != Some(std::cmp::Ordering::Less) => fails += 1,
            _ => {
                best = Some((state.epoch, v, state.params.clone()));
                fails = 0;
            }
        }
        records.push(EpochRecord {
            epoch: state.epoch,
            train_mse: state.sse / residual_count,
            validation_mse: v,
            mu: state.mu,
            gradient_inf_norm: state.gradient_inf_norm,
            validation_fails: fails,
        });
        max_fail.is_some_and(|m| fails >= m)
    };
    let outcome = lm_fit(problem, init, lm, Some(&mut on_epoch))?;

    let (best_epoch, _, best_params) = best.expect("callback runs at least once");
    let (best_epoch, params) = if max_fail.is_some() {
        (best_epoch, best_params)
    } else {
        (outcome.epochs_run, outcome.params.clone())
    };
    Ok(EarlyStopFit {
        params,
        trace: TrainTrace {
            records,
            best_epoch,
            stop_epoch: outcome.epochs_run,
            stop_reason: outcome.stop_reason,
        },
        lm: outcome,
    })
}

/// Targets and predictions (bpm) for one split, aligned with the raw series
/// through `first_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSeries {
    pub first_index: usize,
    pub targets: Vec<f64>,
    pub predictions: Vec<f64>,
}

impl SplitSeries {
    pub fn errors(&self) -> Vec<f64> {
        self.targets.iter().zip(&self.predictions).map(|(y, p)| y - p).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReports {
    pub train: MetricsReport,
    pub validation: MetricsReport,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Histogram of test errors (bpm).
    pub error_histogram: Vec<HistogramBin>,
    /// Raw autocovariance of test errors (bpm²).
    pub error_autocorrelation: Autocorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub weights: NarWeights,
    pub norm: NormParams,
    pub layout: NarLayout,
    pub split: SplitSpec,
    /// Raw-series counts, the `n`/`t` bookkeeping used for efficiency.
    pub raw_counts: SplitCounts,
    /// Embedded-row ranges the optimizer actually used.
    pub embedded_split: SplitIndices,
    pub reports: SplitReports,
    pub trace: TrainTrace,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub series: Option<SessionSeries>,
}

/// Per-split bpm series kept for plotting, not serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSeries {
    pub train: SplitSeries,
    pub validation: SplitSeries,
    pub test: SplitSeries,
}

impl SessionResult {
    /// Next-step forecast in bpm from the most recent observed values.
    pub fn forecast_next(&self, history_bpm: &[f64]) -> Result<f64> {
        let max_lag = self.layout.max_lag();
        if history_bpm.len() < max_lag {
            return Err(Error::SeriesTooShort {
                len: history_bpm.len(),
                needed: max_lag,
            });
        }
        let n = history_bpm.len();
        let inputs: Vec<f64> = self
            .layout
            .lags()
            .iter()
            .map(|lag| self.norm.apply(history_bpm[n - lag]))
            .collect();
        Ok(self.norm.invert(crate::nar::forward(&self.weights, &inputs)))
    }
}

fn mse_normalized(weights: &NarWeights, inputs: &DMatrix<f64>, targets: &DVector<f64>) -> f64 {
    let (preds, _) = crate::nar::batch_jacobian(weights, inputs);
    (preds - targets).norm_squared() / targets.len() as f64
}

pub fn run_session(series: &SeriesData, config: &SessionConfig) -> Result<SessionResult> {
    config.validate()?;
    let layout = &config.layout;
    let values = series.values();
    let n = values.len();
    let max_lag = layout.max_lag();
    if n < max_lag + MIN_SAMPLES_BEYOND_LAG {
        return Err(Error::SeriesTooShort {
            len: n,
            needed: max_lag + MIN_SAMPLES_BEYOND_LAG,
        });
    }

    let (raw, split) = split_embedded(n, max_lag, &config.split)?;
    let norm = NormParams::fit(&values[raw.train.clone()])?;
    let normalized: Vec<f64> = values.iter().map(|&v| norm.apply(v)).collect();
    let embedding = embed(&normalized, layout.lags())?;

    let (train_x, train_y) = embedding.rows(split.train.clone());
    let (val_x, val_y) = embedding.rows(split.validation.clone());
    let problem = NarProblem::new(layout, train_x, train_y)?;

    let init = init_weights(layout, config.seed).flatten();
    let fit = fit_with_early_stopping(&problem, init, &config.lm, config.max_fail, |params| {
        let w = NarWeights::unflatten(layout, params.as_slice()).expect("parameter length fixed");
        mse_normalized(&w, &val_x, &val_y)
    })?;
    let weights = NarWeights::unflatten(layout, fit.params.as_slice())?;

    let preds = one_step_predictions(&weights, &embedding);
    let split_series = |range: &std::ops::Range<usize>| SplitSeries {
        first_index: embedding.first_target_index + range.start,
        targets: values[embedding.first_target_index + range.start..embedding.first_target_index + range.end].to_vec(),
        predictions: preds
            .rows(range.start, range.len())
            .iter()
            .map(|&p| norm.invert(p))
            .collect(),
    };
    let bpm = SessionSeries {
        train: split_series(&split.train),
        validation: split_series(&split.validation),
        test: split_series(&split.test),
    };

    let (t_train, n_total) = (raw.train.len(), n);
    let report = |s: &SplitSeries| -> Result<MetricsReport> {
        MetricsReport::compute(&EvaluationPair::new(&s.targets, &s.predictions)?, n_total, t_train)
    };
    let reports = SplitReports {
        train: report(&bpm.train)?,
        validation: report(&bpm.validation)?,
        test: report(&bpm.test)?,
    };

    let test_errors = bpm.test.errors();
    let diagnostics = Diagnostics {
        error_histogram: error_histogram(&test_errors, HISTOGRAM_BINS)?,
        error_autocorrelation: error_autocorrelation(&test_errors, AUTOCORRELATION_MAX_LAG.min(test_errors.len() - 1))?,
    };

    Ok(SessionResult {
        weights,
        norm,
        layout: layout.clone(),
        split: config.split,
        raw_counts: SplitCounts {
            train: raw.train.len(),
            validation: raw.validation.len(),
            test: raw.test.len(),
        },
        embedded_split: split,
        reports,
        trace: fit.trace,
        diagnostics,
        series: Some(bpm),
    })
}

/// One row of a scenario sweep; failures are kept per row.
#[derive(Debug)]
pub struct ScenarioOutcome {
    /// 1-based position in the requested list.
    pub id: usize,
    pub split: SplitSpec,
    pub result: Result<SessionResult>,
}

/// Runs every split with the same layout, optimizer settings and seed.
/// Output order follows `scenarios` regardless of `parallel`.
pub fn run_scenarios(
    series: &SeriesData,
    base: &SessionConfig,
    scenarios: &[SplitSpec],
    parallel: bool,
) -> Result<Vec<ScenarioOutcome>> {
    if scenarios.is_empty() {
        return Err(Error::Config("scenario list is empty".into()));
    }
    let run = |(i, split): (usize, &SplitSpec)| ScenarioOutcome {
        id: i + 1,
        split: *split,
        result: run_session(
            series,
            &SessionConfig {
                split: *split,
                ..base.clone()
            },
        ),
    };
    Ok(if parallel {
        scenarios.par_iter().enumerate().map(run).collect()
    } else {
        scenarios.iter().enumerate().map(run).collect()
    })
}
