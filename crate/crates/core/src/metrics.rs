//! Forecast-error metrics and residual diagnostics.
//!
//! Errors are always `target − prediction`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed values and predictions of equal, non-zero length.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationPair<'a> {
    targets: &'a [f64],
    predictions: &'a [f64],
}

impl<'a> EvaluationPair<'a> {
    pub fn new(targets: &'a [f64], predictions: &'a [f64]) -> Result<Self> {
        if targets.len() != predictions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} targets vs {} predictions",
                targets.len(),
                predictions.len()
            )));
        }
        if targets.is_empty() {
            return Err(Error::InvalidArgument("evaluation pair is empty".into()));
        }
        if targets.iter().chain(predictions).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "evaluation pair contains non-finite values".into(),
            ));
        }
        Ok(Self { targets, predictions })
    }

    pub fn targets(&self) -> &'a [f64] {
        self.targets
    }

    pub fn predictions(&self) -> &'a [f64] {
        self.predictions
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn errors(&self) -> Vec<f64> {
        self.targets.iter().zip(self.predictions).map(|(y, p)| y - p).collect()
    }

    fn n(&self) -> f64 {
        self.len() as f64
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn mse(pair: &EvaluationPair<'_>) -> f64 {
    pair.errors().iter().map(|e| e * e).sum::<f64>() / pair.n()
}

pub fn mae(pair: &EvaluationPair<'_>) -> f64 {
    pair.errors().iter().map(|e| e.abs()).sum::<f64>() / pair.n()
}

/// Mean absolute percentage error, in percent.
pub fn mape(pair: &EvaluationPair<'_>) -> Result<f64> {
    if let Some(i) = pair.targets.iter().position(|&y| y == 0.0) {
        return Err(Error::ZeroTarget(i));
    }
    let sum: f64 = pair
        .targets
        .iter()
        .zip(pair.predictions)
        .map(|(y, p)| ((y - p) / y).abs())
        .sum();
    Ok(sum / pair.n() * 100.0)
}

pub fn accuracy(mape_value: f64) -> f64 {
    100.0 - mape_value
}

/// `n / t`, total samples over training samples.
pub fn efficiency(n_total: usize, t_train: usize) -> f64 {
    n_total as f64 / t_train as f64
}

/// `n / t` truncated (not rounded) to two decimals, computed in integers.
pub fn efficiency_display(n_total: usize, t_train: usize) -> String {
    let hundredths = (n_total as u128 * 100) / t_train as u128;
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Sample Pearson correlation between predictions and targets.
pub fn pearson_r(pair: &EvaluationPair<'_>) -> Result<f64> {
    let my = mean(pair.targets);
    let mp = mean(pair.predictions);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (y, p) in pair.targets.iter().zip(pair.predictions) {
        let (dy, dp) = (y - my, p - mp);
        sxy += dy * dp;
        syy += dy * dy;
        sxx += dp * dp;
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("targets"));
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("predictions"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `1 − RSS/TSS` about the target mean; negative when worse than the mean.
pub fn r_squared(pair: &EvaluationPair<'_>) -> Result<f64> {
    let my = mean(pair.targets);
    let tss: f64 = pair.targets.iter().map(|y| (y - my).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::ZeroVariance("targets"));
    }
    let rss: f64 = pair.errors().iter().map(|e| e * e).sum();
    Ok(1.0 - rss / tss)
}

/// All metrics for one evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// bpm²
    pub mse: f64,
    /// bpm
    pub mae: f64,
    /// percent
    pub mape: f64,
    /// `None` when predictions or targets are constant.
    pub pearson_r: Option<f64>,
    pub r_squared: Option<f64>,
    /// percent, `100 − mape`
    pub accuracy: f64,
    pub efficiency: f64,
    pub n_total: usize,
    pub t_train: usize,
    pub samples: usize,
}

impl MetricsReport {
    pub fn compute(pair: &EvaluationPair<'_>, n_total: usize, t_train: usize) -> Result<Self> {
        if t_train == 0 || n_total < t_train {
            return Err(Error::InvalidArgument(format!(
                "efficiency needs 1 ≤ t ≤ n, got n={n_total} t={t_train}"
            )));
        }
        let mape = mape(pair)?;
        Ok(Self {
            mse: mse(pair),
            mae: mae(pair),
            mape,
            pearson_r: pearson_r(pair).ok(),
            r_squared: r_squared(pair).ok(),
            accuracy: accuracy(mape),
            efficiency: efficiency(n_total, t_train),
            n_total,
            t_train,
            samples: pair.len(),
        })
    }

    pub fn efficiency_display(&self) -> String {
        efficiency_display(self.n_total, self.t_train)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Equal-width bins over `[min, max]`; each bin is upper-exclusive except
/// the last. A single distinct value is widened to `[v − 0.5, v + 0.5]`.
pub fn error_histogram(errors: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("histogram of an empty error vector".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument(
            "histogram input contains non-finite values".into(),
        ));
    }
    let (mut lo, mut hi) = errors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &e| (l.min(e), h.max(e)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lower: lo + width * k as f64,
            upper: if k + 1 == bins { hi } else { lo + width * (k + 1) as f64 },
            count: 0,
        })
        .collect();
    for &e in errors {
        let k = (((e - lo) / width).floor() as usize).min(bins - 1);
        out[k].count += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    /// `(lag, c(lag))` for `lag = 0..=max_lag`.
    pub values: Vec<(usize, f64)>,
    /// `1.96/√N · c(0)`, the 95% band in the same units as `values`.
    pub confidence_limit: f64,
}

/// Raw autocovariance `c(k) = (1/N) Σ e_i e_{i+k}` without mean removal, so
/// `c(0)` is the mean squared error.
pub fn error_autocorrelation(errors: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    let n = errors.len();
    if max_lag >= n {
        return Err(Error::InvalidArgument(format!(
            "max_lag {max_lag} must be smaller than the series length {n}"
        )));
    }
    let values: Vec<(usize, f64)> = (0..=max_lag)
        .map(|k| {
            let s: f64 = errors[..n - k].iter().zip(&errors[k..]).map(|(a, b)| a * b).sum();
            (k, s / n as f64)
        })
        .collect();
    let c0 = values[0].1;
    Ok(Autocorrelation {
        confidence_limit: 1.96 / (n as f64).sqrt() * c0,
        values,
    })
}
