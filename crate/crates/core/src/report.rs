//! Report files: `scenarios.csv`, `scenarios.json`, `report.json`, the
//! per-scenario SVG plots and the console tables.
//!
//! CSV numbers are written with [`CSV_DECIMALS`] decimals (efficiency
//! display column excepted); JSON carries full precision.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::lm::LmConfig;
use crate::metrics::MetricsReport;
use crate::nar::NarLayout;
use crate::plot;
use crate::series::{SeriesData, SplitSpec};
use crate::session::{ScenarioOutcome, SessionConfig, SessionResult, SplitCounts, TrainTrace};

pub const CSV_DECIMALS: usize = 6;

pub const SCENARIO_COLUMNS: [&str; 13] = [
    "scenario",
    "train_pct",
    "val_pct",
    "test_pct",
    "t_train",
    "mse",
    "pearson_r",
    "r_squared",
    "mae",
    "mape",
    "accuracy",
    "efficiency_exact",
    "efficiency_display",
];

/// Rounds half away from zero to `decimals` places.
pub fn round_half_away(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round() / scale
}

/// Console formatting: two decimals, half away from zero.
pub fn display2(x: f64) -> String {
    format!("{:.2}", round_half_away(x, 2))
}

/// Console formatting for correlation values.
pub fn display4(x: f64) -> String {
    format!("{:.4}", round_half_away(x, 4))
}

fn csv_num(x: f64) -> String {
    format!("{:.*}", CSV_DECIMALS, x)
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(csv_num).unwrap_or_default()
}

fn pct(f: f64) -> String {
    display2(f * 100.0)
}

/// Settings shared by every scenario of a run, echoed into JSON reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub source: String,
    pub n_total: usize,
    pub layout: NarLayout,
    pub lm: LmConfig,
    pub max_fail: Option<usize>,
    pub seed: u64,
}

impl RunMetadata {
    pub fn new(series: &SeriesData, config: &SessionConfig) -> Self {
        Self {
            source: series.source_label().to_string(),
            n_total: series.len(),
            layout: config.layout.clone(),
            lm: config.lm.clone(),
            max_fail: config.max_fail,
            seed: config.seed,
        }
    }
}

#[derive(Debug, Serialize)]
struct ScenarioJson<'a> {
    scenario: usize,
    split: SplitSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a SessionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    efficiency_display: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct ScenariosJson<'a> {
    run: &'a RunMetadata,
    scenarios: Vec<ScenarioJson<'a>>,
}

pub fn scenarios_csv(outcomes: &[ScenarioOutcome]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCENARIO_COLUMNS)?;
    for o in outcomes {
        let mut row = vec![
            o.id.to_string(),
            pct(o.split.train_fraction),
            pct(o.split.validation_fraction),
            pct(o.split.test_fraction),
        ];
        match &o.result {
            Ok(r) => {
                let t = &r.reports.test;
                row.extend([
                    t.t_train.to_string(),
                    csv_num(t.mse),
                    csv_opt(t.pearson_r),
                    csv_opt(t.r_squared),
                    csv_num(t.mae),
                    csv_num(t.mape),
                    csv_num(t.accuracy),
                    csv_num(t.efficiency),
                    t.efficiency_display(),
                ]);
            }
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 9)),
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn scenarios_json(meta: &RunMetadata, outcomes: &[ScenarioOutcome]) -> Result<String> {
    let doc = ScenariosJson {
        run: meta,
        scenarios: outcomes
            .iter()
            .map(|o| ScenarioJson {
                scenario: o.id,
                split: o.split,
                result: o.result.as_ref().ok(),
                efficiency_display: o.result.as_ref().ok().map(|r| r.reports.test.efficiency_display()),
                error: o.result.as_ref().err().map(|e| e.to_string()),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

#[derive(Debug, Serialize)]
struct SplitSummary {
    samples: usize,
    mse: f64,
    pearson_r: Option<f64>,
    r_squared: Option<f64>,
}

impl From<&MetricsReport> for SplitSummary {
    fn from(r: &MetricsReport) -> Self {
        Self {
            samples: r.samples,
            mse: r.mse,
            pearson_r: r.pearson_r,
            r_squared: r.r_squared,
        }
    }
}

#[derive(Debug, Serialize)]
struct TestSummary {
    mae: f64,
    mape: f64,
    accuracy: f64,
    efficiency_exact: f64,
    efficiency_display: String,
}

#[derive(Debug, Serialize)]
struct RunReportJson<'a> {
    run: &'a RunMetadata,
    split: SplitSpec,
    counts: &'a SplitCounts,
    train: SplitSummary,
    validation: SplitSummary,
    test: SplitSummary,
    test_accuracy: TestSummary,
    best_epoch: usize,
    stop_epoch: usize,
    stop_reason: crate::lm::StopReason,
    session: &'a SessionResult,
}

/// `report.json` for a single-scenario run.
pub fn run_report_json(meta: &RunMetadata, result: &SessionResult) -> Result<String> {
    let t = &result.reports.test;
    let doc = RunReportJson {
        run: meta,
        split: result.split,
        counts: &result.raw_counts,
        train: (&result.reports.train).into(),
        validation: (&result.reports.validation).into(),
        test: t.into(),
        test_accuracy: TestSummary {
            mae: t.mae,
            mape: t.mape,
            accuracy: t.accuracy,
            efficiency_exact: t.efficiency,
            efficiency_display: t.efficiency_display(),
        },
        best_epoch: result.trace.best_epoch,
        stop_epoch: result.trace.stop_epoch,
        stop_reason: result.trace.stop_reason,
        session: result,
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// A single [`SessionResult`] as pretty JSON.
pub fn session_json(result: &SessionResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)? + "\n")
}

fn opt4(x: Option<f64>) -> String {
    x.map(display4).unwrap_or_else(|| "n/a".into())
}

/// Console table with one row per scenario (test split).
pub fn scenarios_table(outcomes: &[ScenarioOutcome]) -> String {
    let mut out = format!(
        "{:<9} {:>17} {:>7} {:>10} {:>8} {:>7} {:>9} {:>9} {:>10}\n",
        "scenario", "split %", "t", "MSE", "R", "MAE", "MAPE %", "Acc. %", "efficiency"
    );
    for o in outcomes {
        let split = format!(
            "{}/{}/{}",
            round_half_away(o.split.train_fraction * 100.0, 2),
            round_half_away(o.split.validation_fraction * 100.0, 2),
            round_half_away(o.split.test_fraction * 100.0, 2)
        );
        match &o.result {
            Ok(r) => {
                let t = &r.reports.test;
                out.push_str(&format!(
                    "{:<9} {:>17} {:>7} {:>10} {:>8} {:>7} {:>9} {:>9} {:>10}\n",
                    o.id,
                    split,
                    t.t_train,
                    display2(t.mse),
                    opt4(t.pearson_r),
                    display2(t.mae),
                    display2(t.mape),
                    display2(t.accuracy),
                    t.efficiency_display()
                ));
            }
            Err(e) => out.push_str(&format!("{:<9} {:>17} failed: {e}\n", o.id, split)),
        }
    }
    out
}

/// Console summary of one run: per-split counts, MSE and R, then the test
/// accuracy figures.
pub fn run_table(result: &SessionResult) -> String {
    let r = &result.reports;
    let c = &result.raw_counts;
    let s = &result.split;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>14} {:>14} {:>14}\n",
        "", "training", "validation", "testing"
    ));
    out.push_str(&format!(
        "{:<12} {:>14} {:>14} {:>14}\n",
        "split",
        format!("{}% / {}", display2(s.train_fraction * 100.0), c.train),
        format!("{}% / {}", display2(s.validation_fraction * 100.0), c.validation),
        format!("{}% / {}", display2(s.test_fraction * 100.0), c.test),
    ));
    out.push_str(&format!(
        "{:<12} {:>14} {:>14} {:>14}\n",
        "MSE (bpm²)",
        display2(r.train.mse),
        display2(r.validation.mse),
        display2(r.test.mse)
    ));
    out.push_str(&format!(
        "{:<12} {:>14} {:>14} {:>14}\n",
        "R",
        opt4(r.train.pearson_r),
        opt4(r.validation.pearson_r),
        opt4(r.test.pearson_r)
    ));
    out.push_str(&format!("{:<12} {:>14}\n", "MAE (bpm)", display2(r.test.mae)));
    out.push_str(&format!("{:<12} {:>14}\n", "MAPE %", display2(r.test.mape)));
    out.push_str(&format!("{:<12} {:>14}\n", "Accuracy %", display2(r.test.accuracy)));
    out.push_str(&format!("{:<12} {:>14}\n", "Efficiency", r.test.efficiency_display()));
    out.push_str(&format!(
        "{:<12} best epoch {}, stopped at {} ({:?})\n",
        "training", result.trace.best_epoch, result.trace.stop_epoch, result.trace.stop_reason
    ));
    out
}

/// Rendered SVG documents for one scenario, keyed by plot name.
pub fn scenario_plots(result: &SessionResult, timestamps: Option<&[f64]>) -> Vec<(&'static str, String)> {
    let mut plots = vec![
        ("performance", plot::performance_chart(&result.trace).render()),
        ("training_state", plot::training_state_chart(&result.trace)),
        ("autocorrelation", plot::autocorrelation_chart(result).render()),
    ];
    if let Some(series) = &result.series {
        plots.push(("error_histogram", plot::error_histogram_chart(series).render()));
        let r = &result.reports;
        plots.push((
            "regression",
            plot::render_stacked(&[
                plot::regression_chart("Training", &series.train, r.train.pearson_r),
                plot::regression_chart("Validation", &series.validation, r.validation.pearson_r),
                plot::regression_chart("Test", &series.test, r.test.pearson_r),
            ]),
        ));
        plots.push(("response", plot::response_chart(series, timestamps)));
    }
    plots
}

pub fn plot_path(dir: &Path, scenario: usize, name: &str) -> PathBuf {
    dir.join("plots").join(format!("scenario_{scenario}_{name}.svg"))
}

/// Writes every `(path, contents)` pair, creating parent directories.
pub fn write_all(files: &[(PathBuf, String)]) -> Result<()> {
    for (path, contents) in files {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
    }
    Ok(())
}

/// Trace summary line used by the CLI.
pub fn trace_summary(trace: &TrainTrace) -> String {
    format!(
        "best epoch {} (validation MSE {:.6}), stopped at epoch {} ({:?})",
        trace.best_epoch, trace.records[trace.best_epoch].validation_mse, trace.stop_epoch, trace.stop_reason
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_away_rounding() {
        assert_eq!(round_half_away(2.5, 0), 3.0);
        assert_eq!(round_half_away(-2.5, 0), -3.0);
        assert_eq!(display2(79.165), "79.17");
        assert_eq!(display4(0.99765), "0.9977");
    }

    #[test]
    fn csv_header_and_error_rows() {
        let outcomes = vec![ScenarioOutcome {
            id: 1,
            split: SplitSpec::new(0.3, 0.35, 0.35).unwrap(),
            result: Err(crate::Error::DegenerateSplit("train")),
        }];
        let csv = scenarios_csv(&outcomes).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), SCENARIO_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "1,30.00,35.00,35.00,,,,,,,,,");
        assert!(scenarios_table(&outcomes).contains("failed"));
    }
}
