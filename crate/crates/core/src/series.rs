//! Heart-rate series: CSV ingestion, the synthetic generator, lag
//! embeddings and contiguous block splits.

use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::PortableRng;

/// Observed heart rate in beats per minute, optionally timestamped in
/// seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesData {
    timestamps: Option<Vec<f64>>,
    values: Vec<f64>,
    source_label: String,
}

impl SeriesData {
    pub fn new(values: Vec<f64>, timestamps: Option<Vec<f64>>, source_label: impl Into<String>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "heart rate at index {i} is {}, values must be finite and positive",
                values[i]
            )));
        }
        if let Some(ts) = &timestamps {
            if ts.len() != values.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} timestamps for {} values",
                    ts.len(),
                    values.len()
                )));
            }
            if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || ts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(
                    "timestamps must be non-negative and strictly increasing".into(),
                ));
            }
        }
        Ok(Self {
            timestamps,
            values,
            source_label: source_label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes the canonical two-column `t_s,hr_bpm` CSV. Untimestamped
    /// series get `t_s = index`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "hr_bpm"])?;
        for (i, v) in self.values.iter().enumerate() {
            let t = self.timestamps.as_ref().map_or(i as f64, |ts| ts[i]);
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    /// Plain non-negative integers select by index, anything else by name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(s.parse::<usize>()
            .map(ColumnSelector::Index)
            .unwrap_or_else(|_| ColumnSelector::Name(s.to_string())))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NanPolicy {
    #[default]
    DropRow,
}

/// Timestamp column picked up automatically when a header is present.
pub const TIMESTAMP_COLUMN: &str = "t_s";

fn parse_cell(cell: Option<&str>) -> Option<f64> {
    cell.and_then(|c| c.trim().parse::<f64>().ok())
}

/// Reads one numeric column. A header row is assumed iff the selected
/// column's first cell is non-numeric (always when selecting by name).
/// Rows whose cell is empty, non-numeric, non-finite or ≤ 0 are dropped.
pub fn load_csv(path: &Path, column: &ColumnSelector, nan_policy: NanPolicy) -> Result<SeriesData> {
    let NanPolicy::DropRow = nan_policy;
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = reader.records();

    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::EmptySeries),
    };
    let (col, time_col, header_row) = match column {
        ColumnSelector::Name(name) => {
            let col = first
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::ColumnNotFound(name.clone()))?;
            (col, first.iter().position(|c| c == TIMESTAMP_COLUMN), true)
        }
        ColumnSelector::Index(i) => {
            if *i >= first.len() {
                return Err(Error::ColumnNotFound(format!(
                    "index {i} (file has {} columns)",
                    first.len()
                )));
            }
            let header = parse_cell(first.get(*i)).is_none();
            let time_col = if header {
                first.iter().position(|c| c == TIMESTAMP_COLUMN)
            } else {
                None
            };
            (*i, time_col, header)
        }
    };

    let mut values = Vec::new();
    let mut times = Vec::new();
    let rows = (!header_row).then_some(Ok(first)).into_iter().chain(records);
    for record in rows {
        let record = record?;
        let Some(v) = parse_cell(record.get(col)) else {
            continue;
        };
        if !(v.is_finite() && v > 0.0) {
            continue;
        }
        values.push(v);
        times.push(time_col.and_then(|tc| parse_cell(record.get(tc))));
    }
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }

    let timestamps: Option<Vec<f64>> = times.into_iter().collect();
    let timestamps =
        timestamps.filter(|ts| ts.iter().all(|t| t.is_finite() && *t >= 0.0) && ts.windows(2).all(|w| w[0] < w[1]));
    SeriesData::new(values, timestamps, path.display().to_string())
}

/// Parameters of the synthetic heart-rate generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub seed: u64,
    pub n: usize,
    pub base_bpm: f64,
    pub drift_bpm_per_ks: f64,
    pub modulation_amp: f64,
    pub modulation_period_s: f64,
    pub noise_std: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 1,
            n: 6312,
            base_bpm: 75.0,
            drift_bpm_per_ks: 0.0,
            modulation_amp: 5.0,
            modulation_period_s: 240.0,
            noise_std: 1.0,
        }
    }
}

/// Lower clamp applied to every synthetic sample.
pub const SYNTH_FLOOR_BPM: f64 = 20.0;

/// One sample per second:
/// `base + drift·i/1000 + amp·sin(2πi/period) + N(0, noise_std)`,
/// clamped to at least [`SYNTH_FLOOR_BPM`].
pub fn synth_heart_rate(params: &SynthParams) -> Result<SeriesData> {
    if params.n < 10 {
        return Err(Error::InvalidArgument(format!(
            "n must be at least 10, got {}",
            params.n
        )));
    }
    if !(params.base_bpm.is_finite() && params.base_bpm > 0.0) {
        return Err(Error::InvalidArgument("base_bpm must be positive".into()));
    }
    if !(params.modulation_period_s.is_finite() && params.modulation_period_s > 0.0) {
        return Err(Error::InvalidArgument("modulation_period_s must be positive".into()));
    }
    if !(params.noise_std.is_finite() && params.noise_std >= 0.0)
        || !params.drift_bpm_per_ks.is_finite()
        || !params.modulation_amp.is_finite()
    {
        return Err(Error::InvalidArgument(
            "drift, amplitude and noise must be finite, noise ≥ 0".into(),
        ));
    }

    let mut rng = PortableRng::new(params.seed);
    let values = (0..params.n)
        .map(|i| {
            let t = i as f64;
            let noise = rng.standard_normal() * params.noise_std;
            let v = params.base_bpm
                + params.drift_bpm_per_ks * (t / 1000.0)
                + params.modulation_amp * (std::f64::consts::TAU * t / params.modulation_period_s).sin()
                + noise;
            v.max(SYNTH_FLOOR_BPM)
        })
        .collect();
    let timestamps = (0..params.n).map(|i| i as f64).collect();
    SeriesData::new(values, Some(timestamps), format!("synthetic(seed={})", params.seed))
}

/// Lagged inputs paired with next-step targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LagEmbedding {
    /// `N × |lags|`; column `j` holds the value `lags[j]` steps back.
    pub inputs: DMatrix<f64>,
    pub targets: DVector<f64>,
    /// Index in the source series of the first target.
    pub first_target_index: usize,
}

impl LagEmbedding {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Rows `range` as an owned `(inputs, targets)` pair.
    pub fn rows(&self, range: Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
        let len = range.len();
        (
            self.inputs.rows(range.start, len).into_owned(),
            self.targets.rows(range.start, len).into_owned(),
        )
    }
}

pub fn embed(series: &[f64], lags: &[usize]) -> Result<LagEmbedding> {
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if lags.is_empty() || series.len() <= max_lag {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            needed: max_lag + 1,
        });
    }
    let n = series.len() - max_lag;
    let inputs = DMatrix::from_fn(n, lags.len(), |i, j| series[max_lag + i - lags[j]]);
    let targets = DVector::from_column_slice(&series[max_lag..]);
    Ok(LagEmbedding {
        inputs,
        targets,
        first_target_index: max_lag,
    })
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let spec = Self {
            train_fraction: train,
            validation_fraction: validation,
            test_fraction: test,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_fraction, self.validation_fraction, self.test_fraction];
        if fr.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::Config(format!("split fractions must lie in (0, 1), got {fr:?}")));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {fr:?}")));
        }
        Ok(())
    }

    /// The seven scenarios sweeping training share from 90% down to 30%.
    pub fn table4() -> Vec<SplitSpec> {
        [
            (0.90, 0.05, 0.05),
            (0.80, 0.10, 0.10),
            (0.70, 0.15, 0.15),
            (0.60, 0.20, 0.20),
            (0.50, 0.25, 0.25),
            (0.40, 0.30, 0.30),
            (0.30, 0.35, 0.35),
        ]
        .into_iter()
        .map(|(a, b, c)| SplitSpec::new(a, b, c).expect("preset is valid"))
        .collect()
    }

    /// The two-scenario 70/15/15 vs 30/35/35 comparison.
    pub fn table7() -> Vec<SplitSpec> {
        vec![
            SplitSpec::new(0.70, 0.15, 0.15).expect("preset is valid"),
            SplitSpec::new(0.30, 0.35, 0.35).expect("preset is valid"),
        ]
    }
}

/// Contiguous half-open ranges in temporal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl SplitIndices {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }

    pub fn total(&self) -> usize {
        self.test.end
    }
}

/// Rounds half away from zero, treating products within 1e-9 of a half as
/// exact halves so that e.g. `0.35 · 90` (31.499999999999996) rounds to 32.
fn round_half_away(x: f64) -> f64 {
    let floor = x.floor();
    if (x - floor - 0.5).abs() <= 1e-9 {
        floor + 1.0
    } else {
        x.round()
    }
}

/// Validation and test counts are `round(fraction · n)`; training takes the
/// remainder.
pub fn split_block(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 samples to split, got {n}"
        )));
    }
    let validation = round_half_away(spec.validation_fraction * n as f64) as usize;
    let test = round_half_away(spec.test_fraction * n as f64) as usize;
    if validation < 1 {
        return Err(Error::DegenerateSplit("validation"));
    }
    if test < 1 {
        return Err(Error::DegenerateSplit("test"));
    }
    let train = n
        .checked_sub(validation + test)
        .filter(|t| *t >= 1)
        .ok_or(Error::DegenerateSplit("train"))?;
    Ok(SplitIndices {
        train: 0..train,
        validation: train..train + validation,
        test: train + validation..n,
    })
}

/// Splits a raw series of `n` samples with [`split_block`] and maps the
/// result onto the embedded row axis: row `i` (target index `max_lag + i`)
/// belongs to whichever raw segment holds its target. Only the training
/// segment loses rows, the `max_lag` leading samples that have no full lag
/// history.
pub fn split_embedded(n: usize, max_lag: usize, spec: &SplitSpec) -> Result<(SplitIndices, SplitIndices)> {
    let raw = split_block(n, spec)?;
    let train_rows = raw
        .train
        .len()
        .checked_sub(max_lag)
        .filter(|t| *t >= 1)
        .ok_or(Error::DegenerateSplit("train"))?;
    let shift = |r: &Range<usize>| r.start - max_lag..r.end - max_lag;
    let embedded = SplitIndices {
        train: 0..train_rows,
        validation: shift(&raw.validation),
        test: shift(&raw.test),
    };
    Ok((raw, embedded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_named_column() {
        let f = write_tmp("t_s,HR\n0,72\n1,75\n2,71\n");
        let s = load_csv(f.path(), &ColumnSelector::Name("HR".into()), NanPolicy::DropRow).unwrap();
        assert_eq!(s.values(), &[72.0, 75.0, 71.0]);
        assert_eq!(s.timestamps(), Some(&[0.0, 1.0, 2.0][..]));
    }

    #[test]
    fn drops_nan_rows() {
        let f = write_tmp("t_s,HR\n0,72\n1,NaN\n2,71\n");
        let s = load_csv(f.path(), &ColumnSelector::Name("HR".into()), NanPolicy::DropRow).unwrap();
        assert_eq!(s.values(), &[72.0, 71.0]);
    }

    #[test]
    fn drops_empty_non_numeric_and_non_positive() {
        let f = write_tmp("HR\n72\n\nabc\n0\n-5\ninf\n80\n");
        let s = load_csv(f.path(), &ColumnSelector::Name("HR".into()), NanPolicy::DropRow).unwrap();
        assert_eq!(s.values(), &[72.0, 80.0]);
    }

    #[test]
    fn missing_column() {
        let f = write_tmp("t_s,HR\n0,72\n");
        let err = load_csv(f.path(), &ColumnSelector::Name("XYZ".into()), NanPolicy::DropRow);
        assert!(matches!(err, Err(Error::ColumnNotFound(_))));
        let err = load_csv(f.path(), &ColumnSelector::Index(5), NanPolicy::DropRow);
        assert!(matches!(err, Err(Error::ColumnNotFound(_))));
    }

    #[test]
    fn headerless_by_index() {
        let f = write_tmp("0,72\n1,75\n2,71\n");
        let s = load_csv(f.path(), &ColumnSelector::Index(1), NanPolicy::DropRow).unwrap();
        assert_eq!(s.values(), &[72.0, 75.0, 71.0]);
        assert_eq!(s.timestamps(), None);
    }

    #[test]
    fn header_detected_by_index() {
        let f = write_tmp("time,hr\n0,72\n1,75\n");
        let s = load_csv(f.path(), &ColumnSelector::Index(1), NanPolicy::DropRow).unwrap();
        assert_eq!(s.values(), &[72.0, 75.0]);
    }

    #[test]
    fn file_not_found() {
        let err = load_csv(
            Path::new("/nonexistent/hr.csv"),
            &ColumnSelector::Index(0),
            NanPolicy::DropRow,
        );
        assert!(matches!(err, Err(Error::FileNotFound(_))));
    }

    #[test]
    fn no_usable_rows() {
        let f = write_tmp("HR\nNaN\n\n");
        let err = load_csv(f.path(), &ColumnSelector::Name("HR".into()), NanPolicy::DropRow);
        assert!(matches!(err, Err(Error::EmptySeries)));
    }

    #[test]
    fn selector_parsing() {
        assert_eq!("3".parse::<ColumnSelector>().unwrap(), ColumnSelector::Index(3));
        assert_eq!(
            "HR".parse::<ColumnSelector>().unwrap(),
            ColumnSelector::Name("HR".into())
        );
    }

    #[test]
    fn synth_constant_without_noise() {
        let s = synth_heart_rate(&SynthParams {
            n: 50,
            base_bpm: 72.0,
            modulation_amp: 0.0,
            noise_std: 0.0,
            ..SynthParams::default()
        })
        .unwrap();
        assert!(s.values().iter().all(|&v| v == 72.0));
    }

    #[test]
    fn synth_deterministic() {
        let p = SynthParams::default();
        assert_eq!(synth_heart_rate(&p).unwrap(), synth_heart_rate(&p).unwrap());
        let q = SynthParams { seed: 2, ..p.clone() };
        assert_ne!(synth_heart_rate(&p).unwrap(), synth_heart_rate(&q).unwrap());
    }

    #[test]
    fn synth_mean_near_base() {
        let s = synth_heart_rate(&SynthParams::default()).unwrap();
        assert_eq!(s.len(), 6312);
        // Kahan summation, independent of the iterator sum used elsewhere.
        let (mut sum, mut c) = (0.0f64, 0.0f64);
        for &v in s.values() {
            let y = v - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        let mean = sum / s.len() as f64;
        assert!((mean - 75.0).abs() <= 1.0, "{mean}");
    }

    #[test]
    fn synth_clamps_and_validates() {
        let s = synth_heart_rate(&SynthParams {
            n: 20,
            base_bpm: 21.0,
            noise_std: 10.0,
            ..SynthParams::default()
        })
        .unwrap();
        assert!(s.values().iter().all(|&v| v >= SYNTH_FLOOR_BPM));
        assert!(synth_heart_rate(&SynthParams {
            n: 9,
            ..SynthParams::default()
        })
        .is_err());
        assert!(synth_heart_rate(&SynthParams {
            base_bpm: 0.0,
            ..SynthParams::default()
        })
        .is_err());
    }

    #[test]
    fn embed_single_lag() {
        let e = embed(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1]).unwrap();
        assert_eq!(e.inputs.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.targets.as_slice(), &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(e.first_target_index, 1);
    }

    #[test]
    fn embed_two_lags() {
        let e = embed(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1, 2]).unwrap();
        assert_eq!(e.inputs, DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 3.0, 2.0, 4.0, 3.0]));
        assert_eq!(e.targets.as_slice(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn embed_too_short() {
        assert!(matches!(
            embed(&[1.0, 2.0, 3.0], &[1, 2, 3]),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn reference_split_counts() {
        let s = split_block(6312, &SplitSpec::new(0.30, 0.35, 0.35).unwrap()).unwrap();
        assert_eq!(s.counts(), (1894, 2209, 2209));
        let s = split_block(17007, &SplitSpec::new(0.70, 0.15, 0.15).unwrap()).unwrap();
        assert_eq!(s.counts(), (11905, 2551, 2551));
        let s = split_block(17007, &SplitSpec::new(0.30, 0.35, 0.35).unwrap()).unwrap();
        assert_eq!(s.counts(), (5103, 5952, 5952));
        let s = split_block(10, &SplitSpec::new(0.8, 0.1, 0.1).unwrap()).unwrap();
        assert_eq!(s.counts(), (8, 1, 1));
    }

    #[test]
    fn table4_training_counts() {
        // Hand computation: round(f·6312) for validation and test, train gets the rest.
        // 0.05→316, 0.10→631, 0.15→947, 0.20→1262, 0.25→1578, 0.30→1894, 0.35→2209
        let expected = [5680, 5050, 4418, 3788, 3156, 2524, 1894];
        let got: Vec<usize> = SplitSpec::table4()
            .iter()
            .map(|s| split_block(6312, s).unwrap().train.len())
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn near_half_products_round_up() {
        assert!(0.35 * 90.0 < 31.5);
        let s = split_block(90, &SplitSpec::new(0.30, 0.35, 0.35).unwrap()).unwrap();
        assert_eq!(s.counts(), (26, 32, 32));
    }

    #[test]
    fn degenerate_split() {
        let spec = SplitSpec::new(0.98, 0.01, 0.01).unwrap();
        assert!(matches!(split_block(20, &spec), Err(Error::DegenerateSplit(_))));
        assert!(split_block(9, &SplitSpec::new(0.8, 0.1, 0.1).unwrap()).is_err());
    }

    #[test]
    fn bad_fractions() {
        assert!(SplitSpec::new(0.5, 0.3, 0.3).is_err());
        assert!(SplitSpec::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn embedded_split_keeps_validation_and_test_counts() {
        let (raw, emb) = split_embedded(6312, 2, &SplitSpec::new(0.30, 0.35, 0.35).unwrap()).unwrap();
        assert_eq!(raw.counts(), (1894, 2209, 2209));
        assert_eq!(emb.counts(), (1892, 2209, 2209));
        assert_eq!(emb.total(), 6310);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 10usize..50_000, a in 1u32..98, b in 1u32..98) {
            prop_assume!(a + b < 99);
            let spec = SplitSpec::new(a as f64 / 100.0, b as f64 / 100.0, (100 - a - b) as f64 / 100.0);
            prop_assume!(spec.is_ok());
            if let Ok(s) = split_block(n, &spec.unwrap()) {
                prop_assert_eq!(s.train.start, 0);
                prop_assert_eq!(s.train.end, s.validation.start);
                prop_assert_eq!(s.validation.end, s.test.start);
                prop_assert_eq!(s.test.end, n);
                prop_assert!(!s.train.is_empty() && !s.validation.is_empty() && !s.test.is_empty());
            }
        }

        #[test]
        fn embedding_alignment(series in proptest::collection::vec(40.0..180.0f64, 8..80), lag_mask in 1u8..16) {
            let lags: Vec<usize> = (1..=4).filter(|l| lag_mask & (1 << (l - 1)) != 0).collect();
            let e = embed(&series, &lags).unwrap();
            prop_assert_eq!(e.len(), series.len() - lags.last().unwrap());
            for i in 0..e.len() {
                prop_assert_eq!(e.targets[i], series[e.first_target_index + i]);
                for (j, lag) in lags.iter().enumerate() {
                    prop_assert_eq!(e.inputs[(i, j)], series[e.first_target_index + i - lag]);
                }
            }
        }
    }
}
