//! Static SVG charts built from four primitives: polylines, scatter points,
//! stems and bars. Output is deterministic for identical input.

use std::fmt::Write as _;

use crate::metrics::HistogramBin;
use crate::session::{SessionResult, SplitSeries, TrainTrace};

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

pub const TRAIN_COLOR: &str = "#1f77b4";
pub const VALIDATION_COLOR: &str = "#2ca02c";
pub const TEST_COLOR: &str = "#d62728";
const NEUTRAL: &str = "#555555";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mark {
    Line,
    Scatter,
    Stem,
    /// Bars centred on x with the given width in data units.
    Bars(f64),
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: String,
    pub mark: Mark,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, color: &str, mark: Mark, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            color: color.to_string(),
            mark,
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Bars in series with `Mark::Bars` stack on top of earlier bar series.
    pub stack_bars: bool,
    pub notes: Vec<String>,
}

impl Chart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn render(&self) -> String {
        render_stacked(std::slice::from_ref(self))
    }
}

/// Renders panels top to bottom in one SVG document.
pub fn render_stacked(charts: &[Chart]) -> String {
    let height = PANEL_HEIGHT * charts.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, chart) in charts.iter().enumerate() {
        render_panel(&mut svg, chart, PANEL_HEIGHT * i as f64);
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.0e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Round tick positions with a 1-2-5 step.
fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    top: f64,
    log_y: bool,
}

impl Frame {
    fn plot_w() -> f64 {
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    }

    fn plot_h() -> f64 {
        PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    }

    fn tx(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * Self::plot_w()
    }

    fn ty(&self, y: f64) -> f64 {
        let (y, y0, y1) = if self.log_y {
            (y.max(f64::MIN_POSITIVE).log10(), self.y0.log10(), self.y1.log10())
        } else {
            (y, self.y0, self.y1)
        };
        self.top + MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * Self::plot_h()
    }
}

fn data_bounds(chart: &Chart) -> (f64, f64, f64, f64) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    let mut stack_tops: Vec<(f64, f64)> = Vec::new();
    for s in &chart.series {
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) || (chart.log_y && y <= 0.0) {
                continue;
            }
            let (lo_x, hi_x) = match s.mark {
                Mark::Bars(w) => (x - w / 2.0, x + w / 2.0),
                _ => (x, x),
            };
            xs = (xs.0.min(lo_x), xs.1.max(hi_x));
            let mut top = y;
            if chart.stack_bars && matches!(s.mark, Mark::Bars(_)) {
                match stack_tops.iter_mut().find(|(sx, _)| *sx == x) {
                    Some(entry) => {
                        entry.1 += y;
                        top = entry.1;
                    }
                    None => stack_tops.push((x, y)),
                }
            }
            ys = (ys.0.min(y), ys.1.max(top));
            if matches!(s.mark, Mark::Stem | Mark::Bars(_)) && !chart.log_y {
                ys = (ys.0.min(0.0), ys.1.max(0.0));
            }
        }
    }
    if !xs.0.is_finite() {
        xs = (0.0, 1.0);
        ys = if chart.log_y { (0.1, 1.0) } else { (0.0, 1.0) };
    }
    if xs.0 == xs.1 {
        xs = (xs.0 - 0.5, xs.1 + 0.5);
    }
    if chart.log_y {
        let lo = 10f64.powf(ys.0.log10().floor());
        let hi = 10f64.powf(ys.1.log10().ceil());
        return (xs.0, xs.1, lo, if hi > lo { hi } else { lo * 10.0 });
    }
    if ys.0 == ys.1 {
        ys = (ys.0 - 0.5, ys.1 + 0.5);
    }
    let pad = 0.05 * (ys.1 - ys.0);
    (xs.0, xs.1, ys.0 - pad, ys.1 + pad)
}

fn render_panel(svg: &mut String, chart: &Chart, top: f64) {
    let (x0, x1, y0, y1) = data_bounds(chart);
    let f = Frame {
        x0,
        x1,
        y0,
        y1,
        top,
        log_y: chart.log_y,
    };
    let (left, right) = (MARGIN_LEFT, MARGIN_LEFT + Frame::plot_w());
    let (ptop, pbottom) = (top + MARGIN_TOP, top + MARGIN_TOP + Frame::plot_h());

    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14" font-weight="bold">{}</text>"#,
        fmt((left + right) / 2.0),
        fmt(top + 22.0),
        escape(&chart.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        fmt(left),
        fmt(ptop),
        fmt(Frame::plot_w()),
        fmt(Frame::plot_h())
    );

    for x in nice_ticks(x0, x1, 6) {
        let px = f.tx(x);
        let _ = writeln!(
            svg,
            r##"<line x1="{p}" y1="{}" x2="{p}" y2="{}" stroke="#dddddd"/><text x="{p}" y="{}" text-anchor="middle">{}</text>"##,
            fmt(ptop),
            fmt(pbottom),
            fmt(pbottom + 16.0),
            tick_label(x),
            p = fmt(px)
        );
    }
    let y_ticks: Vec<f64> = if chart.log_y {
        let (a, b) = (y0.log10().round() as i32, y1.log10().round() as i32);
        (a..=b).map(|e| 10f64.powi(e)).collect()
    } else {
        nice_ticks(y0, y1, 6)
    };
    for y in y_ticks {
        let py = f.ty(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{p}" x2="{}" y2="{p}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            fmt(left),
            fmt(right),
            fmt(left - 6.0),
            fmt(py + 4.0),
            tick_label(y),
            p = fmt(py)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        fmt((left + right) / 2.0),
        fmt(pbottom + 38.0),
        escape(&chart.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" text-anchor="middle" transform="rotate(-90 {x} {y})">{}</text>"#,
        escape(&chart.y_label),
        x = fmt(left - 55.0),
        y = fmt((ptop + pbottom) / 2.0)
    );

    let mut stack: Vec<(f64, f64)> = Vec::new();
    for s in &chart.series {
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let pts = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && !(chart.log_y && *y <= 0.0));
        match s.mark {
            Mark::Line => {
                let path: Vec<String> = pts
                    .map(|&(x, y)| format!("{},{}", fmt(f.tx(x)), fmt(f.ty(y))))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                    s.color,
                    path.join(" ")
                );
            }
            Mark::Scatter => {
                let _ = writeln!(svg, r#"<g fill="{}" fill-opacity="0.6">"#, s.color);
                for &(x, y) in pts {
                    let _ = writeln!(svg, r#"<circle cx="{}" cy="{}" r="2"/>"#, fmt(f.tx(x)), fmt(f.ty(y)));
                }
                svg.push_str("</g>\n");
            }
            Mark::Stem => {
                let _ = writeln!(svg, r#"<g stroke="{}" fill="{}">"#, s.color, s.color);
                let base = if chart.log_y { y0 } else { 0.0 };
                for &(x, y) in pts {
                    let (px, py) = (fmt(f.tx(x)), fmt(f.ty(y)));
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{px}" y1="{}" x2="{px}" y2="{py}"/><circle cx="{px}" cy="{py}" r="3"/>"#,
                        fmt(f.ty(base))
                    );
                }
                svg.push_str("</g>\n");
            }
            Mark::Bars(w) => {
                let _ = writeln!(svg, r#"<g fill="{}" stroke="white" stroke-width="0.5">"#, s.color);
                for &(x, y) in pts {
                    let base = if chart.stack_bars {
                        match stack.iter_mut().find(|(sx, _)| *sx == x) {
                            Some(entry) => {
                                let b = entry.1;
                                entry.1 += y;
                                b
                            }
                            None => {
                                stack.push((x, y));
                                0.0
                            }
                        }
                    } else {
                        0.0
                    };
                    let (xa, xb) = (f.tx(x - w / 2.0), f.tx(x + w / 2.0));
                    let (ya, yb) = (f.ty(base + y), f.ty(base));
                    let _ = writeln!(
                        svg,
                        r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
                        fmt(xa),
                        fmt(ya.min(yb)),
                        fmt(xb - xa),
                        fmt((yb - ya).abs())
                    );
                }
                svg.push_str("</g>\n");
            }
        }
    }

    let legend_x = right + 12.0;
    for (i, s) in chart.series.iter().enumerate() {
        let y = ptop + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            fmt(legend_x),
            fmt(y - 10.0),
            s.color,
            fmt(legend_x + 18.0),
            fmt(y),
            escape(&s.name)
        );
    }
    for (i, note) in chart.notes.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            fmt(left + 8.0),
            fmt(ptop + 16.0 + 16.0 * i as f64),
            escape(note)
        );
    }
}

/// Keeps at most `max` points by taking every k-th one.
fn thin(points: Vec<(f64, f64)>, max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max {
        return points;
    }
    let stride = points.len().div_ceil(max);
    points.into_iter().step_by(stride).collect()
}

/// Training, validation MSE per epoch on a log axis with the best epoch
/// marked.
pub fn performance_chart(trace: &TrainTrace) -> Chart {
    let epochs = |f: fn(&crate::session::EpochRecord) -> f64| -> Vec<(f64, f64)> {
        trace.records.iter().map(|r| (r.epoch as f64, f(r))).collect()
    };
    let best = &trace.records[trace.best_epoch];
    let (lo, hi) = trace
        .records
        .iter()
        .flat_map(|r| [r.train_mse, r.validation_mse])
        .filter(|v| *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let marker = if lo.is_finite() {
        vec![(best.epoch as f64, lo), (best.epoch as f64, hi)]
    } else {
        Vec::new()
    };
    let mut chart = Chart::new(
        format!(
            "Best validation performance {:.4} at epoch {}",
            best.validation_mse, best.epoch
        ),
        format!("{} epochs", trace.stop_epoch),
        "Mean squared error (normalized)",
    )
    .with(Series::new("Train", TRAIN_COLOR, Mark::Line, epochs(|r| r.train_mse)))
    .with(Series::new(
        "Validation",
        VALIDATION_COLOR,
        Mark::Line,
        epochs(|r| r.validation_mse),
    ))
    .with(Series::new("Best", NEUTRAL, Mark::Line, marker).dashed());
    chart.log_y = true;
    chart
}

/// Gradient, damping and validation-check panels.
pub fn training_state_chart(trace: &TrainTrace) -> String {
    let pts = |f: fn(&crate::session::EpochRecord) -> f64| -> Vec<(f64, f64)> {
        trace.records.iter().map(|r| (r.epoch as f64, f(r))).collect()
    };
    let last = trace.records.last().expect("trace has the initial record");
    let mut gradient = Chart::new(
        format!("Gradient = {:.4e} at epoch {}", last.gradient_inf_norm, last.epoch),
        "Epoch",
        "max |gradient|",
    )
    .with(Series::new(
        "Gradient",
        TRAIN_COLOR,
        Mark::Line,
        pts(|r| r.gradient_inf_norm),
    ));
    gradient.log_y = true;
    let mut mu = Chart::new(format!("Mu = {:.1e} at epoch {}", last.mu, last.epoch), "Epoch", "mu").with(Series::new(
        "Mu",
        VALIDATION_COLOR,
        Mark::Line,
        pts(|r| r.mu),
    ));
    mu.log_y = true;
    let checks = Chart::new(
        format!("Validation checks = {} at epoch {}", last.validation_fails, last.epoch),
        "Epoch",
        "Consecutive fails",
    )
    .with(Series::new(
        "Checks",
        TEST_COLOR,
        Mark::Stem,
        pts(|r| r.validation_fails as f64),
    ));
    render_stacked(&[gradient, mu, checks])
}

fn count_into(bins: &[HistogramBin], errors: &[f64]) -> Vec<usize> {
    let lo = bins[0].lower;
    let hi = bins[bins.len() - 1].upper;
    let width = (hi - lo) / bins.len() as f64;
    let mut counts = vec![0; bins.len()];
    for &e in errors {
        let k = (((e - lo) / width).floor().max(0.0) as usize).min(bins.len() - 1);
        counts[k] += 1;
    }
    counts
}

/// 20-bin histogram over all errors, stacked by split.
pub fn error_histogram_chart(series: &crate::session::SessionSeries) -> Chart {
    let all: Vec<f64> = [&series.train, &series.validation, &series.test]
        .iter()
        .flat_map(|s| s.errors())
        .collect();
    let bins =
        crate::metrics::error_histogram(&all, crate::session::HISTOGRAM_BINS).expect("session has at least one error");
    let width = bins[0].upper - bins[0].lower;
    let centers: Vec<f64> = bins.iter().map(|b| (b.lower + b.upper) / 2.0).collect();
    let bars = |name: &str, color: &str, s: &SplitSeries| {
        let counts = count_into(&bins, &s.errors());
        Series::new(
            name,
            color,
            Mark::Bars(width),
            centers.iter().zip(counts).map(|(&c, n)| (c, n as f64)).collect(),
        )
    };
    let peak = bins.iter().map(|b| b.count).max().unwrap_or(0) as f64;
    let mut chart = Chart::new(
        format!("Error histogram with {} bins", bins.len()),
        "Errors = targets - outputs (bpm)",
        "Instances",
    )
    .with(bars("Training", TRAIN_COLOR, &series.train))
    .with(bars("Validation", VALIDATION_COLOR, &series.validation))
    .with(bars("Test", TEST_COLOR, &series.test))
    .with(Series::new(
        "Zero error",
        "#ff9900",
        Mark::Line,
        vec![(0.0, 0.0), (0.0, peak)],
    ));
    chart.stack_bars = true;
    chart
}

/// Output vs target scatter with least-squares line and R.
pub fn regression_chart(split_name: &str, s: &SplitSeries, r: Option<f64>) -> Chart {
    let n = s.targets.len() as f64;
    let mx = s.targets.iter().sum::<f64>() / n;
    let my = s.predictions.iter().sum::<f64>() / n;
    let sxx: f64 = s.targets.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = s
        .targets
        .iter()
        .zip(&s.predictions)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let (lo, hi) = s
        .targets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let points: Vec<(f64, f64)> = s.targets.iter().copied().zip(s.predictions.iter().copied()).collect();
    let r_text = r.map_or("undefined".to_string(), |r| format!("{r:.4}"));
    Chart::new(format!("{split_name}: R={r_text}"), "Target (bpm)", "Output (bpm)")
        .with(Series::new("Data", TRAIN_COLOR, Mark::Scatter, thin(points, 3000)))
        .with(Series::new(
            "Fit",
            TEST_COLOR,
            Mark::Line,
            vec![(lo, slope * lo + intercept), (hi, slope * hi + intercept)],
        ))
        .with(Series::new("Y = T", NEUTRAL, Mark::Line, vec![(lo, lo), (hi, hi)]).dashed())
        .note(format!("Output ~= {slope:.3}*Target + {intercept:.3}"))
}

/// Targets and outputs over time with an error panel underneath.
pub fn response_chart(series: &crate::session::SessionSeries, timestamps: Option<&[f64]>) -> String {
    let at = |i: usize| timestamps.map_or(i as f64, |t| t[i]);
    let splits = [
        ("Training", TRAIN_COLOR, &series.train),
        ("Validation", VALIDATION_COLOR, &series.validation),
        ("Test", TEST_COLOR, &series.test),
    ];
    let mut response = Chart::new("Response of output element", "Time (s)", "Heart rate (bpm)");
    let mut errors = Chart::new("Errors", "Time (s)", "Targets - outputs (bpm)");
    let mut targets = Vec::new();
    for (name, color, s) in splits {
        targets.extend(s.targets.iter().enumerate().map(|(k, &y)| (at(s.first_index + k), y)));
        let outputs = s
            .predictions
            .iter()
            .enumerate()
            .map(|(k, &p)| (at(s.first_index + k), p))
            .collect();
        response = response.with(Series::new(format!("{name} outputs"), color, Mark::Line, outputs));
        let errs = s
            .errors()
            .into_iter()
            .enumerate()
            .map(|(k, e)| (at(s.first_index + k), e))
            .collect();
        errors = errors.with(Series::new(name, color, Mark::Line, errs));
    }
    response
        .series
        .insert(0, Series::new("Targets", "#aaaaaa", Mark::Line, targets));
    render_stacked(&[response, errors])
}

/// Symmetric stem plot of the raw error autocovariance with the 95% band.
pub fn autocorrelation_chart(result: &SessionResult) -> Chart {
    let ac = &result.diagnostics.error_autocorrelation;
    let max_lag = ac.values.last().map_or(0, |v| v.0) as f64;
    let stems: Vec<(f64, f64)> = ac
        .values
        .iter()
        .rev()
        .filter(|(k, _)| *k > 0)
        .map(|&(k, c)| (-(k as f64), c))
        .chain(ac.values.iter().map(|&(k, c)| (k as f64, c)))
        .collect();
    let band = ac.confidence_limit;
    Chart::new("Autocorrelation of error", "Lag", "Correlation (bpm²)")
        .with(Series::new("Correlations", TRAIN_COLOR, Mark::Stem, stems))
        .with(
            Series::new(
                "Confidence limit",
                TEST_COLOR,
                Mark::Line,
                vec![(-max_lag, band), (max_lag, band)],
            )
            .dashed(),
        )
        .with(Series::new("", TEST_COLOR, Mark::Line, vec![(-max_lag, -band), (max_lag, -band)]).dashed())
}
