use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use lm_forecast::config::{self, RunConfig};
use lm_forecast::lm::LmConfig;
use lm_forecast::nar::NarLayout;
use lm_forecast::report::{self, RunMetadata};
use lm_forecast::series::{self, ColumnSelector, NanPolicy, SeriesData, SplitSpec, SynthParams};
use lm_forecast::session::{self, SessionConfig};

#[derive(Parser)]
#[command(
    name = "lm-forecast",
    version,
    about = "Levenberg-Marquardt NAR heart-rate forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic heart-rate series as `t_s,hr_bpm` CSV.
    Synth(SynthArgs),
    /// Train and evaluate a single split.
    Run(RunArgs),
    /// Train and evaluate a list of splits.
    Scenarios(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, env = config::SEED_ENV, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 6312, value_parser = clap::value_parser!(u64).range(10..))]
    n: u64,
    #[arg(long, default_value_t = 75.0)]
    base: f64,
    /// Drift in bpm per 1000 s.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    #[arg(long, default_value_t = 5.0)]
    amp: f64,
    #[arg(long, default_value_t = 240.0)]
    period: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value = "synth.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// CSV file holding the heart-rate column.
    #[arg(long, conflicts_with = "synth")]
    input: Option<PathBuf>,
    /// Column name or 0-based index.
    #[arg(long)]
    column: Option<String>,
    /// Use the built-in synthetic series instead of a file.
    #[arg(long)]
    synth: bool,
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Split as train/validation/test, in fractions or percent. Repeatable.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    #[arg(long, value_parser = ["table4", "table7"])]
    preset: Option<String>,
    /// Lags as `1,2` or `1-4`.
    #[arg(long)]
    lags: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_fail: Option<u64>,
    /// Disable validation early stopping.
    #[arg(long, conflicts_with = "max_fail")]
    no_early_stop: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_epochs: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit SVG diagnostics under OUT/plots.
    #[arg(long)]
    plots: bool,
    /// Run scenarios concurrently.
    #[arg(long)]
    parallel: bool,
}

struct Resolved {
    series: SeriesData,
    session: SessionConfig,
    splits: Vec<SplitSpec>,
    out: PathBuf,
    plots: bool,
    parallel: bool,
}

fn resolve(args: RunArgs, default_splits: Vec<SplitSpec>) -> anyhow::Result<Resolved> {
    let file = match &args.config {
        Some(path) => RunConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };

    let series = if let Some(input) = args.input.clone() {
        load(&input, args.column.as_deref().or(file.column.as_deref()))?
    } else if args.synth {
        series::synth_heart_rate(&file.synth.clone().unwrap_or_default())?
    } else {
        match (&file.input, &file.synth) {
            (Some(_), Some(_)) => bail!("config specifies both input and synth; choose one data source"),
            (Some(input), None) => load(input, args.column.as_deref().or(file.column.as_deref()))?,
            (None, Some(synth)) => series::synth_heart_rate(synth)?,
            (None, None) => bail!("no data source: pass --input FILE or --synth"),
        }
    };

    let lags = match &args.lags {
        Some(s) => config::parse_lags(s)?,
        None => file
            .lags
            .clone()
            .unwrap_or_else(|| NarLayout::default().lags().to_vec()),
    };
    let hidden = args
        .hidden
        .or(file.hidden)
        .unwrap_or_else(|| NarLayout::default().hidden_units());
    let layout = NarLayout::new(lags, hidden)?;

    let mut lm = file.lm.clone().unwrap_or_else(LmConfig::default);
    if let Some(e) = args.max_epochs {
        lm.max_epochs = e as usize;
    }

    let early = !args.no_early_stop && file.early_stopping.unwrap_or(true);
    let max_fail = early.then(|| args.max_fail.map(|m| m as usize).or(file.max_fail).unwrap_or(6));

    let env_seed = std::env::var(config::SEED_ENV).ok();
    let seed = config::resolve_seed(args.seed, env_seed.as_deref(), file.seed)?;

    let splits = if args.preset.is_some() || !args.scenarios.is_empty() {
        let mut s = match &args.preset {
            Some(p) => config::preset(p)?,
            None => Vec::new(),
        };
        for sc in &args.scenarios {
            s.push(config::parse_scenario(sc)?);
        }
        s
    } else {
        let s = file.splits()?;
        if s.is_empty() && file.scenarios.is_some() {
            bail!("the scenario list is empty");
        } else if s.is_empty() {
            default_splits
        } else {
            s
        }
    };

    let session = SessionConfig {
        layout,
        lm,
        split: splits.first().copied().unwrap_or(SessionConfig::default().split),
        max_fail,
        seed,
    };
    session.validate()?;

    Ok(Resolved {
        series,
        session,
        splits,
        out: args.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        plots: args.plots || file.plots.unwrap_or(false),
        parallel: args.parallel || file.parallel.unwrap_or(false),
    })
}

fn load(path: &std::path::Path, column: Option<&str>) -> anyhow::Result<SeriesData> {
    let selector: ColumnSelector = column.unwrap_or("hr_bpm").parse().expect("infallible");
    Ok(series::load_csv(path, &selector, NanPolicy::DropRow)?)
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<ExitCode> {
    let params = SynthParams {
        seed: args.seed,
        n: args.n as usize,
        base_bpm: args.base,
        drift_bpm_per_ks: args.drift,
        modulation_amp: args.amp,
        modulation_period_s: args.period,
        noise_std: args.noise,
    };
    let series = series::synth_heart_rate(&params)?;
    let mut buf = Vec::new();
    series.write_csv(&mut buf)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, buf)?;
    eprintln!("wrote {} samples to {}", series.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let best_split = vec![SplitSpec::new(0.30, 0.35, 0.35)?];
    let r = resolve(args, best_split)?;
    if r.splits.len() != 1 {
        bail!(
            "run takes exactly one scenario, got {}; use `scenarios` for sweeps",
            r.splits.len()
        );
    }
    let result = session::run_session(&r.series, &r.session)?;
    let meta = RunMetadata::new(&r.series, &r.session);

    let mut files = vec![(r.out.join("report.json"), report::run_report_json(&meta, &result)?)];
    if r.plots {
        for (name, svg) in report::scenario_plots(&result, r.series.timestamps()) {
            files.push((report::plot_path(&r.out, 1, name), svg));
        }
    }
    report::write_all(&files)?;

    println!("{} samples from {}", r.series.len(), r.series.source_label());
    print!("{}", report::run_table(&result));
    eprintln!("reports written to {}", r.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_scenarios(args: RunArgs) -> anyhow::Result<ExitCode> {
    let r = resolve(args, SplitSpec::table4())?;
    let outcomes = session::run_scenarios(&r.series, &r.session, &r.splits, r.parallel)?;
    let meta = RunMetadata::new(&r.series, &r.session);

    let mut files = vec![
        (r.out.join("scenarios.csv"), report::scenarios_csv(&outcomes)?),
        (r.out.join("scenarios.json"), report::scenarios_json(&meta, &outcomes)?),
    ];
    if r.plots {
        for o in &outcomes {
            if let Ok(result) = &o.result {
                for (name, svg) in report::scenario_plots(result, r.series.timestamps()) {
                    files.push((report::plot_path(&r.out, o.id, name), svg));
                }
            }
        }
    }
    report::write_all(&files)?;

    println!("{} samples from {}", r.series.len(), r.series.source_label());
    print!("{}", report::scenarios_table(&outcomes));
    eprintln!("reports written to {}", r.out.display());
    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} scenarios failed", outcomes.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Run(a) => cmd_run(a),
        Command::Scenarios(a) => cmd_scenarios(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
