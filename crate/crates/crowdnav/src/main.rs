use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crowdnav::config::{parse_sweep_spec, parse_trial_config};
use crowdnav::engine::{run_trial_observed, TrialConfig};
use crowdnav::experiments::{crowd_baseline, run_sweep};
use crowdnav::report::{
    aggregate_csv, baseline_csv, parse_aggregate_csv, parse_scenario, trials_jsonl, RunManifest,
};
use crowdnav::svg::{plot_aggregate, plot_baseline, render_snapshot, PlotMetric};
use crowdnav::trace::{Trace, TraceRecorder};
use crowdnav::Scenario;

#[derive(Parser)]
#[command(name = "crowdnav", version, about = "Headless crowd-navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial from a TOML config.
    Run {
        /// Trial config document.
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write a per-step trace to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sweep spec: every strategy x formation x density x robot-count x
    /// seed combination.
    Sweep {
        /// Sweep spec document.
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores). The outputs do not depend on
        /// this.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Crowd-only baseline: mean flow velocity versus density.
    Baseline {
        /// counter-flow | perpendicular-flow
        #[arg(long)]
        scenario: String,
        /// Comma-separated densities.
        #[arg(long, value_delimiter = ',')]
        densities: Vec<f64>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Simulated duration per run (s); the first half is warm-up.
        #[arg(long, default_value_t = 300.0)]
        duration: f64,
        /// Optional trial config supplying crowd parameter overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Render one trace row as an SVG snapshot.
    Snapshot {
        /// Trace file written by `run --trace`.
        trace: PathBuf,
        /// Step index to render.
        #[arg(long, conflicts_with = "time")]
        step: Option<u64>,
        /// Simulated time (s) to render.
        #[arg(long)]
        time: Option<f64>,
        /// Output SVG path (default: <out>/snapshot.svg).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot a metric from an aggregate CSV, one series per strategy.
    Plot {
        /// aggregate.csv written by `sweep`.
        aggregate: PathBuf,
        /// time | interceptions
        #[arg(long, default_value = "time")]
        metric: String,
        /// Output SVG path (default: <out>/plot-<metric>.svg).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("CROWDNAV_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_trial_config(path: &Path) -> Result<TrialConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = parse_trial_config(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(config)
}

fn scenario_from(label: &str) -> Result<Scenario> {
    parse_scenario(label).with_context(|| {
        format!("unknown scenario {label:?} (expected passive, counter-flow, or perpendicular-flow)")
    })
}

/// Exit codes: 0 success/arrival, 1 error, 2 timeout.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config, seed, trace, out } => cmd_run(&config, seed, trace, out),
        Command::Sweep { spec, out, jobs } => cmd_sweep(&spec, out, jobs),
        Command::Baseline { scenario, densities, seeds, duration, config, out, jobs } => {
            cmd_baseline(&scenario, &densities, &seeds, duration, config, out, jobs)
        }
        Command::Snapshot { trace, step, time, out } => cmd_snapshot(&trace, step, time, out),
        Command::Plot { aggregate, metric, out } => cmd_plot(&aggregate, &metric, out),
    }
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    trace_path: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut config = load_trial_config(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let dir = out_dir(out);

    let result = if let Some(trace_path) = &trace_path {
        let mut recorder = TraceRecorder::new(&config);
        let result = run_trial_observed(&config, |w| recorder.record(w))?;
        let trace = recorder.finish();
        let mut buf = Vec::new();
        trace.write_to(&mut buf)?;
        write_file(trace_path, std::str::from_utf8(&buf)?)?;
        result
    } else {
        crowdnav::run_trial(&config)?
    };

    #[derive(serde::Serialize)]
    struct RunReport<'a> {
        config: &'a TrialConfig,
        result: &'a crowdnav::TrialResult,
    }
    let json = serde_json::to_string_pretty(&RunReport { config: &config, result: &result })?;
    write_file(&dir.join("result.json"), &(json + "\n"))?;

    match result.time_to_goal {
        Some(t) => println!("arrived: time_to_goal = {t} s, interceptions = {}", result.interceptions),
        None => println!("timeout after {} steps, interceptions = {}", result.steps, result.interceptions),
    }
    Ok(ExitCode::from(if result.timeout { 2 } else { 0 }))
}

fn cmd_sweep(spec_path: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> Result<ExitCode> {
    let text = fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))?;
    let spec =
        parse_sweep_spec(&text).map_err(|e| anyhow::anyhow!("{}: {e}", spec_path.display()))?;
    let dir = out_dir(out);
    let output = run_sweep(&spec, jobs)?;

    write_file(&dir.join("trials.jsonl"), &trials_jsonl(&output.records))?;
    write_file(&dir.join("aggregate.csv"), &aggregate_csv(&output.rows))?;
    let manifest = RunManifest::new(
        &spec_path.display().to_string(),
        &text,
        &dir.display().to_string(),
        spec.seeds.clone(),
    );
    write_file(&dir.join("manifest.json"), &manifest.to_json())?;

    let succeeded = output.records.iter().filter(|r| r.result.is_ok()).count();
    println!(
        "sweep: {} trials ({} ok), {} aggregate rows -> {}",
        output.records.len(),
        succeeded,
        output.rows.len(),
        dir.display()
    );
    if succeeded == 0 {
        bail!("no trial in the sweep succeeded");
    }
    Ok(ExitCode::from(0))
}

fn cmd_baseline(
    scenario: &str,
    densities: &[f64],
    seeds: &[u64],
    duration: f64,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<ExitCode> {
    let scenario = scenario_from(scenario)?;
    let crowd = match config {
        Some(path) => load_trial_config(&path)?.crowd,
        None => Default::default(),
    };
    let rows = crowd_baseline(scenario, densities, seeds, duration, &crowd, jobs)?;
    let dir = out_dir(out);
    write_file(&dir.join("baseline.csv"), &baseline_csv(&rows))?;
    write_file(&dir.join("baseline.svg"), &plot_baseline(&rows, scenario))?;
    for row in &rows {
        println!(
            "density {}: median flow {} m/s over {} seeds",
            row.density,
            row.flow_median.map(|f| f.to_string()).unwrap_or_else(|| "n/a".into()),
            row.n_seeds - row.failures,
        );
    }
    Ok(ExitCode::from(0))
}

fn cmd_snapshot(
    trace_path: &Path,
    step: Option<u64>,
    time: Option<f64>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let file = fs::File::open(trace_path)
        .with_context(|| format!("reading {}", trace_path.display()))?;
    let trace = Trace::read_from(std::io::BufReader::new(file))?;
    let row = match (step, time) {
        (Some(k), _) => trace.row_for_step(k),
        (None, Some(t)) => trace.row_for_time(t),
        (None, None) => trace.rows.first(),
    };
    let Some(row) = row else {
        bail!("requested step/time is beyond the end of the trace");
    };
    let svg = render_snapshot(&trace, row);
    let path = out.unwrap_or_else(|| out_dir(None).join("snapshot.svg"));
    write_file(&path, &svg)?;
    println!("snapshot of step {} -> {}", row.k, path.display());
    Ok(ExitCode::from(0))
}

fn cmd_plot(aggregate_path: &Path, metric: &str, out: Option<PathBuf>) -> Result<ExitCode> {
    let text = fs::read_to_string(aggregate_path)
        .with_context(|| format!("reading {}", aggregate_path.display()))?;
    let rows = parse_aggregate_csv(&text)?;
    let metric = match metric {
        "time" => PlotMetric::Time,
        "interceptions" => PlotMetric::Interceptions,
        other => bail!("unknown metric {other:?} (expected time or interceptions)"),
    };
    let svg = plot_aggregate(&rows, metric);
    let name = match metric {
        PlotMetric::Time => "plot-time.svg",
        PlotMetric::Interceptions => "plot-interceptions.svg",
    };
    let path = out.unwrap_or_else(|| out_dir(None).join(name));
    write_file(&path, &svg)?;
    println!("plot -> {}", path.display());
    Ok(ExitCode::from(0))
}
