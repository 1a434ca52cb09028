//! Subcommands and their flags.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gripcast_core::optim::{evaluate, train_with_observer, Metrics};
use gripcast_core::{apply_norm, fit_norm_stats, generate_dataset, predict_grip, SamplingPolicy, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_config, load_model, save_model};
use crate::error::{CliError, CliResult};
use crate::formats::{
    create_file, forecast_times, load_recordings, load_window, save_recordings, write_comparison, write_forecast,
    write_loss_history,
};
use crate::pipeline::prepare;
use crate::stream::{run_stream, DEFAULT_WINDOW_MS};

#[derive(Debug, Parser)]
#[command(name = "gripcast", version, about = "Forecast a handover giver's grip force from the interaction wrench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic recording CSV
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus loss_history.csv beside it
    Train(TrainArgs),
    /// Evaluate a checkpoint on held-out pairs
    Eval(EvalArgs),
    /// Forecast 70 steps of grip force from one wrench window
    Predict(PredictArgs),
    /// Forecast continuously from wrench ticks on standard input
    Stream(StreamArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub pairs: u32,
    #[arg(long = "per-pair", value_parser = clap::value_parser!(u32).range(1..))]
    pub per_pair: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Recording CSV
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated pair ids held out for the test curve
    #[arg(long = "test-pairs", value_delimiter = ',', num_args = 1..)]
    pub test_pairs: Vec<u32>,
    /// JSON object overriding training defaults by field name
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path
    #[arg(long)]
    pub out: PathBuf,
    /// Suppress per-epoch progress on standard error
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "test-pairs", value_delimiter = ',', num_args = 1.., required = true)]
    pub test_pairs: Vec<u32>,
    /// Directory for metrics.json and comparison.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Wrench window CSV: t_ms,fx_N,fy_N,fz_N,tx_Nm,ty_Nm,tz_Nm
    #[arg(long)]
    pub input: PathBuf,
    /// Forecast CSV; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "window-ms", default_value_t = DEFAULT_WINDOW_MS)]
    pub window_ms: f64,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Predict(a) => cmd_predict(&a),
        Command::Stream(a) => cmd_stream(&a),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let records = generate_dataset(a.pairs as usize, a.per_pair as usize, a.seed)?;
    save_recordings(&a.out, &records)
}

/// Path of the loss history written next to a checkpoint.
pub fn loss_history_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_file_name("loss_history.csv")
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let cfg = match &a.config {
        Some(path) => load_config(path)?,
        None => TrainConfig::default(),
    };
    let records = load_recordings(&a.data)?;
    let test_pairs: BTreeSet<u32> = a.test_pairs.iter().copied().collect();
    let split = prepare(&records, &test_pairs, &SamplingPolicy::default())?;
    if split.train.is_empty() {
        return Err(CliError::Data("no training samples after the split".into()));
    }
    let norm = fit_norm_stats(&split.train)?;
    let train: Vec<_> = split.train.iter().map(|s| apply_norm(s, &norm)).collect();
    let test: Vec<_> = split.test.iter().map(|s| apply_norm(s, &norm)).collect();
    if !a.quiet {
        eprintln!(
            "training on {} samples from pairs {:?}, testing on {} samples from pairs {:?}",
            train.len(),
            split.train_pairs,
            test.len(),
            split.test_pairs
        );
    }
    let (params, history) = train_with_observer(&train, &test, &norm, &cfg, |r| {
        if !a.quiet {
            match r.test_mse {
                Some(t) => eprintln!("epoch {:>4}  train {:.6}  test {:.6}", r.epoch + 1, r.train_mse, t),
                None => eprintln!("epoch {:>4}  train {:.6}", r.epoch + 1, r.train_mse),
            }
        }
    })?;
    save_model(&a.out, &params, &cfg)?;
    let hist_path = loss_history_path(&a.out);
    write_loss_history(create_file(&hist_path)?, &history)
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mse_norm: f64,
    #[serde(rename = "mse_N2")]
    pub mse_n2: f64,
    #[serde(rename = "final_step_mae_N")]
    pub final_step_mae_n: f64,
    pub n_samples: usize,
}

impl From<&Metrics> for MetricsRecord {
    fn from(m: &Metrics) -> Self {
        MetricsRecord {
            mse_norm: m.mse_norm,
            mse_n2: m.mse_n2,
            final_step_mae_n: m.final_step_mae_n,
            n_samples: m.n_samples,
        }
    }
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult<MetricsRecord> {
    let (params, _) = load_model(&a.model)?;
    let records = load_recordings(&a.data)?;
    let test_pairs: BTreeSet<u32> = a.test_pairs.iter().copied().collect();
    let split = prepare(&records, &test_pairs, &SamplingPolicy::default())?;
    if split.test.is_empty() {
        return Err(CliError::Data("no samples for the requested test pairs".into()));
    }
    let test: Vec<_> = split.test.iter().map(|s| apply_norm(s, &params.norm)).collect();
    let metrics = evaluate(&params, &test)?;
    let record = MetricsRecord::from(&metrics);
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let json = serde_json::to_string_pretty(&record).map_err(|e| CliError::Internal(e.to_string()))?;
    let metrics_path = a.out.join("metrics.json");
    fs::write(&metrics_path, format!("{json}\n")).map_err(|e| CliError::io(&metrics_path, e))?;
    write_comparison(create_file(&a.out.join("comparison.csv"))?, &split.test, &metrics)?;
    println!("{json}");
    Ok(record)
}

pub fn cmd_predict(a: &PredictArgs) -> CliResult<()> {
    let (params, _) = load_model(&a.model)?;
    let window = load_window(&a.input)?;
    let grip = predict_grip(&window.wrench, &params)?;
    let t = forecast_times(*window.t_ms.last().expect("window is non-empty"), grip.len());
    match &a.out {
        Some(path) => write_forecast(create_file(path)?, &t, &grip),
        None => write_forecast(io::stdout().lock(), &t, &grip),
    }
}

pub fn cmd_stream(a: &StreamArgs) -> CliResult<()> {
    let (params, _) = load_model(&a.model)?;
    let summary = run_stream(
        &params,
        a.window_ms,
        io::stdin().lock(),
        io::stdout().lock(),
        io::stderr(),
    )?;
    let _ = writeln!(
        io::stderr(),
        "{} ticks, {} skipped, {} forecasts",
        summary.ticks,
        summary.skipped,
        summary.forecasts
    );
    Ok(())
}
