//! Command-line interface: `simulate`, `gen-data`, and `eval`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data/IO error,
//! 4 runtime or protocol error. Output files are written atomically after a
//! run succeeds, so a failed run leaves no partial artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{
    env_seed, parse_synth_spec, DataSource, EmitFormat, PartialConfig, RunConfig,
};
use crate::data::{
    load, save_csv, save_raw_f32, synth_generate, synth_train_test, DataFormat, Dataset,
};
use crate::error::{Error, Result};
use crate::metrics::{write_metrics_csv, write_metrics_json, write_transport_csv};
use crate::nn::evaluate;
use crate::protocol::GlobalModel;
use crate::sim::Simulation;
use crate::wire::{decode, encode, WireMessage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "fogfed",
    version,
    about = "Three-tier federated learning simulator for streaming radar frames"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a federated training simulation and write metrics/model artifacts.
    Simulate(SimulateArgs),
    /// Generate a synthetic dataset file.
    GenData(GenDataArgs),
    /// Evaluate a saved model on a dataset and print loss/accuracy as JSON.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Flat key=value config file (keys match these flag names).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Number of fog nodes.
    #[arg(long, value_name = "K")]
    pub fogs: Option<usize>,
    /// Number of federated rounds (capped by available stream windows).
    #[arg(long, value_name = "R")]
    pub rounds: Option<usize>,
    /// Frames consumed per fog per round.
    #[arg(long, value_name = "W")]
    pub window: Option<usize>,
    /// Local epochs over each window.
    #[arg(long, value_name = "E")]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long, value_name = "X")]
    pub lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long, value_name = "B")]
    pub batch: Option<usize>,
    /// Run seed (FOGFED_SEED is the fallback when unset here and in the file).
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Training dataset path (.csv or raw-f32; requires --test).
    #[arg(long, value_name = "PATH", requires = "test")]
    pub train: Option<PathBuf>,
    /// Held-out test dataset path.
    #[arg(long, value_name = "PATH", requires = "train")]
    pub test: Option<PathBuf>,
    /// Synthetic data spec N,SIGMA (test set is N/10), e.g. 16000,0.05.
    #[arg(long, value_name = "N,SIGMA", conflicts_with_all = ["train", "test"])]
    pub synth: Option<String>,
    /// Output directory for metrics.csv/metrics.json/model.bin.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Which metrics files to write.
    #[arg(long, value_enum, value_name = "FORMAT")]
    pub emit: Option<EmitArg>,
    /// Record every simulated frame (sender, receiver, type, bytes) to
    /// transport.csv.
    #[arg(long)]
    pub log_transport: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EmitArg {
    Csv,
    Json,
    Both,
}

impl From<EmitArg> for EmitFormat {
    fn from(e: EmitArg) -> Self {
        match e {
            EmitArg::Csv => Self::Csv,
            EmitArg::Json => Self::Json,
            EmitArg::Both => Self::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Number of frames to generate.
    #[arg(long, value_name = "N")]
    pub n: usize,
    /// Generator seed (FOGFED_SEED is the fallback).
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Noise standard deviation.
    #[arg(long, value_name = "SIGMA", default_value_t = 0.05)]
    pub sigma: f64,
    /// Output path; .csv writes CSV, anything else writes raw-f32.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Saved model artifact (a GlobalModel wire frame, e.g. model.bin).
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Dataset to evaluate on (.csv or raw-f32).
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::GenData(args) => cmd_gen_data(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Maps an error to the documented exit codes. Config resolution yields
/// `Config`; dataset loaders yield `Parse`/`ParseBinary`/`Io`; everything
/// else is a runtime or protocol failure.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Parse { .. } | Error::ParseBinary { .. } | Error::Io(_) => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

impl SimulateArgs {
    /// Resolves layered configuration: defaults < FOGFED_SEED < file < flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let file_layer = match &self.config {
            Some(path) => PartialConfig::from_file(path)?,
            None => PartialConfig::default(),
        };
        let flag_layer = PartialConfig {
            fogs: self.fogs,
            rounds: self.rounds,
            window: self.window,
            epochs: self.epochs,
            lr: self.lr,
            batch: self.batch,
            seed: self.seed,
            train: self.train.clone(),
            test: self.test.clone(),
            synth: self.synth.as_deref().map(parse_synth_spec).transpose()?,
            out: self.out.clone(),
            emit: self.emit.map(EmitFormat::from),
            log_transport: if self.log_transport { Some(true) } else { None },
        };
        file_layer.overlay(flag_layer).resolve(env_seed()?)
    }
}

/// Loads or generates the train/test pair named by the run's data source.
pub fn load_run_data(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    match &config.source {
        DataSource::Files { train, test } => {
            let train_set = load(train, DataFormat::from_path(train))?;
            let test_set = load(test, DataFormat::from_path(test))?;
            Ok((train_set, test_set))
        }
        DataSource::Synth { n, sigma } => synth_train_test(*n, *sigma, config.topology.seed),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let config = args.resolve()?;
    let (train, test) = load_run_data(&config)?;

    let started = Instant::now();
    let mut sim = Simulation::build(config.topology.clone(), &train, &test)?;
    sim.set_transport_logging(config.log_transport);
    sim.run()?;
    let elapsed = started.elapsed();

    std::fs::create_dir_all(&config.output_dir)?;
    let num_fogs = config.topology.num_fogs;
    if config.emit.wants_csv() {
        write_metrics_csv(
            &config.output_dir.join("metrics.csv"),
            num_fogs,
            sim.history(),
        )?;
    }
    if config.emit.wants_json() {
        write_metrics_json(&config.output_dir.join("metrics.json"), sim.history())?;
    }
    if config.log_transport {
        write_transport_csv(&config.output_dir.join("transport.csv"), sim.transport_log())?;
    }
    save_model(&config.output_dir.join("model.bin"), sim.global_model())?;

    match sim.history().last() {
        Some(last) => println!(
            "completed {} rounds in {:.2} s: test accuracy {:.4}, test loss {:.4}",
            sim.history().len(),
            elapsed.as_secs_f64(),
            last.global_test_accuracy,
            last.global_test_loss
        ),
        None => println!(
            "completed 0 rounds in {:.2} s (initial model saved)",
            elapsed.as_secs_f64()
        ),
    }
    Ok(())
}

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    if args.n == 0 {
        return Err(Error::Config("gen-data needs n >= 1".into()));
    }
    if !args.sigma.is_finite() || args.sigma < 0.0 {
        return Err(Error::Config(format!(
            "sigma must be finite and >= 0, got {}",
            args.sigma
        )));
    }
    let seed = args.seed.or(env_seed()?).unwrap_or(42);
    let data = synth_generate(args.n, seed, args.sigma)?;
    match DataFormat::from_path(&args.out) {
        DataFormat::Csv => save_csv(&data, &args.out)?,
        DataFormat::RawF32 => save_raw_f32(&data, &args.out)?,
    }
    println!("wrote {} frames to {}", data.len(), args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = load(&args.data, DataFormat::from_path(&args.data))?;
    let metrics = evaluate(&model.params, data.frames())?;
    println!(
        "{}",
        serde_json::json!({
            "loss": metrics.loss,
            "accuracy": metrics.accuracy,
        })
    );
    Ok(())
}

/// Saves a model artifact: the GlobalModel wire frame, verbatim, so `eval`
/// doubles as a codec check.
pub fn save_model(path: &Path, model: &GlobalModel) -> Result<()> {
    let bytes = encode(&WireMessage::GlobalModel(model.clone()));
    crate::data::atomic_write(path, &bytes)?;
    Ok(())
}

/// Loads a model artifact written by [`save_model`].
pub fn load_model(path: &Path) -> Result<GlobalModel> {
    let bytes = std::fs::read(path)?;
    match decode(&bytes)? {
        WireMessage::GlobalModel(model) => Ok(model),
        other => Err(Error::Protocol(format!(
            "model file holds a type-{} frame, expected a global model",
            other.msg_type()
        ))),
    }
}
