//! Run configuration: defaults, flat `key=value` config files, CLI-flag
//! overrides, and the `FOGFED_SEED` fallback.
//!
//! Precedence, lowest to highest: built-in defaults, `FOGFED_SEED` (seed
//! only), config file, command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::HyperParams;
use crate::sim::TopologyConfig;

/// Which metrics files a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmitFormat {
    #[default]
    Csv,
    Json,
    Both,
}

impl EmitFormat {
    pub fn wants_csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    pub fn wants_json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

impl FromStr for EmitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!(
                "emit must be csv, json, or both, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for EmitFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Both => "both",
        })
    }
}

/// Where the training/test frames come from: a pair of dataset files, or the
/// synthetic generator (train size `n`; the held-out test set is `n/10`).
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { train: PathBuf, test: PathBuf },
    Synth { n: usize, sigma: f64 },
}

/// Default synthetic source: 16,000 training frames at noise 0.05
/// (5 fogs × 3,200; 1,600 held out).
pub const DEFAULT_SYNTH_N: usize = 16_000;
pub const DEFAULT_SYNTH_SIGMA: f64 = 0.05;

/// A fully resolved simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub topology: TopologyConfig,
    pub source: DataSource,
    pub output_dir: PathBuf,
    pub emit: EmitFormat,
    pub log_transport: bool,
}

/// Settings gathered from one layer (file or flags); `None` means "not set
/// here". Layers merge with [`PartialConfig::overlay`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub fogs: Option<usize>,
    pub rounds: Option<usize>,
    pub window: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub synth: Option<(usize, f64)>,
    pub out: Option<PathBuf>,
    pub emit: Option<EmitFormat>,
    pub log_transport: Option<bool>,
}

/// Parses `N,SIGMA` (the `--synth` / `synth=` value).
pub fn parse_synth_spec(s: &str) -> Result<(usize, f64)> {
    let err = || {
        Error::Config(format!(
            "synth spec must be N,SIGMA (e.g. 16000,0.05), got {s:?}"
        ))
    };
    let (n_str, sigma_str) = s.split_once(',').ok_or_else(err)?;
    let n: usize = n_str.trim().parse().map_err(|_| err())?;
    let sigma: f64 = sigma_str.trim().parse().map_err(|_| err())?;
    if n == 0 || !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Config(format!(
            "synth spec needs N >= 1 and SIGMA >= 0, got {s:?}"
        )));
    }
    Ok((n, sigma))
}

impl PartialConfig {
    /// Reads a flat `key=value` config file. Blank lines and `#` comments are
    /// skipped; keys match the CLI flag names; unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::default();
        for (idx, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let at = |msg: String| {
                Error::Config(format!("{} line {lineno}: {msg}", path.display()))
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected key=value, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| at(format!("invalid {what} value {value:?}"));
            match key {
                "fogs" => cfg.fogs = Some(value.parse().map_err(|_| bad("fogs"))?),
                "rounds" => cfg.rounds = Some(value.parse().map_err(|_| bad("rounds"))?),
                "window" => cfg.window = Some(value.parse().map_err(|_| bad("window"))?),
                "epochs" => cfg.epochs = Some(value.parse().map_err(|_| bad("epochs"))?),
                "lr" => cfg.lr = Some(value.parse().map_err(|_| bad("lr"))?),
                "batch" => cfg.batch = Some(value.parse().map_err(|_| bad("batch"))?),
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "train" => cfg.train = Some(PathBuf::from(value)),
                "test" => cfg.test = Some(PathBuf::from(value)),
                "synth" => {
                    cfg.synth = Some(parse_synth_spec(value).map_err(|e| at(e.to_string()))?)
                }
                "out" => cfg.out = Some(PathBuf::from(value)),
                "emit" => cfg.emit = Some(value.parse().map_err(|e: Error| at(e.to_string()))?),
                "log_transport" => {
                    cfg.log_transport =
                        Some(value.parse().map_err(|_| bad("log_transport"))?)
                }
                other => return Err(at(format!("unknown key {other:?}"))),
            }
        }
        Ok(cfg)
    }

    /// Merges two layers; values in `over` win.
    pub fn overlay(self, over: Self) -> Self {
        Self {
            fogs: over.fogs.or(self.fogs),
            rounds: over.rounds.or(self.rounds),
            window: over.window.or(self.window),
            epochs: over.epochs.or(self.epochs),
            lr: over.lr.or(self.lr),
            batch: over.batch.or(self.batch),
            seed: over.seed.or(self.seed),
            train: over.train.or(self.train),
            test: over.test.or(self.test),
            synth: over.synth.or(self.synth),
            out: over.out.or(self.out),
            emit: over.emit.or(self.emit),
            log_transport: over.log_transport.or(self.log_transport),
        }
    }

    /// Resolves the merged layers into a validated run. `env_seed` supplies
    /// the `FOGFED_SEED` fallback, used only when no layer set a seed.
    pub fn resolve(self, env_seed: Option<u64>) -> Result<RunConfig> {
        let defaults = TopologyConfig::default();
        let hyper_defaults = HyperParams::default();

        let source = match (self.train, self.test, self.synth) {
            (Some(train), Some(test), None) => DataSource::Files { train, test },
            (None, None, Some((n, sigma))) => DataSource::Synth { n, sigma },
            (None, None, None) => DataSource::Synth {
                n: DEFAULT_SYNTH_N,
                sigma: DEFAULT_SYNTH_SIGMA,
            },
            (Some(_), None, None) | (None, Some(_), None) => {
                return Err(Error::Config(
                    "file data needs both train and test paths".into(),
                ))
            }
            _ => {
                return Err(Error::Config(
                    "choose either train/test files or a synth spec, not both".into(),
                ))
            }
        };

        let lr = self.lr.unwrap_or(f64::from(hyper_defaults.learning_rate));
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::Config(format!(
                "lr must be finite and >= 0, got {lr}"
            )));
        }
        let topology = TopologyConfig {
            num_fogs: self.fogs.unwrap_or(defaults.num_fogs),
            edges_per_fog: defaults.edges_per_fog,
            rounds: self.rounds.unwrap_or(defaults.rounds),
            window_size: self.window.unwrap_or(defaults.window_size),
            hyper: HyperParams {
                learning_rate: lr as f32,
                local_epochs: self.epochs.unwrap_or(hyper_defaults.local_epochs),
                batch_size: self.batch.unwrap_or(hyper_defaults.batch_size),
                ..hyper_defaults
            },
            seed: self.seed.or(env_seed).unwrap_or(defaults.seed),
        };
        topology.validate()?;

        Ok(RunConfig {
            topology,
            source,
            output_dir: self.out.unwrap_or_else(|| PathBuf::from(".")),
            emit: self.emit.unwrap_or_default(),
            log_transport: self.log_transport.unwrap_or(false),
        })
    }
}

/// Reads and parses `FOGFED_SEED`; a set-but-unparsable value is an error
/// rather than being silently ignored.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var("FOGFED_SEED") {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("FOGFED_SEED is not an integer: {raw:?}"))),
        Err(_) => Ok(None),
    }
}
