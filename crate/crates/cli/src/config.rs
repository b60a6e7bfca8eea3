//! Run configuration: flags, optional JSON file, defaults.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use spikelab_core::experiments::DEFAULT_THRESHOLD;
use spikelab_core::oracle::DEFAULT_GRID_STEPS;
use spikelab_core::Spectrum;

use crate::error::CliError;

/// Seed used when none is given. There is deliberately no environment override.
pub const DEFAULT_SEED: u64 = 1729;

pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_ENVELOPE_SAMPLES: usize = 100_000;
pub const DEFAULT_MOMENT_SAMPLES: usize = 100_000;
pub const DEFAULT_DETECT_N: usize = 500;
pub const DEFAULT_MOMENT_N: usize = 20;
pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_BUDGET: usize = 100_000;
pub const DEFAULT_VERIFY_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Grf,
    Waterfill,
    Envelope,
    Detect,
    Moment,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Grf => "grf",
            Command::Waterfill => "waterfill",
            Command::Envelope => "envelope",
            Command::Detect => "detect",
            Command::Moment => "moment",
            Command::Verify => "verify",
        }
    }

    /// Optional fields the command reads.
    fn accepts(self, field: &str) -> bool {
        let allowed: &[&str] = match self {
            Command::Grf => &["grid"],
            Command::Waterfill => &["x"],
            Command::Envelope => &["samples", "n_block", "grid"],
            Command::Detect => &["n", "trials", "threshold", "false_alarm"],
            Command::Moment => &["n", "samples", "epsilon"],
            Command::Verify => &["x", "grid", "budget"],
        };
        allowed.contains(&field)
    }
}

/// Fully resolved configuration of one run. Fields a command does not use
/// are `None`; fields it uses always carry a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub spectrum: Spectrum,
    pub seed: u64,
    pub out: PathBuf,
    pub n: Option<usize>,
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub epsilon: Option<f64>,
    pub threshold: Option<f64>,
    pub false_alarm: Option<f64>,
    pub n_block: Option<usize>,
    /// Curve resolution for `grf`/`envelope`; grid steps per axis for `verify`.
    pub grid: Option<usize>,
    pub x: Option<Vec<f64>>,
    pub budget: Option<usize>,
}

/// Everything a config file may set; all optional, flags override.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    command: Option<Command>,
    spectrum: Option<Spectrum>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    n: Option<usize>,
    samples: Option<usize>,
    trials: Option<usize>,
    epsilon: Option<f64>,
    threshold: Option<f64>,
    false_alarm: Option<f64>,
    n_block: Option<usize>,
    grid: Option<usize>,
    x: Option<Vec<f64>>,
    budget: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "spikelab", version, about = "Rate functions and Monte Carlo experiments for low-rank detection")]
struct Flags {
    /// Experiment or verifier to run.
    #[arg(value_enum)]
    command: Option<Command>,
    /// Singular values of the spike, comma separated.
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Matrix dimension (`detect`) or block dimension (`moment`).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Trials per hypothesis.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed GLRT threshold on the largest singular value.
    #[arg(long, conflicts_with = "false_alarm")]
    threshold: Option<f64>,
    /// Calibrate the threshold as this upper quantile of the null statistics.
    #[arg(long)]
    false_alarm: Option<f64>,
    /// Block dimension of the envelope samples (default 2r).
    #[arg(long)]
    n_block: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Abscissae, comma separated (write `--x=-1,2` when the list starts with a minus).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x: Option<Vec<f64>>,
    /// Oracle iteration budget.
    #[arg(long)]
    budget: Option<usize>,
    /// JSON file with any of the fields above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism). Does not affect results.
    #[arg(long)]
    jobs: Option<usize>,
}

/// A parsed command line: the run configuration plus execution settings that
/// do not influence results.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub config: RunConfig,
    pub jobs: Option<usize>,
}

pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Ok(parse_invocation(argv)?.config)
}

/// Parses `argv` (including the program name).
pub fn parse_invocation<I, T>(argv: I) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = Flags::try_parse_from(argv).map_err(CliError::Clap)?;
    if flags.jobs == Some(0) {
        return Err(CliError::usage("jobs", "must be at least 1"));
    }
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<PartialConfig>(&text)
                .map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))?
        }
        None => PartialConfig::default(),
    };
    let jobs = flags.jobs;
    let config = merge(flags, file)?;
    Ok(Invocation { config, jobs })
}

fn merge(flags: Flags, file: PartialConfig) -> Result<RunConfig, CliError> {
    let command = flags
        .command
        .or(file.command)
        .ok_or_else(|| CliError::usage("command", "missing (one of grf, waterfill, envelope, detect, moment, verify)"))?;
    let spectrum = match flags.spectrum {
        Some(text) => text.parse::<Spectrum>().map_err(|e| CliError::usage("spectrum", e.to_string()))?,
        None => file.spectrum.ok_or_else(|| CliError::usage("spectrum", "missing"))?,
    };
    // a flagged threshold replaces a calibrated one from the file and vice versa
    let (threshold, false_alarm) = match (flags.threshold, flags.false_alarm) {
        (Some(t), _) => (Some(t), None),
        (None, Some(f)) => (None, Some(f)),
        (None, None) => (file.threshold, file.false_alarm),
    };
    if threshold.is_some() && false_alarm.is_some() {
        return Err(CliError::usage("threshold", "conflicts with false_alarm"));
    }
    let mut cfg = RunConfig {
        command,
        spectrum,
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(command.name())),
        n: flags.n.or(file.n),
        samples: flags.samples.or(file.samples),
        trials: flags.trials.or(file.trials),
        epsilon: flags.epsilon.or(file.epsilon),
        threshold,
        false_alarm,
        n_block: flags.n_block.or(file.n_block),
        grid: flags.grid.or(file.grid),
        x: flags.x.or(file.x),
        budget: flags.budget.or(file.budget),
    };
    for (field, set) in cfg.optional_fields() {
        if set && !command.accepts(field) {
            return Err(CliError::usage(field, format!("does not apply to `{}`", command.name())));
        }
    }
    cfg.fill_defaults()?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn optional_fields(&self) -> [(&'static str, bool); 10] {
        [
            ("n", self.n.is_some()),
            ("samples", self.samples.is_some()),
            ("trials", self.trials.is_some()),
            ("epsilon", self.epsilon.is_some()),
            ("threshold", self.threshold.is_some()),
            ("false_alarm", self.false_alarm.is_some()),
            ("n_block", self.n_block.is_some()),
            ("grid", self.grid.is_some()),
            ("x", self.x.is_some()),
            ("budget", self.budget.is_some()),
        ]
    }

    fn fill_defaults(&mut self) -> Result<(), CliError> {
        let r = self.spectrum.rank();
        match self.command {
            Command::Grf => {
                self.grid.get_or_insert(DEFAULT_GRID);
            }
            Command::Waterfill => {
                if self.x.is_none() {
                    return Err(CliError::usage("x", "missing (waterfill needs at least one abscissa)"));
                }
            }
            Command::Envelope => {
                self.samples.get_or_insert(DEFAULT_ENVELOPE_SAMPLES);
                self.n_block.get_or_insert(2 * r);
                self.grid.get_or_insert(DEFAULT_GRID);
            }
            Command::Detect => {
                self.n.get_or_insert(DEFAULT_DETECT_N);
                self.trials.get_or_insert(DEFAULT_TRIALS);
                if self.false_alarm.is_none() {
                    self.threshold.get_or_insert(DEFAULT_THRESHOLD);
                }
            }
            Command::Moment => {
                self.n.get_or_insert(DEFAULT_MOMENT_N);
                self.samples.get_or_insert(DEFAULT_MOMENT_SAMPLES);
                self.epsilon.get_or_insert(0.1 * self.spectrum.eta_max());
            }
            Command::Verify => {
                self.grid.get_or_insert(DEFAULT_GRID_STEPS);
                self.budget.get_or_insert(DEFAULT_BUDGET);
                if self.x.is_none() {
                    self.x = Some(self.spectrum.intervals().spread(DEFAULT_VERIFY_POINTS));
                }
            }
        }
        Ok(())
    }

    /// Checks that need no numerics beyond the spectrum; domain checks that
    /// depend on the operation are left to the library and exit with code 2.
    fn validate(&self) -> Result<(), CliError> {
        let positive = |field: &'static str, v: Option<usize>| match v {
            Some(0) => Err(CliError::usage(field, "must be positive")),
            _ => Ok(()),
        };
        positive("n", self.n)?;
        positive("trials", self.trials)?;
        positive("n_block", self.n_block)?;
        positive("budget", self.budget)?;
        if self.command == Command::Verify {
            positive("grid", self.grid)?;
        }
        if let Some(x) = &self.x {
            if x.is_empty() {
                return Err(CliError::usage("x", "empty list"));
            }
            if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
                return Err(CliError::usage("x", format!("not a finite number: {bad}")));
            }
        }
        for (field, v) in [("epsilon", self.epsilon), ("threshold", self.threshold), ("false_alarm", self.false_alarm)] {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(CliError::usage(field, "not a finite number"));
            }
        }
        Ok(())
    }
}

/// Command line reproducing `config` (without the program name).
pub fn render(config: &RunConfig) -> Vec<String> {
    let mut argv = vec![
        config.command.name().to_string(),
        "--spectrum".into(),
        config.spectrum.to_flag_value(),
        "--seed".into(),
        config.seed.to_string(),
        "--out".into(),
        config.out.display().to_string(),
    ];
    let mut push = |flag: &str, value: Option<String>| {
        // `--flag=value` keeps lists starting with a minus sign unambiguous
        if let Some(v) = value {
            argv.push(format!("--{flag}={v}"));
        }
    };
    push("n", config.n.map(|v| v.to_string()));
    push("samples", config.samples.map(|v| v.to_string()));
    push("trials", config.trials.map(|v| v.to_string()));
    push("epsilon", config.epsilon.map(|v| v.to_string()));
    push("threshold", config.threshold.map(|v| v.to_string()));
    push("false-alarm", config.false_alarm.map(|v| v.to_string()));
    push("n-block", config.n_block.map(|v| v.to_string()));
    push("grid", config.grid.map(|v| v.to_string()));
    push(
        "x",
        config.x.as_ref().map(|xs| xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")),
    );
    push("budget", config.budget.map(|v| v.to_string()));
    argv
}
