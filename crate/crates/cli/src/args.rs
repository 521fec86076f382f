use std::net::IpAddr;
use std::path::{Path, PathBuf};

use alphasoft::dsp::Calibration;
use alphasoft::orchestrator::{ConfigError, Embodiment, RunConfig, RunError, SourceConfig, AUTO_CALIBRATION_S};
use alphasoft::signal_source::Scenario;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "alphasoft", version, about = "EEG alpha-power pipeline driving simulated soft actuators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario end to end and write CSV telemetry.
    Run(RunArgs),
    /// Derive p_ref and threshold from an eyes-closed recording.
    Calibrate(CalibrateArgs),
    /// Turn a run directory into plot-ready CSVs.
    ExportFigs(ExportArgs),
    /// Serve live snapshots and accept operator commands over WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub embodiment: Option<Embodiment>,
    /// Scenario file: one `open|closed,<seconds>` line per segment.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Replay a recorded EEG CSV instead of the synthetic source.
    #[arg(long, conflicts_with = "scenario")]
    pub replay: Option<PathBuf>,
    /// Calibration file as written by `calibrate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Pace the run to the wall clock.
    #[arg(long)]
    pub realtime: bool,
    #[arg(long, value_enum)]
    pub guard: Option<Switch>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    /// Config file first, then flags on top.
    pub fn to_config(&self) -> Result<RunConfig, RunError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(e) = self.embodiment {
            cfg.embodiment = e;
        }
        if let Some(path) = &self.scenario {
            if !path.is_file() {
                return Err(ConfigError::MissingFile(path.clone()).into());
            }
            cfg.set_scenario(Scenario::load(path)?);
        }
        if let Some(path) = &self.replay {
            cfg.source = SourceConfig::Replay { path: path.clone() };
        }
        if let Some(path) = &self.calibration {
            cfg.calibration = Some(load_calibration(path)?);
        }
        if self.realtime {
            cfg.realtime = true;
        }
        if let Some(g) = self.guard {
            cfg.guard_enabled = g == Switch::On;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_calibration(path: &Path) -> Result<Calibration, RunError> {
    if !path.is_file() {
        return Err(ConfigError::MissingFile(path.to_owned()).into());
    }
    let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
    Calibration::parse(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())).into())
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Length of the synthetic eyes-closed recording, s (ignored for replays).
    #[arg(long, default_value_t = AUTO_CALIBRATION_S)]
    pub duration: f64,
    /// Where to write the calibration; defaults to `<out>/calibration.txt`.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Directory of a completed run; defaults to the configured output dir.
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    #[arg(long, default_value_t = 8787)]
    pub port: u16,
    /// Also accept newline-delimited JSON over plain TCP on this port.
    #[arg(long)]
    pub tcp_port: Option<u16>,
    /// Start without a run; a `start` command begins one.
    #[arg(long)]
    pub idle: bool,
}
