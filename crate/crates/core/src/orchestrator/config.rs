use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{Calibration, CalibrationOptions, DspConfig};
use crate::mapping::MappingParams;
use crate::signal_source::{Scenario, SynthParams};
use crate::sim::{CharacterParams, FlowerConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("i/o error reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embodiment {
    Character,
    Flower,
    Both,
}

impl Embodiment {
    pub fn has_character(self) -> bool {
        matches!(self, Embodiment::Character | Embodiment::Both)
    }

    pub fn has_flower(self) -> bool {
        matches!(self, Embodiment::Flower | Embodiment::Both)
    }
}

impl fmt::Display for Embodiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Embodiment::Character => "character",
            Embodiment::Flower => "flower",
            Embodiment::Both => "both",
        })
    }
}

impl FromStr for Embodiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "character" => Ok(Self::Character),
            "flower" => Ok(Self::Flower),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown embodiment {other:?} (character|flower|both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceConfig {
    Synth { params: SynthParams, scenario: Scenario },
    Replay { path: PathBuf },
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::Synth {
            params: SynthParams::default(),
            scenario: Scenario::default(),
        }
    }
}

/// Default decimation to the character (1 s) and flower (5 s) profiles.
pub const CHARACTER_CADENCE_S: f64 = 1.0;
pub const FLOWER_CADENCE_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub embodiment: Embodiment,
    pub source: SourceConfig,
    /// `None` calibrates automatically on an eyes-closed recording.
    pub calibration: Option<Calibration>,
    pub calibration_options: CalibrationOptions,
    pub dsp: DspConfig,
    pub mapping: MappingParams,
    pub flower: FlowerConfig,
    pub character: CharacterParams,
    /// Overrides both per-embodiment cadences when set.
    pub cadence_s: Option<f64>,
    pub guard_enabled: bool,
    pub seed: u64,
    pub realtime: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            embodiment: Embodiment::Both,
            source: SourceConfig::default(),
            calibration: None,
            calibration_options: CalibrationOptions::default(),
            dsp: DspConfig::default(),
            mapping: MappingParams::default(),
            flower: FlowerConfig::default(),
            character: CharacterParams::default(),
            cadence_s: None,
            guard_enabled: true,
            seed: 1,
            realtime: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// SplitMix64 finaliser; derives independent stream seeds from the run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const SENSOR_STREAM: u64 = 1;
pub(crate) const CALIBRATION_STREAM: u64 = 2;

/// Keys accepted in the flat config file, in documentation order.
pub const CONFIG_KEYS: &[&str] = &[
    "embodiment",
    "seed",
    "scenario",
    "replay",
    "realtime",
    "guard",
    "out",
    "cadence_s",
    "alpha_freq",
    "alpha_amp_closed",
    "alpha_amp_open",
    "noise_amp",
    "transition_tau",
    "p_ref",
    "threshold",
    "calibration_percentile",
    "threshold_ratio",
    "filter_order",
    "low_cut",
    "high_cut",
    "window",
    "alpha_gain",
    "beta_gain",
    "gamma_gain",
    "p_min",
    "p_max",
    "t_inf_min",
    "t_inf_max",
    "deflate_offset",
    "p_ambient",
    "p_supply",
    "p_initial",
    "k_pump",
    "k_vent",
    "noise_sigma",
    "ma_window",
    "kp",
    "ki",
    "kd",
    "windup_limit",
    "omega_max",
    "motor_tau",
    "wobble_gain",
];

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected on|off, got {v:?}")),
    }
}

fn parse_num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("bad number {v:?}: {e}"))
}

impl RunConfig {
    pub fn cadence_character_s(&self) -> f64 {
        self.cadence_s.unwrap_or(CHARACTER_CADENCE_S)
    }

    pub fn cadence_flower_s(&self) -> f64 {
        self.cadence_s.unwrap_or(FLOWER_CADENCE_S)
    }

    pub fn synth_params_mut(&mut self) -> &mut SynthParams {
        if !matches!(self.source, SourceConfig::Synth { .. }) {
            self.source = SourceConfig::default();
        }
        match &mut self.source {
            SourceConfig::Synth { params, .. } => params,
            SourceConfig::Replay { .. } => unreachable!(),
        }
    }

    pub fn set_scenario(&mut self, s: Scenario) {
        if !matches!(self.source, SourceConfig::Synth { .. }) {
            self.source = SourceConfig::default();
        }
        if let SourceConfig::Synth { scenario, .. } = &mut self.source {
            *scenario = s;
        }
    }

    fn calibration_mut(&mut self) -> &mut Calibration {
        self.calibration.get_or_insert(Calibration {
            p_ref: f64::NAN,
            threshold: f64::NAN,
        })
    }

    /// Applies one `key = value` setting. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let v = value.trim();
        let path = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        match key {
            "embodiment" => self.embodiment = v.parse()?,
            "seed" => self.seed = parse_num(v)?,
            "scenario" => {
                let s = Scenario::load(&path(v)).map_err(|e| format!("scenario {v:?}: {e}"))?;
                self.set_scenario(s);
            }
            "replay" => self.source = SourceConfig::Replay { path: path(v) },
            "realtime" => self.realtime = parse_bool(v)?,
            "guard" => self.guard_enabled = parse_bool(v)?,
            "out" => self.output_dir = path(v),
            "cadence_s" => self.cadence_s = Some(parse_num(v)?),
            "alpha_freq" => self.synth_params_mut().alpha_freq = parse_num(v)?,
            "alpha_amp_closed" => self.synth_params_mut().alpha_amp_closed = parse_num(v)?,
            "alpha_amp_open" => self.synth_params_mut().alpha_amp_open = parse_num(v)?,
            "noise_amp" => self.synth_params_mut().noise_amp = parse_num(v)?,
            "transition_tau" => self.synth_params_mut().transition_tau = parse_num(v)?,
            "p_ref" => self.calibration_mut().p_ref = parse_num(v)?,
            "threshold" => self.calibration_mut().threshold = parse_num(v)?,
            "calibration_percentile" => self.calibration_options.percentile = parse_num(v)?,
            "threshold_ratio" => self.calibration_options.threshold_ratio = parse_num(v)?,
            "filter_order" => self.dsp.filter_order = parse_num(v)?,
            "low_cut" => self.dsp.low_cut = parse_num(v)?,
            "high_cut" => self.dsp.high_cut = parse_num(v)?,
            "window" => self.dsp.window = v.parse()?,
            "alpha_gain" | "beta_gain" | "gamma_gain" | "p_min" | "p_max" | "t_inf_min" | "t_inf_max"
            | "deflate_offset" => {
                self.mapping = self.mapping.with_param(key, parse_num(v)?).map_err(|e| e.to_string())?;
            }
            "p_ambient" => self.flower.plant.p_ambient = parse_num(v)?,
            "p_supply" => self.flower.plant.p_supply = parse_num(v)?,
            "p_initial" => self.flower.plant.p_initial = parse_num(v)?,
            "k_pump" => self.flower.plant.k_pump = parse_num(v)?,
            "k_vent" => self.flower.plant.k_vent = parse_num(v)?,
            "noise_sigma" => self.flower.sensor.noise_sigma = parse_num(v)?,
            "ma_window" => self.flower.sensor.ma_window = parse_num(v)?,
            "kp" => self.flower.pid.kp = parse_num(v)?,
            "ki" => self.flower.pid.ki = parse_num(v)?,
            "kd" => self.flower.pid.kd = parse_num(v)?,
            "windup_limit" => self.flower.pid.windup_limit = parse_num(v)?,
            "omega_max" => self.character.omega_max = parse_num(v)?,
            "motor_tau" => self.character.motor_tau = parse_num(v)?,
            "wobble_gain" => self.character.wobble_gain = parse_num(v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Parses the flat `key = value` config format on top of the defaults.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Parse { line: i + 1, message };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            cfg.set(k.trim(), v, base).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        if !path.exists() {
            return Err(ConfigError::MissingFile(path.to_owned()));
        }
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        match &self.source {
            SourceConfig::Synth { params, .. } => {
                if let Err(e) = params.validate() {
                    return invalid(e.to_string());
                }
            }
            SourceConfig::Replay { path } => {
                if !path.is_file() {
                    return Err(ConfigError::MissingFile(path.clone()));
                }
            }
        }
        if let Some(cal) = &self.calibration {
            if let Err(e) = cal.validate() {
                return invalid(format!("{e} (set both p_ref and threshold, or neither)"));
            }
        }
        let opts = &self.calibration_options;
        if !(0.0..=100.0).contains(&opts.percentile) || !(opts.threshold_ratio >= 0.0) {
            return invalid(format!(
                "calibration percentile {} / threshold ratio {} out of range",
                opts.percentile, opts.threshold_ratio
            ));
        }
        if let Err(e) = self.mapping.validate() {
            return invalid(e.to_string());
        }
        if let Err(e) = crate::dsp::BandpassFilter::new(
            self.dsp.low_cut,
            self.dsp.high_cut,
            self.dsp.filter_order,
            crate::signal_source::SAMPLE_RATE_HZ,
        ) {
            return invalid(e.to_string());
        }
        let checks = [
            self.flower.plant.validate(),
            self.flower.pid.validate(),
            self.character.validate(),
        ];
        if let Some(Err(e)) = checks.into_iter().find(|c| c.is_err()) {
            return invalid(e.to_string());
        }
        if self.flower.sensor.ma_window == 0 || !(self.flower.sensor.noise_sigma >= 0.0) {
            return invalid("sensor needs ma_window >= 1 and noise_sigma >= 0".into());
        }
        if let Some(c) = self.cadence_s {
            if !(c.is_finite() && c > 0.0) {
                return invalid(format!("cadence_s must be > 0, got {c}"));
            }
        }
        Ok(())
    }
}
