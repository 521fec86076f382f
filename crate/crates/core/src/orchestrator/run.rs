use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{derive_seed, ConfigError, RunConfig, SourceConfig, CALIBRATION_STREAM};
use super::pipeline::{load_replay, Pipeline, PipelineError, TickOutput, TICK_MS};
use crate::dsp::{calibrate, Calibration, DspError};
use crate::signal_source::{EegSample, Eyes, Scenario, ScenarioSegment, SourceError, SynthGenerator, SAMPLE_RATE_HZ};
use crate::sim::CyclePhase;

/// Length of the eyes-closed recording used when no calibration is given.
pub const AUTO_CALIBRATION_S: f64 = 20.0;

pub const EEG_RAW_CSV: &str = "eeg_raw.csv";
pub const PSD_CSV: &str = "psd.csv";
pub const ALPHA_CSV: &str = "alpha.csv";
pub const SEGMENTS_CSV: &str = "segments.csv";
pub const CHARACTER_COMMANDS_CSV: &str = "character_commands.csv";
pub const CHARACTER_TRACE_CSV: &str = "character_trace.csv";
pub const FLOWER_COMMANDS_CSV: &str = "flower_commands.csv";
pub const PRESSURE_TRACE_CSV: &str = "pressure_trace.csv";
pub const CALIBRATION_FILE: &str = "calibration.txt";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("source: {0}")]
    Source(#[from] SourceError),
    #[error("calibration failed: {0}")]
    Calibration(DspError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// Process exit code: 2 config, 3 runtime contract violation, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Io(_)) | RunError::Source(SourceError::Io(_)) | RunError::Io { .. } => 4,
            RunError::Config(_) | RunError::Source(_) | RunError::Calibration(_) => 2,
            RunError::Pipeline(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Formats integer milliseconds as seconds with three decimals.
pub fn fmt_ms(ms: u64) -> String {
    format!("{}.{:03}", ms / 1000, ms % 1000)
}

fn secs_to_ms(t: f64) -> u64 {
    (t * 1000.0).round() as u64
}

/// The eyes-closed recording that calibration runs on: a fresh synthetic
/// segment of `duration_s`, or the whole replay file.
pub fn calibration_recording(config: &RunConfig, duration_s: f64) -> Result<Vec<EegSample>, RunError> {
    match &config.source {
        SourceConfig::Synth { params, .. } => {
            if !(duration_s.is_finite() && duration_s > 0.0) {
                return Err(ConfigError::Invalid(format!("calibration duration must be > 0, got {duration_s}")).into());
            }
            let mut params = params.clone();
            params.rng_seed = derive_seed(config.seed, CALIBRATION_STREAM);
            let scenario = Scenario::new(vec![ScenarioSegment::new(Eyes::Closed, duration_s)])?;
            let n = (duration_s * SAMPLE_RATE_HZ).round() as usize;
            Ok(SynthGenerator::new(params, scenario)?.take(n).collect())
        }
        SourceConfig::Replay { path } => {
            if !path.is_file() {
                return Err(ConfigError::MissingFile(path.clone()).into());
            }
            Ok(load_replay(path)?)
        }
    }
}

/// Calibrates on an eyes-closed recording of `duration_s`.
pub fn calibrate_cmd(config: &RunConfig, duration_s: f64) -> Result<Calibration, RunError> {
    let recording = calibration_recording(config, duration_s)?;
    calibrate(&recording, &config.dsp, &config.calibration_options).map_err(RunError::Calibration)
}

/// [`calibrate_cmd`], persisted as a `p_ref = …` / `threshold = …` text file.
pub fn calibrate_to_file(config: &RunConfig, duration_s: f64, path: &Path) -> Result<Calibration, RunError> {
    let cal = calibrate_cmd(config, duration_s)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, cal.to_text()).map_err(io_err(path))?;
    Ok(cal)
}

pub fn resolve_calibration(config: &RunConfig) -> Result<Calibration, RunError> {
    match config.calibration {
        Some(cal) => Ok(cal),
        None => calibrate_cmd(config, AUTO_CALIBRATION_S),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub index: usize,
    pub eyes: Eyes,
    pub start_s: f64,
    pub end_s: f64,
    pub frames: u64,
    pub mean_a_psd: Option<f64>,
    pub duty_updates: u64,
    pub mean_duty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterSummary {
    pub updates: u64,
    pub mean_duty: Option<f64>,
    pub min_duty: Option<u8>,
    pub max_duty: Option<u8>,
    pub trace_rows: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowerSummary {
    pub updates: u64,
    pub cycles_started: u64,
    pub trace_rows: u64,
    pub min_p_true_kpa: f64,
    pub max_p_true_kpa: f64,
    pub mean_p_filt_kpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    /// Data rows, excluding the header.
    pub rows: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub duration_s: f64,
    pub ticks: u64,
    pub samples: u64,
    pub frames_emitted: u64,
    /// Frames whose peak passed the alpha gate.
    pub alpha_events: u64,
    pub calibration: Calibration,
    pub segments: Vec<SegmentSummary>,
    pub character: Option<CharacterSummary>,
    pub flower: Option<FlowerSummary>,
    pub link_errors: u64,
    pub files: Vec<OutputFile>,
}

impl RunReport {
    pub fn file(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }

    /// Mean over the segments with `eyes` of each segment's mean.
    pub fn mean_over(&self, eyes: Eyes, pick: impl Fn(&SegmentSummary) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self.segments.iter().filter(|s| s.eyes == eyes).filter_map(pick).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

struct Csv {
    name: &'static str,
    path: PathBuf,
    w: BufWriter<File>,
    rows: u64,
}

impl Csv {
    fn create(dir: &Path, name: &'static str, header: &str) -> Result<Self, RunError> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{header}").map_err(io_err(&path))?;
        Ok(Self { name, path, w, rows: 0 })
    }

    fn row(&mut self, args: std::fmt::Arguments) -> Result<(), RunError> {
        self.w.write_fmt(args).and_then(|_| self.w.write_all(b"\n")).map_err(io_err(&self.path))?;
        self.rows += 1;
        Ok(())
    }

    fn finish(mut self) -> Result<OutputFile, RunError> {
        self.w.flush().map_err(io_err(&self.path))?;
        Ok(OutputFile {
            name: self.name.to_string(),
            rows: self.rows,
        })
    }
}

#[derive(Default)]
struct SegmentAcc {
    frames: u64,
    a_sum: f64,
    duty_updates: u64,
    duty_sum: f64,
}

struct Outputs {
    eeg: Csv,
    psd: Csv,
    alpha: Csv,
    segments: Csv,
    char_cmd: Option<Csv>,
    char_trace: Option<Csv>,
    flower_cmd: Option<Csv>,
    pressure: Option<Csv>,
}

struct Stats {
    seg: Vec<SegmentAcc>,
    duties: Vec<u8>,
    cycles: u64,
    last_idle_or_deflating: bool,
    p_min: f64,
    p_max: f64,
    p_filt_sum: f64,
    flower_ticks: u64,
}

impl Outputs {
    fn create(dir: &Path, config: &RunConfig) -> Result<Self, RunError> {
        let has_c = config.embodiment.has_character();
        let has_f = config.embodiment.has_flower();
        Ok(Self {
            eeg: Csv::create(dir, EEG_RAW_CSV, crate::signal_source::RAW_CSV_HEADER)?,
            psd: Csv::create(dir, PSD_CSV, "frame_idx,t_end_s,f_hz,psd")?,
            alpha: Csv::create(dir, ALPHA_CSV, "t_s,p_alpha,a_psd,gated")?,
            segments: Csv::create(dir, SEGMENTS_CSV, "index,eyes,start_s,end_s")?,
            char_cmd: has_c
                .then(|| Csv::create(dir, CHARACTER_COMMANDS_CSV, "t_s,a_psd,duty"))
                .transpose()?,
            char_trace: has_c
                .then(|| Csv::create(dir, CHARACTER_TRACE_CSV, "t_s,duty,omega,dance_freq_hz,amplitude"))
                .transpose()?,
            flower_cmd: has_f
                .then(|| {
                    Csv::create(
                        dir,
                        FLOWER_COMMANDS_CSV,
                        "t_s,a_psd,setpoint_kpa,t_inflation_s,t_deflation_s",
                    )
                })
                .transpose()?,
            pressure: has_f
                .then(|| {
                    Csv::create(
                        dir,
                        PRESSURE_TRACE_CSV,
                        "t_s,p_true_kpa,p_meas_kpa,p_filt_kpa,valve,pump_effort,phase",
                    )
                })
                .transpose()?,
        })
    }

    fn write_tick(&mut self, out: &TickOutput, scenario: Option<&Scenario>, stats: &mut Stats) -> Result<(), RunError> {
        let t = fmt_ms(out.t_ms);
        if let (Some(csv), Some(c)) = (&mut self.char_trace, &out.character) {
            csv.row(format_args!(
                "{t},{},{:.6},{:.6},{:.6}",
                c.duty, c.omega, c.dance_freq_hz, c.amplitude
            ))?;
        }
        if let (Some(csv), Some(f)) = (&mut self.pressure, &out.flower) {
            csv.row(format_args!(
                "{t},{:.6},{:.6},{:.6},{},{:.6},{}",
                f.p_true,
                f.p_meas,
                f.p_filt,
                u8::from(f.valve_open),
                f.pump_effort,
                f.phase.name()
            ))?;
            stats.flower_ticks += 1;
            stats.p_min = stats.p_min.min(f.p_true);
            stats.p_max = stats.p_max.max(f.p_true);
            stats.p_filt_sum += f.p_filt;
        }
        for s in &out.samples {
            self.eeg.row(format_args!("{},{}", fmt_ms(s.t_ms()), s.v))?;
        }
        for (spectrum, reading) in &out.readings {
            let t_end = fmt_ms(secs_to_ms(spectrum.t_end));
            for (f, p) in spectrum.freq.iter().zip(&spectrum.psd) {
                self.psd.row(format_args!("{},{t_end},{f:.1},{p}", spectrum.frame_idx))?;
            }
            self.alpha.row(format_args!(
                "{t_end},{},{},{}",
                reading.p_alpha,
                reading.a_psd,
                u8::from(reading.gated)
            ))?;
            if let Some(sc) = scenario {
                let acc = &mut stats.seg[sc.segment_index_at(reading.t)];
                acc.frames += 1;
                acc.a_sum += reading.a_psd;
            }
        }
        if let Some(csv) = &mut self.char_cmd {
            for c in &out.character_commands {
                csv.row(format_args!("{},{},{}", fmt_ms(c.t_ms), c.a_psd, c.command))?;
                stats.duties.push(c.command);
                if let Some(sc) = scenario {
                    let acc = &mut stats.seg[sc.segment_index_at(c.t_ms as f64 / 1000.0)];
                    acc.duty_updates += 1;
                    acc.duty_sum += f64::from(c.command);
                }
            }
        }
        if let Some(csv) = &mut self.flower_cmd {
            for c in &out.flower_commands {
                csv.row(format_args!(
                    "{},{},{},{},{}",
                    fmt_ms(c.t_ms),
                    c.a_psd,
                    c.command.setpoint_kpa,
                    c.command.t_inflation_s(),
                    c.command.t_deflation_s()
                ))?;
            }
        }
        if let Some(f) = &out.flower {
            if matches!(f.phase, CyclePhase::Inflating { .. }) && stats.last_idle_or_deflating {
                stats.cycles += 1;
            }
            stats.last_idle_or_deflating = !matches!(f.phase, CyclePhase::Inflating { .. });
        }
        Ok(())
    }
}

/// Executes a run on the simulated clock and writes every output file.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    run_with_observer(config, |_, _| {})
}

/// [`run`], calling `observer` after every tick. The observer only sees
/// shared references, so it cannot perturb the run.
pub fn run_with_observer<F>(config: &RunConfig, mut observer: F) -> Result<RunReport, RunError>
where
    F: FnMut(&Pipeline, &TickOutput),
{
    config.validate()?;
    let calibration = resolve_calibration(config)?;
    let mut pipeline = Pipeline::new(config, calibration)?;

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut outputs = Outputs::create(dir, config)?;
    let scenario = pipeline.scenario().cloned();
    if let Some(sc) = &scenario {
        for (i, (seg, (start, end))) in sc.segments().iter().zip(sc.boundaries()).enumerate() {
            outputs.segments.row(format_args!("{i},{},{start},{end}", seg.eyes))?;
        }
    }
    let mut stats = Stats {
        seg: scenario
            .as_ref()
            .map_or_else(Vec::new, |sc| sc.segments().iter().map(|_| SegmentAcc::default()).collect()),
        duties: Vec::new(),
        cycles: 0,
        last_idle_or_deflating: true,
        p_min: f64::INFINITY,
        p_max: f64::NEG_INFINITY,
        p_filt_sum: 0.0,
        flower_ticks: 0,
    };

    let start = Instant::now();
    while !pipeline.is_finished() {
        let out = pipeline.step()?;
        outputs.write_tick(&out, scenario.as_ref(), &mut stats)?;
        observer(&pipeline, &out);
        if config.realtime {
            let due = start + Duration::from_millis((out.tick + 1) * TICK_MS);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }

    let cal_path = dir.join(CALIBRATION_FILE);
    std::fs::write(&cal_path, calibration.to_text()).map_err(io_err(&cal_path))?;

    let segments = match &scenario {
        Some(sc) => sc
            .segments()
            .iter()
            .zip(sc.boundaries())
            .zip(&stats.seg)
            .enumerate()
            .map(|(index, ((seg, (start_s, end_s)), acc))| SegmentSummary {
                index,
                eyes: seg.eyes,
                start_s,
                end_s,
                frames: acc.frames,
                mean_a_psd: (acc.frames > 0).then(|| acc.a_sum / acc.frames as f64),
                duty_updates: acc.duty_updates,
                mean_duty: (acc.duty_updates > 0).then(|| acc.duty_sum / acc.duty_updates as f64),
            })
            .collect(),
        None => Vec::new(),
    };

    let Outputs {
        eeg,
        psd,
        alpha,
        segments: seg_csv,
        char_cmd,
        char_trace,
        flower_cmd,
        pressure,
    } = outputs;
    let mut files = vec![eeg.finish()?, psd.finish()?, alpha.finish()?, seg_csv.finish()?];
    let char_cmd = char_cmd.map(Csv::finish).transpose()?;
    let char_trace = char_trace.map(Csv::finish).transpose()?;
    let flower_cmd = flower_cmd.map(Csv::finish).transpose()?;
    let pressure = pressure.map(Csv::finish).transpose()?;

    let character = match (&char_cmd, &char_trace) {
        (Some(cmd), Some(trace)) => Some(CharacterSummary {
            updates: cmd.rows,
            mean_duty: (!stats.duties.is_empty())
                .then(|| stats.duties.iter().map(|&d| f64::from(d)).sum::<f64>() / stats.duties.len() as f64),
            min_duty: stats.duties.iter().copied().min(),
            max_duty: stats.duties.iter().copied().max(),
            trace_rows: trace.rows,
        }),
        _ => None,
    };
    let flower = match (&flower_cmd, &pressure) {
        (Some(cmd), Some(trace)) => Some(FlowerSummary {
            updates: cmd.rows,
            cycles_started: stats.cycles,
            trace_rows: trace.rows,
            min_p_true_kpa: stats.p_min,
            max_p_true_kpa: stats.p_max,
            mean_p_filt_kpa: stats.p_filt_sum / stats.flower_ticks.max(1) as f64,
        }),
        _ => None,
    };
    files.extend([char_cmd, char_trace, flower_cmd, pressure].into_iter().flatten());
    files.push(OutputFile {
        name: CALIBRATION_FILE.into(),
        rows: 2,
    });

    let report = RunReport {
        duration_s: pipeline.tick_index() as f64 * TICK_MS as f64 / 1000.0,
        ticks: pipeline.tick_index(),
        samples: pipeline.samples_consumed(),
        frames_emitted: pipeline.frames_emitted(),
        alpha_events: pipeline.alpha_events(),
        calibration,
        segments,
        character,
        flower,
        link_errors: pipeline.link_errors(),
        files,
    };
    let report_path = dir.join(REPORT_JSON);
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    std::fs::write(&report_path, json + "\n").map_err(io_err(&report_path))?;
    log::info!(
        "run finished: {} ticks, {} frames, {} alpha events",
        report.ticks,
        report.frames_emitted,
        report.alpha_events
    );
    Ok(report)
}
