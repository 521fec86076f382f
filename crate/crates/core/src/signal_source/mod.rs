//! EEG sample streams: a seeded synthetic alpha generator and a CSV replay
//! source. Both produce samples on the fixed 250 Hz grid.

mod replay;
mod scenario;
mod synth;

pub use replay::{write_raw_csv, ReplaySource, RAW_CSV_HEADER};
pub use scenario::{default_scenario, Eyes, Scenario, ScenarioSegment};
pub use synth::{SynthGenerator, SynthParams};

use thiserror::Error;

/// Sampling rate of every EEG stream in the system.
pub const SAMPLE_RATE_HZ: f64 = 250.0;

/// Sample period in whole milliseconds (1/250 s).
pub const SAMPLE_PERIOD_MS: u64 = 4;

/// One sample of the single-channel EEG stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EegSample {
    /// Position in the stream, starting at zero.
    pub index: u64,
    /// Seconds since stream start, always `index / 250`.
    pub t: f64,
    /// Microvolts.
    pub v: f64,
}

impl EegSample {
    pub fn new(index: u64, v: f64) -> Self {
        Self {
            index,
            t: index as f64 / SAMPLE_RATE_HZ,
            v,
        }
    }

    /// Sample time on the integer millisecond clock.
    pub fn t_ms(&self) -> u64 {
        self.index * SAMPLE_PERIOD_MS
    }
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Anything that yields EEG samples in time order.
pub trait SampleSource {
    /// `Ok(None)` marks the end of a finite stream.
    fn next_sample(&mut self) -> Result<Option<EegSample>, SourceError>;
}

impl SampleSource for SynthGenerator {
    fn next_sample(&mut self) -> Result<Option<EegSample>, SourceError> {
        Ok(Some(SynthGenerator::next_sample(self)))
    }
}

impl SampleSource for ReplaySource {
    fn next_sample(&mut self) -> Result<Option<EegSample>, SourceError> {
        self.replay_next()
    }
}
