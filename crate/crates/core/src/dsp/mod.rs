//! Alpha-power signal chain: causal 1-40 Hz bandpass, 500-sample windows with
//! half overlap, periodogram PSD, peak-gated alpha detection and
//! normalisation to A_PSD in [0, 100].

mod calibrate;
mod detect;
mod filter;
mod psd;
mod window;

pub use calibrate::{calibrate, percentile, CalibrationOptions, MIN_CALIBRATION_SAMPLES};
pub use detect::{
    band_mean, detect_alpha, normalize, peak_bin, peak_in_alpha_band, AlphaReading, Calibration, ALPHA_BAND,
    SEARCH_BAND,
};
pub use filter::{BandpassFilter, DEFAULT_ORDER};
pub use psd::{PsdEstimator, SpectrumFrame, WindowFunction};
pub use window::{offline_frames, SampleFrame, Windower, HOP_LEN, WINDOW_LEN};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal_source::{EegSample, SAMPLE_RATE_HZ};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("signal integrity: non-finite sample {0}")]
    SignalIntegrity(f64),
    #[error("frame length {got}, expected {expected}")]
    FrameLength { expected: usize, got: usize },
    #[error("filter design: {0}")]
    Design(String),
    #[error("calibration: {0}")]
    Calibration(String),
}

/// Tunables of the chain. Window geometry is fixed at 500/250.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub low_cut: f64,
    pub high_cut: f64,
    pub filter_order: usize,
    pub window: WindowFunction,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            low_cut: 1.0,
            high_cut: 40.0,
            filter_order: DEFAULT_ORDER,
            window: WindowFunction::Rectangular,
        }
    }
}

/// Streaming composition of the whole chain for one EEG stream.
#[derive(Debug, Clone)]
pub struct AlphaPipeline {
    filter: BandpassFilter,
    windower: Windower,
    psd: PsdEstimator,
    calibration: Calibration,
    frames: u64,
}

impl AlphaPipeline {
    pub fn new(config: &DspConfig, calibration: Calibration) -> Result<Self, DspError> {
        calibration.validate()?;
        Ok(Self {
            filter: BandpassFilter::new(config.low_cut, config.high_cut, config.filter_order, SAMPLE_RATE_HZ)?,
            windower: Windower::default(),
            psd: PsdEstimator::new(WINDOW_LEN, SAMPLE_RATE_HZ, config.window),
            calibration,
            frames: 0,
        })
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    pub fn set_calibration(&mut self, cal: Calibration) -> Result<(), DspError> {
        cal.validate()?;
        self.calibration = cal;
        Ok(())
    }

    pub fn frames_emitted(&self) -> u64 {
        self.frames
    }

    /// Feeds one raw sample; returns the spectrum and reading when a window completes.
    pub fn push(&mut self, sample: EegSample) -> Result<Option<(SpectrumFrame, AlphaReading)>, DspError> {
        let filtered = self.filter.filter_step(sample)?;
        let Some(frame) = self.windower.push_sample(filtered) else {
            return Ok(None);
        };
        let spectrum = self.psd.compute_psd(&frame.samples, self.frames, frame.t_end())?;
        self.frames += 1;
        let reading = detect_alpha(&spectrum, &self.calibration);
        Ok(Some((spectrum, reading)))
    }
}
