use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::DspError;
use super::window::WINDOW_LEN;
use crate::signal_source::SAMPLE_RATE_HZ;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFunction {
    #[default]
    Rectangular,
    Hann,
}

impl std::str::FromStr for WindowFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "boxcar" => Ok(Self::Rectangular),
            "hann" | "hanning" => Ok(Self::Hann),
            other => Err(format!("unknown window function {other:?}")),
        }
    }
}

impl WindowFunction {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFunction::Rectangular => vec![1.0; n],
            // periodic Hann
            WindowFunction::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// One-sided PSD of a single analysis window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFrame {
    pub frame_idx: u64,
    /// Time of the last sample in the window, s.
    pub t_end: f64,
    /// Hz, spacing fs / window length.
    pub freq: Vec<f64>,
    /// µV²/Hz.
    pub psd: Vec<f64>,
}

impl SpectrumFrame {
    pub fn resolution(&self) -> f64 {
        self.freq.get(1).copied().unwrap_or(0.0) - self.freq[0]
    }

    /// Σ psd · Δf.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution()
    }

    /// `(freq, psd)` pairs with `lo <= f <= hi`.
    pub fn band(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.freq
            .iter()
            .copied()
            .zip(self.psd.iter().copied())
            .filter(move |&(f, _)| f >= lo && f <= hi)
    }
}

/// Periodogram estimator for fixed-length frames.
#[derive(Clone)]
pub struct PsdEstimator {
    len: usize,
    fs: f64,
    window_fn: WindowFunction,
    window: Vec<f64>,
    window_energy: f64,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for PsdEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PsdEstimator")
            .field("len", &self.len)
            .field("fs", &self.fs)
            .field("window_fn", &self.window_fn)
            .finish()
    }
}

impl Default for PsdEstimator {
    fn default() -> Self {
        Self::new(WINDOW_LEN, SAMPLE_RATE_HZ, WindowFunction::Rectangular)
    }
}

impl PsdEstimator {
    pub fn new(len: usize, fs: f64, window_fn: WindowFunction) -> Self {
        assert!(len >= 2 && len.is_multiple_of(2), "frame length must be even, got {len}");
        let fft = FftPlanner::new().plan_fft_forward(len);
        let window = window_fn.coefficients(len);
        let window_energy = window.iter().map(|w| w * w).sum();
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self {
            len,
            fs,
            window_fn,
            window,
            window_energy,
            fft,
            buf: vec![Complex64::default(); len],
            scratch,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.len
    }

    pub fn window_function(&self) -> WindowFunction {
        self.window_fn
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn num_bins(&self) -> usize {
        self.len / 2 + 1
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let df = self.fs / self.len as f64;
        (0..self.num_bins()).map(|k| k as f64 * df).collect()
    }

    /// `psd[k] = c · |X[k]|² / (fs · Σw²)` with `c = 2` on interior bins and
    /// `c = 1` on DC and Nyquist.
    pub fn psd(&mut self, samples: &[f64]) -> Result<Vec<f64>, DspError> {
        if samples.len() != self.len {
            return Err(DspError::FrameLength {
                expected: self.len,
                got: samples.len(),
            });
        }
        for ((b, &x), &w) in self.buf.iter_mut().zip(samples).zip(&self.window) {
            *b = Complex64::new(x * w, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let norm = 1.0 / (self.fs * self.window_energy);
        let nyquist = self.len / 2;
        Ok((0..=nyquist)
            .map(|k| {
                let c = if k == 0 || k == nyquist { 1.0 } else { 2.0 };
                c * norm * self.buf[k].norm_sqr()
            })
            .collect())
    }

    pub fn compute_psd(&mut self, samples: &[f64], frame_idx: u64, t_end: f64) -> Result<SpectrumFrame, DspError> {
        let psd = self.psd(samples)?;
        Ok(SpectrumFrame {
            frame_idx,
            t_end,
            freq: self.frequencies(),
            psd,
        })
    }
}
