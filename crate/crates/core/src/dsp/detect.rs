use serde::{Deserialize, Serialize};

use super::{DspError, SpectrumFrame};

/// Peak search range, Hz.
pub const SEARCH_BAND: (f64, f64) = (6.0, 20.0);
/// Alpha band, Hz (inclusive).
pub const ALPHA_BAND: (f64, f64) = (8.0, 13.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Band power mapped to A_PSD = 100, µV²/Hz.
    pub p_ref: f64,
    /// Minimum peak PSD for an alpha event, µV²/Hz.
    pub threshold: f64,
}

impl Calibration {
    pub fn new(p_ref: f64, threshold: f64) -> Result<Self, DspError> {
        let cal = Self { p_ref, threshold };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<(), DspError> {
        if !(self.p_ref.is_finite() && self.p_ref > 0.0) {
            return Err(DspError::Calibration(format!("p_ref must be > 0, got {}", self.p_ref)));
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(DspError::Calibration(format!(
                "threshold must be >= 0, got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Flat `key = value` text form.
    pub fn to_text(&self) -> String {
        format!("p_ref = {}\nthreshold = {}\n", self.p_ref, self.threshold)
    }

    pub fn parse(text: &str) -> Result<Self, DspError> {
        let mut p_ref = None;
        let mut threshold = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DspError::Calibration(format!("bad line {line:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| DspError::Calibration(format!("bad number in {line:?}")))?;
            match k.trim() {
                "p_ref" => p_ref = Some(v),
                "threshold" => threshold = Some(v),
                other => return Err(DspError::Calibration(format!("unknown key {other:?}"))),
            }
        }
        match (p_ref, threshold) {
            (Some(p), Some(t)) => Self::new(p, t),
            _ => Err(DspError::Calibration("calibration needs p_ref and threshold".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaReading {
    /// Time of the window's last sample, s.
    pub t: f64,
    /// Gated alpha band power, µV²/Hz; zero when the gate fails.
    pub p_alpha: f64,
    /// Normalised alpha power in [0, 100].
    pub a_psd: f64,
    pub gated: bool,
    /// Frequency of the 6-20 Hz peak.
    pub peak_hz: f64,
}

/// `100 · min(1, p_alpha / p_ref)`, clamped to [0, 100].
pub fn normalize(p_alpha: f64, cal: &Calibration) -> f64 {
    let ratio = p_alpha / cal.p_ref;
    if ratio.is_nan() {
        return 0.0;
    }
    (100.0 * ratio.min(1.0)).clamp(0.0, 100.0)
}

/// Index of the largest PSD value with `lo <= f <= hi`; ties go to the lowest frequency.
pub fn peak_bin(spectrum: &SpectrumFrame, lo: f64, hi: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, (&f, &p)) in spectrum.freq.iter().zip(&spectrum.psd).enumerate() {
        if f < lo || f > hi {
            continue;
        }
        match best {
            Some(b) if spectrum.psd[b] >= p => {}
            _ => best = Some(k),
        }
    }
    best
}

/// Mean PSD over the alpha band.
pub fn band_mean(spectrum: &SpectrumFrame) -> f64 {
    let (sum, n) = spectrum
        .band(ALPHA_BAND.0, ALPHA_BAND.1)
        .fold((0.0, 0usize), |(s, n), (_, p)| (s + p, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// True when the 6-20 Hz peak lies inside the alpha band. Returns the peak bin too.
pub fn peak_in_alpha_band(spectrum: &SpectrumFrame) -> Option<(usize, bool)> {
    let k = peak_bin(spectrum, SEARCH_BAND.0, SEARCH_BAND.1)?;
    let f = spectrum.freq[k];
    Some((k, f >= ALPHA_BAND.0 && f <= ALPHA_BAND.1))
}

pub fn detect_alpha(spectrum: &SpectrumFrame, cal: &Calibration) -> AlphaReading {
    let (peak_hz, gated) = match peak_in_alpha_band(spectrum) {
        Some((k, in_band)) => (spectrum.freq[k], in_band && spectrum.psd[k] >= cal.threshold),
        None => (f64::NAN, false),
    };
    let p_alpha = if gated { band_mean(spectrum) } else { 0.0 };
    AlphaReading {
        t: spectrum.t_end,
        p_alpha,
        a_psd: normalize(p_alpha, cal),
        gated,
        peak_hz,
    }
}
