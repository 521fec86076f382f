use serde::{Deserialize, Serialize};

use super::{band_mean, peak_in_alpha_band, AlphaPipeline, Calibration, DspConfig, DspError};
use crate::signal_source::{EegSample, SAMPLE_RATE_HZ};

/// One full window plus one hop.
pub const MIN_CALIBRATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationOptions {
    /// Percentile of the gate-eligible band means used as p_ref.
    pub percentile: f64,
    /// threshold = ratio · p_ref.
    pub threshold_ratio: f64,
    pub p_ref_override: Option<f64>,
    pub threshold_override: Option<f64>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            percentile: 95.0,
            threshold_ratio: 0.25,
            p_ref_override: None,
            threshold_override: None,
        }
    }
}

/// Linear-interpolated percentile of `values` (0..=100).
pub fn percentile(values: &[f64], pct: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = (pct / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

/// Runs the full chain over an eyes-closed recording and derives the
/// normalisation reference and detection threshold from it.
pub fn calibrate(
    recording: &[EegSample],
    dsp: &DspConfig,
    opts: &CalibrationOptions,
) -> Result<Calibration, DspError> {
    if recording.len() < MIN_CALIBRATION_SAMPLES {
        return Err(DspError::Calibration(format!(
            "recording too short: {} samples ({:.3} s), need at least {MIN_CALIBRATION_SAMPLES} ({} s)",
            recording.len(),
            recording.len() as f64 / SAMPLE_RATE_HZ,
            MIN_CALIBRATION_SAMPLES as f64 / SAMPLE_RATE_HZ
        )));
    }
    // the calibration itself is not known yet; the gate below ignores the threshold
    let placeholder = Calibration {
        p_ref: 1.0,
        threshold: 0.0,
    };
    let mut chain = AlphaPipeline::new(dsp, placeholder)?;
    let mut eligible = Vec::new();
    for &s in recording {
        if let Some((spectrum, _)) = chain.push(s)? {
            if let Some((_, true)) = peak_in_alpha_band(&spectrum) {
                eligible.push(band_mean(&spectrum));
            }
        }
    }

    let p_ref = match opts.p_ref_override {
        Some(p) => p,
        None => percentile(&eligible, opts.percentile).ok_or_else(|| {
            DspError::Calibration("no gate-eligible alpha frames in the recording".into())
        })?,
    };
    let threshold = opts.threshold_override.unwrap_or(opts.threshold_ratio * p_ref);
    Calibration::new(p_ref, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_source::{Eyes, Scenario, ScenarioSegment, SynthGenerator, SynthParams};

    fn closed_recording(seconds: f64, seed: u64) -> Vec<EegSample> {
        let scen = Scenario::new(vec![ScenarioSegment::new(Eyes::Closed, seconds)]).unwrap();
        let params = SynthParams {
            rng_seed: seed,
            ..SynthParams::default()
        };
        SynthGenerator::new(params, scen)
            .unwrap()
            .take((seconds * 250.0) as usize)
            .collect()
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 50.0), Some(3.0));
        assert_eq!(percentile(&[1.0, 2.0], 95.0), Some(1.95));
        assert_eq!(percentile(&[7.0], 95.0), Some(7.0));
        assert_eq!(percentile(&[], 95.0), None);
    }

    #[test]
    fn closed_eyes_calibration() {
        let rec = closed_recording(10.0, 7);
        let cal = calibrate(&rec, &DspConfig::default(), &CalibrationOptions::default()).unwrap();
        assert!(cal.p_ref > 0.0);
        assert_eq!(cal.threshold, cal.p_ref / 4.0);
    }

    #[test]
    fn too_short_recording() {
        let rec = closed_recording(10.0, 7);
        let err = calibrate(&rec[..999], &DspConfig::default(), &CalibrationOptions::default()).unwrap_err();
        assert!(matches!(err, DspError::Calibration(_)));
        assert!(calibrate(&rec[..1000], &DspConfig::default(), &CalibrationOptions::default()).is_ok());
    }

    #[test]
    fn deterministic() {
        let a = calibrate(&closed_recording(8.0, 3), &DspConfig::default(), &CalibrationOptions::default()).unwrap();
        let b = calibrate(&closed_recording(8.0, 3), &DspConfig::default(), &CalibrationOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overrides_apply() {
        let opts = CalibrationOptions {
            p_ref_override: Some(12.0),
            threshold_override: Some(1.5),
            ..CalibrationOptions::default()
        };
        let cal = calibrate(&closed_recording(5.0, 1), &DspConfig::default(), &opts).unwrap();
        assert_eq!(cal, Calibration::new(12.0, 1.5).unwrap());
    }
}
