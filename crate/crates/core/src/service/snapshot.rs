use serde::{Deserialize, Serialize};

use crate::dsp::{SpectrumFrame, SEARCH_BAND};
use crate::mapping::MappingParams;
use crate::orchestrator::Pipeline;
use crate::signal_source::Eyes;
use crate::sim::PidGains;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumView {
    pub frame_idx: u64,
    pub freq: Vec<f64>,
    pub psd: Vec<f64>,
}

impl SpectrumView {
    /// The 6-20 Hz search band of `frame`, for display.
    pub fn from_frame(frame: &SpectrumFrame) -> Self {
        let (freq, psd) = frame.band(SEARCH_BAND.0, SEARCH_BAND.1).unzip();
        Self {
            frame_idx: frame.frame_idx,
            freq,
            psd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterView {
    pub duty: u8,
    pub dance_freq_hz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowerView {
    pub setpoint: Option<f64>,
    pub p_filt: f64,
    pub valve: bool,
    pub phase: String,
    pub remaining_s: f64,
}

/// Live-tunable parameters as currently applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveParams {
    #[serde(flatten)]
    pub mapping: MappingParams,
    /// `None` until a calibration is known.
    pub threshold: Option<f64>,
    pub p_ref: Option<f64>,
    pub guard: bool,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub windup_limit: f64,
}

impl ActiveParams {
    pub fn from_config(config: &crate::orchestrator::RunConfig, calibration: Option<crate::dsp::Calibration>) -> Self {
        let cal = calibration.or(config.calibration);
        Self {
            mapping: config.mapping,
            threshold: cal.map(|c| c.threshold),
            p_ref: cal.map(|c| c.p_ref),
            guard: config.guard_enabled,
            kp: config.flower.pid.kp,
            ki: config.flower.pid.ki,
            kd: config.flower.pid.kd,
            windup_limit: config.flower.pid.windup_limit,
        }
    }

    pub fn pid(&self) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            windup_limit: self.windup_limit,
        }
    }

    pub fn calibration(&self) -> Option<crate::dsp::Calibration> {
        Some(crate::dsp::Calibration {
            p_ref: self.p_ref?,
            threshold: self.threshold?,
        })
    }
}

/// One immutable view of the pipeline and plants between two ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    /// Server clock, s. Strictly increasing across a session.
    pub t_s: f64,
    pub running: bool,
    /// Run clock, s; `None` when no run is active.
    pub run_t_s: Option<f64>,
    pub eyes_state: Option<Eyes>,
    pub a_psd: Option<f64>,
    pub gated: Option<bool>,
    pub override_alpha: Option<u8>,
    pub spectrum: Option<SpectrumView>,
    pub character: Option<CharacterView>,
    pub flower: Option<FlowerView>,
    pub params: ActiveParams,
}

impl StateSnapshot {
    /// Captures the pipeline state at server time `t_s`.
    pub fn capture(pipeline: &Pipeline, params: ActiveParams, t_s: f64) -> Self {
        let latest = pipeline.latest();
        Self {
            t_s,
            running: true,
            run_t_s: Some(pipeline.t_ms() as f64 / 1000.0),
            eyes_state: pipeline.eyes(),
            a_psd: latest.map(|(_, r)| r.a_psd),
            gated: latest.map(|(_, r)| r.gated),
            override_alpha: pipeline.override_alpha(),
            spectrum: latest.map(|(f, _)| SpectrumView::from_frame(f)),
            character: pipeline.character().map(|c| CharacterView {
                duty: c.duty,
                dance_freq_hz: c.dance_frequency(),
                amplitude: c.amplitude,
            }),
            flower: pipeline.flower().and_then(|s| {
                s.last_tick().map(|t| FlowerView {
                    setpoint: t.setpoint,
                    p_filt: t.p_filt,
                    valve: t.valve_open,
                    phase: t.phase.name().to_string(),
                    remaining_s: s.scheduler().phase().remaining().as_secs_f64(),
                })
            }),
            params,
        }
    }

    /// Snapshot with no active run: flower idle, nothing measured.
    pub fn idle(params: ActiveParams, t_s: f64) -> Self {
        Self {
            t_s,
            running: false,
            run_t_s: None,
            eyes_state: None,
            a_psd: None,
            gated: None,
            override_alpha: None,
            spectrum: None,
            character: None,
            flower: Some(FlowerView {
                setpoint: None,
                p_filt: 0.0,
                valve: false,
                phase: "idle".into(),
                remaining_s: 0.0,
            }),
            params,
        }
    }
}
