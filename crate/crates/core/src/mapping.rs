//! Alpha power to actuator commands: PWM duty for the soft character, and
//! pressure setpoint plus inflate/deflate durations for the soft flower.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("a_psd {0} outside [0, 100]")]
    OutOfRange(f64),
    #[error("invalid mapping parameters: {0}")]
    Invalid(String),
    #[error("unknown mapping parameter {0:?}")]
    UnknownParam(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingParams {
    /// Duty per A_PSD unit.
    pub alpha_gain: f64,
    /// kPa per A_PSD unit.
    pub beta_gain: f64,
    /// Seconds of inflation per A_PSD unit.
    pub gamma_gain: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub t_inf_min: f64,
    pub t_inf_max: f64,
    pub deflate_offset: f64,
}

impl Default for MappingParams {
    fn default() -> Self {
        Self {
            alpha_gain: 2.55,
            beta_gain: 0.15,
            gamma_gain: 0.02,
            p_min: 120.0,
            p_max: 135.0,
            t_inf_min: 0.8,
            t_inf_max: 2.8,
            deflate_offset: 0.5,
        }
    }
}

const CONSISTENCY_TOL: f64 = 1e-9;

pub const PARAM_NAMES: &[&str] = &[
    "alpha_gain",
    "beta_gain",
    "gamma_gain",
    "p_min",
    "p_max",
    "t_inf_min",
    "t_inf_max",
    "deflate_offset",
];

impl MappingParams {
    pub fn validate(&self) -> Result<(), MappingError> {
        let invalid = |m: String| Err(MappingError::Invalid(m));
        let fields = [
            ("alpha_gain", self.alpha_gain),
            ("beta_gain", self.beta_gain),
            ("gamma_gain", self.gamma_gain),
            ("p_min", self.p_min),
            ("p_max", self.p_max),
            ("t_inf_min", self.t_inf_min),
            ("t_inf_max", self.t_inf_max),
            ("deflate_offset", self.deflate_offset),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return invalid(format!("{name} is not finite ({v})"));
        }
        if let Some((name, v)) = fields[..3].iter().find(|(_, v)| *v < 0.0) {
            return invalid(format!("{name} must be >= 0, got {v}"));
        }
        if !(self.p_min < self.p_max) {
            return invalid(format!("p_min ({}) must be < p_max ({})", self.p_min, self.p_max));
        }
        if !(0.0 <= self.t_inf_min && self.t_inf_min < self.t_inf_max) {
            return invalid(format!(
                "need 0 <= t_inf_min ({}) < t_inf_max ({})",
                self.t_inf_min, self.t_inf_max
            ));
        }
        if self.deflate_offset < 0.0 {
            return invalid(format!("deflate_offset must be >= 0, got {}", self.deflate_offset));
        }
        let beta = (self.p_max - self.p_min) / 100.0;
        if (self.beta_gain - beta).abs() > CONSISTENCY_TOL * beta.abs().max(1.0) {
            return invalid(format!(
                "beta_gain {} inconsistent with (p_max - p_min)/100 = {beta}",
                self.beta_gain
            ));
        }
        let gamma = (self.t_inf_max - self.t_inf_min) / 100.0;
        if (self.gamma_gain - gamma).abs() > CONSISTENCY_TOL * gamma.abs().max(1.0) {
            return invalid(format!(
                "gamma_gain {} inconsistent with (t_inf_max - t_inf_min)/100 = {gamma}",
                self.gamma_gain
            ));
        }
        Ok(())
    }

    /// Returns a copy with one parameter changed. Gains and range bounds are
    /// coupled: a gain change moves the upper bound, a bound change re-derives
    /// the gain. The result is validated as a whole.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, MappingError> {
        let mut p = *self;
        match name {
            "alpha_gain" => p.alpha_gain = value,
            "beta_gain" => {
                p.beta_gain = value;
                p.p_max = p.p_min + 100.0 * value;
            }
            "gamma_gain" => {
                p.gamma_gain = value;
                p.t_inf_max = p.t_inf_min + 100.0 * value;
            }
            "p_min" => {
                p.p_min = value;
                p.beta_gain = (p.p_max - value) / 100.0;
            }
            "p_max" => {
                p.p_max = value;
                p.beta_gain = (value - p.p_min) / 100.0;
            }
            "t_inf_min" => {
                p.t_inf_min = value;
                p.gamma_gain = (p.t_inf_max - value) / 100.0;
            }
            "t_inf_max" => {
                p.t_inf_max = value;
                p.gamma_gain = (value - p.t_inf_min) / 100.0;
            }
            "deflate_offset" => p.deflate_offset = value,
            other => return Err(MappingError::UnknownParam(other.to_owned())),
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterCommand {
    pub duty: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowerCommand {
    pub setpoint_kpa: f64,
    pub t_inflation: Duration,
    pub t_deflation: Duration,
}

impl FlowerCommand {
    pub fn t_inflation_s(&self) -> f64 {
        self.t_inflation.as_secs_f64()
    }

    pub fn t_deflation_s(&self) -> f64 {
        self.t_deflation.as_secs_f64()
    }
}

fn check_range(a_psd: f64) -> Result<(), MappingError> {
    if (0.0..=100.0).contains(&a_psd) {
        Ok(())
    } else {
        Err(MappingError::OutOfRange(a_psd))
    }
}

fn seconds_to_duration(s: f64) -> Duration {
    Duration::from_nanos((s * 1e9).round().max(0.0) as u64)
}

/// Rounds half away from zero after snapping to 1e-9, so that products of
/// decimal gains (2.55 · 50 = 127.5) round as written.
fn round_decimal(x: f64) -> f64 {
    ((x * 1e9).round() / 1e9).round()
}

pub fn to_duty(a_psd: f64, params: &MappingParams) -> Result<CharacterCommand, MappingError> {
    check_range(a_psd)?;
    let duty = round_decimal(params.alpha_gain * a_psd).clamp(0.0, 255.0);
    Ok(CharacterCommand { duty: duty as u8 })
}

pub fn to_flower_command(a_psd: f64, params: &MappingParams) -> Result<FlowerCommand, MappingError> {
    check_range(a_psd)?;
    let setpoint_kpa = (params.p_min + params.beta_gain * a_psd).clamp(params.p_min, params.p_max);
    let t_inf = (params.t_inf_min + params.gamma_gain * a_psd).clamp(params.t_inf_min, params.t_inf_max);
    let t_inflation = seconds_to_duration(t_inf);
    Ok(FlowerCommand {
        setpoint_kpa,
        t_inflation,
        t_deflation: t_inflation + seconds_to_duration(params.deflate_offset),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> MappingParams {
        MappingParams::default()
    }

    #[test]
    fn duty_examples() {
        assert_eq!(to_duty(0.0, &p()).unwrap().duty, 0);
        assert_eq!(to_duty(100.0, &p()).unwrap().duty, 255);
        assert_eq!(to_duty(50.0, &p()).unwrap().duty, 128);
        assert!(matches!(to_duty(100.5, &p()), Err(MappingError::OutOfRange(_))));
        assert!(to_duty(-0.1, &p()).is_err());
        assert!(to_duty(f64::NAN, &p()).is_err());
    }

    #[test]
    fn flower_examples() {
        let c = to_flower_command(100.0, &p()).unwrap();
        assert_eq!(c.setpoint_kpa, 135.0);
        assert_eq!(c.t_inflation, Duration::from_millis(2800));
        assert_eq!(c.t_deflation, Duration::from_millis(3300));

        let c = to_flower_command(0.0, &p()).unwrap();
        assert_eq!(c.setpoint_kpa, 120.0);
        assert_eq!(c.t_inflation, Duration::from_millis(800));
        assert_eq!(c.t_deflation, Duration::from_millis(1300));

        let c = to_flower_command(50.0, &p()).unwrap();
        assert_eq!(c.setpoint_kpa, 127.5);
        assert_eq!(c.t_inflation, Duration::from_millis(1800));
        assert_eq!(c.t_deflation, Duration::from_millis(2300));
    }

    #[test]
    fn defaults_are_consistent() {
        p().validate().unwrap();
    }

    #[test]
    fn param_updates() {
        assert_eq!(p().with_param("alpha_gain", 2.55).unwrap(), p());
        assert!(p().with_param("beta_gain", -1.0).is_err());
        let q = p().with_param("beta_gain", 0.2).unwrap();
        assert!((q.p_max - 140.0).abs() < 1e-9);
        let q = p().with_param("p_max", 130.0).unwrap();
        assert!((q.beta_gain - 0.1).abs() < 1e-12);
        assert!(p().with_param("p_min", 140.0).is_err());
        assert!(matches!(p().with_param("delta", 1.0), Err(MappingError::UnknownParam(_))));
        assert!(p().with_param("alpha_gain", -2.0).is_err());
    }

    #[test]
    fn inconsistent_gain_rejected() {
        let q = MappingParams {
            beta_gain: 0.2,
            ..p()
        };
        assert!(q.validate().is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_a_psd(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(to_duty(lo, &p()).unwrap().duty <= to_duty(hi, &p()).unwrap().duty);
            let (cl, ch) = (to_flower_command(lo, &p()).unwrap(), to_flower_command(hi, &p()).unwrap());
            prop_assert!(cl.setpoint_kpa <= ch.setpoint_kpa);
            prop_assert!(cl.t_inflation <= ch.t_inflation);
            prop_assert!(cl.t_deflation <= ch.t_deflation);
        }

        #[test]
        fn command_invariants(a in 0.0f64..=100.0) {
            let c = to_flower_command(a, &p()).unwrap();
            prop_assert!((120.0..=135.0).contains(&c.setpoint_kpa));
            prop_assert!(c.t_inflation >= Duration::from_millis(800) && c.t_inflation <= Duration::from_millis(2800));
            prop_assert_eq!(c.t_deflation - c.t_inflation, Duration::from_millis(500));
        }
    }
}
