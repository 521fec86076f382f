use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CharacterParams {
    /// Motor speed at duty 255, rad/s.
    pub omega_max: f64,
    /// Motor time constant, s.
    pub motor_tau: f64,
    /// Dance phase rate per unit motor speed.
    pub wobble_gain: f64,
}

impl Default for CharacterParams {
    fn default() -> Self {
        Self {
            omega_max: 30.0,
            motor_tau: 0.3,
            wobble_gain: 0.2,
        }
    }
}

impl CharacterParams {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("omega_max", self.omega_max),
            ("motor_tau", self.motor_tau),
            ("wobble_gain", self.wobble_gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Duty-driven DC motor whose speed sets the dancing frequency of the
/// inflatable character.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterPlant {
    pub params: CharacterParams,
    pub duty: u8,
    /// rad/s.
    pub omega: f64,
    /// rad.
    pub wobble_phase: f64,
    /// Normalised movement amplitude in [0, 1].
    pub amplitude: f64,
}

impl CharacterPlant {
    pub fn new(params: CharacterParams) -> Result<Self, SimError> {
        params.validate()?;
        Ok(Self {
            params,
            duty: 0,
            omega: 0.0,
            wobble_phase: 0.0,
            amplitude: 0.0,
        })
    }

    pub fn target_omega(&self) -> f64 {
        self.params.omega_max * f64::from(self.duty) / 255.0
    }

    /// Hz.
    pub fn dance_frequency(&self) -> f64 {
        self.params.wobble_gain * self.omega / (2.0 * PI)
    }

    /// Advances the motor by `dt` under `duty`. The first-order speed lag is
    /// integrated exactly, so omega never leaves [0, omega_max].
    pub fn step(&mut self, duty: u8, dt: f64) -> Result<(), SimError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::InvalidStep(dt));
        }
        self.duty = duty;
        let target = self.target_omega();
        let alpha = 1.0 - (-dt / self.params.motor_tau).exp();
        self.omega = (self.omega + (target - self.omega) * alpha).clamp(0.0, self.params.omega_max);
        self.wobble_phase = (self.wobble_phase + self.params.wobble_gain * self.omega * dt) % (2.0 * PI);
        self.amplitude = self.omega / self.params.omega_max;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settle(duty: u8) -> CharacterPlant {
        let mut c = CharacterPlant::new(CharacterParams::default()).unwrap();
        for _ in 0..1000 {
            c.step(duty, 0.01).unwrap();
        }
        c
    }

    #[test]
    fn zero_duty_rests() {
        let c = settle(0);
        assert_eq!(c.omega, 0.0);
        assert_eq!(c.dance_frequency(), 0.0);
    }

    #[test]
    fn full_duty_reaches_omega_max() {
        let c = settle(255);
        assert!((c.omega - 30.0).abs() < 1e-9);
        assert!((c.dance_frequency() - 0.2 * 30.0 / (2.0 * PI)).abs() < 1e-9);
        assert!((c.amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn half_duty_is_linear() {
        let c = settle(128);
        assert!((c.omega - 30.0 * 128.0 / 255.0).abs() < 1e-9);
        assert!((c.amplitude - 128.0 / 255.0).abs() < 1e-9);
    }

    #[test]
    fn speed_stays_bounded_and_amplitude_monotone() {
        let mut prev = 0.0;
        for duty in (0..=255u8).step_by(15) {
            let c = settle(duty);
            assert!(c.omega >= 0.0 && c.omega <= 30.0);
            assert!(c.amplitude >= prev);
            prev = c.amplitude;
        }
    }
}
