use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    /// Effort per kPa.
    pub kp: f64,
    /// Effort per kPa·s.
    pub ki: f64,
    /// Effort·s per kPa.
    pub kd: f64,
    /// Bound on |∫e dt|, kPa·s.
    pub windup_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.4,
            ki: 0.2,
            kd: 0.02,
            windup_limit: 5.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("kp", self.kp),
            ("ki", self.ki),
            ("kd", self.kd),
            ("windup_limit", self.windup_limit),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Pump-effort PID with output limits [0, 1] and a clamped integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidController {
    pub gains: PidGains,
    integral: f64,
    prev_error: Option<f64>,
}

impl PidController {
    pub const OUTPUT_MIN: f64 = 0.0;
    pub const OUTPUT_MAX: f64 = 1.0;

    pub fn new(gains: PidGains) -> Result<Self, SimError> {
        gains.validate()?;
        Ok(Self {
            gains,
            integral: 0.0,
            prev_error: None,
        })
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// One control update. The derivative term is the first difference of the
    /// error and is skipped on the first call after a reset.
    pub fn step(&mut self, setpoint: f64, measurement: f64, dt: f64) -> f64 {
        let e = setpoint - measurement;
        let limit = self.gains.windup_limit;
        self.integral = (self.integral + e * dt).clamp(-limit, limit);
        let derivative = match self.prev_error {
            Some(prev) if dt > 0.0 => (e - prev) / dt,
            _ => 0.0,
        };
        self.prev_error = Some(e);
        let u = self.gains.kp * e + self.gains.ki * self.integral + self.gains.kd * derivative;
        if u.is_nan() {
            return Self::OUTPUT_MIN;
        }
        u.clamp(Self::OUTPUT_MIN, Self::OUTPUT_MAX)
    }
}
