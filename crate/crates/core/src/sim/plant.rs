use serde::{Deserialize, Serialize};

use super::SimError;

/// Largest admissible integration step, s (the 100 Hz control period).
pub const MAX_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowerPlantParams {
    /// kPa absolute.
    pub p_ambient: f64,
    /// Pump ceiling, kPa absolute.
    pub p_supply: f64,
    /// Inflation rate constant, 1/s.
    pub k_pump: f64,
    /// Vent rate constant, 1/s.
    pub k_vent: f64,
    /// Pre-pressurised starting pressure, kPa.
    pub p_initial: f64,
}

impl Default for FlowerPlantParams {
    fn default() -> Self {
        Self {
            p_ambient: 101.3,
            p_supply: 150.0,
            // 120 -> 135 kPa at full effort in 2.5 s
            k_pump: std::f64::consts::LN_2 / 2.5,
            // 135 -> 120 kPa through the open valve in 2 s
            k_vent: ((135.0_f64 - 101.3) / (120.0 - 101.3)).ln() / 2.0,
            p_initial: 120.0,
        }
    }
}

impl FlowerPlantParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.p_ambient.is_finite() && self.p_supply.is_finite() && self.p_ambient < self.p_supply) {
            return bad(format!(
                "need p_ambient ({}) < p_supply ({})",
                self.p_ambient, self.p_supply
            ));
        }
        if !(self.k_pump.is_finite() && self.k_pump > 0.0 && self.k_vent.is_finite() && self.k_vent > 0.0) {
            return bad(format!("rate constants must be > 0 (k_pump {}, k_vent {})", self.k_pump, self.k_vent));
        }
        if !(self.p_ambient..=self.p_supply).contains(&self.p_initial) {
            return bad(format!("p_initial {} outside [p_ambient, p_supply]", self.p_initial));
        }
        Ok(())
    }
}

/// First-order pneumatic chamber with a pump and a vent valve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowerPlant {
    pub params: FlowerPlantParams,
    /// True chamber pressure, kPa absolute.
    pub p: f64,
    pub valve_open: bool,
    /// In [0, 1].
    pub pump_effort: f64,
}

impl FlowerPlant {
    pub fn new(params: FlowerPlantParams) -> Result<Self, SimError> {
        params.validate()?;
        Ok(Self {
            params,
            p: params.p_initial,
            valve_open: false,
            pump_effort: 0.0,
        })
    }

    /// dp/dt at the current state.
    pub fn derivative(&self) -> f64 {
        let FlowerPlantParams {
            p_ambient,
            p_supply,
            k_pump,
            k_vent,
            ..
        } = self.params;
        let vent = if self.valve_open { k_vent * (self.p - p_ambient) } else { 0.0 };
        k_pump * self.pump_effort * (p_supply - self.p) - vent
    }

    /// Explicit Euler step, clamped to [p_ambient, p_supply].
    pub fn step(&mut self, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(SimError::InvalidStep(dt));
        }
        if !(self.p.is_finite() && self.pump_effort.is_finite()) {
            return Err(SimError::Fault(format!(
                "non-finite plant state p={} effort={}",
                self.p, self.pump_effort
            )));
        }
        let next = self.p + dt * self.derivative();
        if !next.is_finite() {
            return Err(SimError::Fault(format!("pressure diverged to {next}")));
        }
        self.p = next.clamp(self.params.p_ambient, self.params.p_supply);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sealed_chamber_holds() {
        let mut plant = FlowerPlant::new(FlowerPlantParams::default()).unwrap();
        for _ in 0..1000 {
            plant.step(0.01).unwrap();
        }
        assert_eq!(plant.p, 120.0);
    }

    #[test]
    fn open_valve_vents_to_ambient() {
        let mut plant = FlowerPlant::new(FlowerPlantParams::default()).unwrap();
        plant.valve_open = true;
        for _ in 0..10_000 {
            plant.step(0.01).unwrap();
        }
        assert!((plant.p - 101.3).abs() < 1e-6);
    }

    #[test]
    fn full_effort_matches_closed_form() {
        let params = FlowerPlantParams::default();
        let mut plant = FlowerPlant::new(params).unwrap();
        plant.pump_effort = 1.0;
        let exact_reach = std::f64::consts::LN_2 / params.k_pump;
        let mut t = 0.0;
        let mut reach = None;
        for i in 1..=500 {
            plant.step(0.01).unwrap();
            t = i as f64 * 0.01;
            let exact = 150.0 - 30.0 * (-params.k_pump * t).exp();
            assert!((plant.p - exact).abs() / (exact - 120.0).max(1e-9) < 0.01 || (plant.p - exact).abs() < 0.05);
            if reach.is_none() && plant.p >= 135.0 {
                reach = Some(t);
            }
        }
        let reach = reach.unwrap();
        assert!((reach - exact_reach).abs() / exact_reach < 0.01, "{reach} vs {exact_reach}");
        assert!((exact_reach - 2.5).abs() < 1e-12);
        let _ = t;
    }

    #[test]
    fn vent_time_constant() {
        let params = FlowerPlantParams::default();
        let mut plant = FlowerPlant::new(FlowerPlantParams { p_initial: 135.0, ..params }).unwrap();
        plant.valve_open = true;
        for _ in 0..200 {
            plant.step(0.01).unwrap();
        }
        // Euler vs exact 120.0 at t = 2 s
        assert!((plant.p - 120.0).abs() < 0.1, "{}", plant.p);
    }

    #[test]
    fn step_contract() {
        let mut plant = FlowerPlant::new(FlowerPlantParams::default()).unwrap();
        assert!(matches!(plant.step(0.0), Err(SimError::InvalidStep(_))));
        assert!(matches!(plant.step(0.02), Err(SimError::InvalidStep(_))));
        plant.pump_effort = f64::NAN;
        assert!(matches!(plant.step(0.01), Err(SimError::Fault(_))));
    }
}
