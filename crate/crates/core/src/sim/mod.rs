//! Hardware-in-the-loop models of both embodiments.
//!
//! The soft flower is a pneumatic chamber driven by a pump and vented by a
//! solenoid valve, measured by a noisy sensor with a moving-average filter
//! and regulated by a PID loop inside a timed inflate/deflate cycle. The
//! soft character is a duty-driven motor.

mod character;
mod pid;
mod plant;
mod scheduler;
mod sensor;

pub use character::{CharacterParams, CharacterPlant};
pub use pid::{PidController, PidGains};
pub use plant::{FlowerPlant, FlowerPlantParams, MAX_DT};
pub use scheduler::{Actuation, CyclePhase, CycleScheduler};
pub use sensor::{PressureSensor, SensorParams, SensorReading};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::FlowerCommand;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("integration step {0} s outside (0, 0.01]")]
    InvalidStep(f64),
    #[error("simulation fault: {0}")]
    Fault(String),
    #[error("invalid simulation parameters: {0}")]
    Config(String),
}

/// Control period of the flower loop.
pub const CONTROL_DT: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowerConfig {
    pub plant: FlowerPlantParams,
    pub sensor: SensorParams,
    pub pid: PidGains,
}

/// State of one 100 Hz flower tick, as logged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowerTick {
    pub p_true: f64,
    pub p_meas: f64,
    pub p_filt: f64,
    pub valve_open: bool,
    pub pump_effort: f64,
    pub phase: CyclePhase,
    pub setpoint: Option<f64>,
}

/// Plant, sensor, PID and cycle scheduler wired into one closed loop.
#[derive(Debug, Clone)]
pub struct FlowerSim {
    plant: FlowerPlant,
    sensor: PressureSensor,
    pid: PidController,
    scheduler: CycleScheduler,
    last: Option<FlowerTick>,
}

impl FlowerSim {
    pub fn new(config: &FlowerConfig, guard_enabled: bool, p_min: f64, sensor_seed: u64) -> Result<Self, SimError> {
        Ok(Self {
            plant: FlowerPlant::new(config.plant)?,
            sensor: PressureSensor::new(config.sensor, sensor_seed)?,
            pid: PidController::new(config.pid)?,
            scheduler: CycleScheduler::new(guard_enabled, p_min),
            last: None,
        })
    }

    pub fn plant(&self) -> &FlowerPlant {
        &self.plant
    }

    pub fn scheduler(&self) -> &CycleScheduler {
        &self.scheduler
    }

    pub fn scheduler_mut(&mut self) -> &mut CycleScheduler {
        &mut self.scheduler
    }

    pub fn pid_mut(&mut self) -> &mut PidController {
        &mut self.pid
    }

    pub fn last_tick(&self) -> Option<&FlowerTick> {
        self.last.as_ref()
    }

    pub fn submit(&mut self, cmd: FlowerCommand) {
        self.scheduler.submit(cmd);
    }

    /// Runs the PID alone toward `setpoint` with the valve shut (no cycle).
    pub fn regulate(&mut self, setpoint: f64) -> Result<FlowerTick, SimError> {
        let reading = self.sensor.read(self.plant.p);
        let effort = self.pid.step(setpoint, reading.filtered, CONTROL_DT.as_secs_f64());
        self.plant.valve_open = false;
        self.plant.pump_effort = effort;
        self.finish(reading, CyclePhase::Idle, Some(setpoint))
    }

    /// One control tick: sense, schedule, control, then integrate the plant
    /// to the next tick. The returned state is the one at the tick instant.
    pub fn tick(&mut self) -> Result<FlowerTick, SimError> {
        let reading = self.sensor.read(self.plant.p);
        let act = self.scheduler.step(reading.filtered, CONTROL_DT);
        if act.cycle_start {
            self.pid.reset();
        }
        let effort = match (act.pid_active, act.setpoint) {
            (true, Some(sp)) => self.pid.step(sp, reading.filtered, CONTROL_DT.as_secs_f64()),
            _ => 0.0,
        };
        self.plant.valve_open = act.valve_open;
        self.plant.pump_effort = if act.valve_open { 0.0 } else { effort };
        self.finish(reading, act.phase, act.setpoint)
    }

    fn finish(&mut self, reading: SensorReading, phase: CyclePhase, setpoint: Option<f64>) -> Result<FlowerTick, SimError> {
        let tick = FlowerTick {
            p_true: self.plant.p,
            p_meas: reading.raw,
            p_filt: reading.filtered,
            valve_open: self.plant.valve_open,
            pump_effort: self.plant.pump_effort,
            phase,
            setpoint,
        };
        self.plant.step(CONTROL_DT.as_secs_f64())?;
        self.last = Some(tick);
        Ok(tick)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{to_flower_command, MappingParams};
    use proptest::prelude::*;

    fn sim(guard: bool, seed: u64) -> FlowerSim {
        FlowerSim::new(&FlowerConfig::default(), guard, 120.0, seed).unwrap()
    }

    #[test]
    fn monotone_phases_without_noise() {
        let mut cfg = FlowerConfig::default();
        cfg.sensor.noise_sigma = 0.0;
        let mut s = FlowerSim::new(&cfg, false, 120.0, 0).unwrap();
        s.submit(to_flower_command(100.0, &MappingParams::default()).unwrap());
        let mut prev = s.plant().p;
        for _ in 0..2000 {
            let t = s.tick().unwrap();
            let now = s.plant().p;
            if !t.valve_open && t.pump_effort > 0.0 {
                assert!(now >= prev);
            }
            if t.valve_open {
                assert_eq!(t.pump_effort, 0.0);
                assert!(now <= prev);
            }
            prev = now;
        }
    }

    #[test]
    fn guard_off_undershoots_guard_on_holds() {
        let low = to_flower_command(100.0, &MappingParams::default()).unwrap();
        let mut off = sim(false, 3);
        let mut on = sim(true, 3);
        off.submit(low);
        on.submit(low);
        let (mut min_off, mut min_on) = (f64::MAX, f64::MAX);
        for _ in 0..3000 {
            min_off = min_off.min(off.tick().unwrap().p_true);
            min_on = min_on.min(on.tick().unwrap().p_true);
        }
        assert!(min_off < 120.0, "{min_off}");
        assert!(min_on >= 120.0 - 0.6, "{min_on}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pressure_bounds_and_valve_pump_exclusion(
            cmds in prop::collection::vec((0.0f64..=100.0, 1usize..400), 1..8),
            guard in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mut s = sim(guard, seed);
            for (a, ticks) in cmds {
                s.submit(to_flower_command(a, &MappingParams::default()).unwrap());
                for _ in 0..ticks {
                    let t = s.tick().unwrap();
                    prop_assert!(!(t.valve_open && t.pump_effort > 0.0));
                    prop_assert!((101.3..=150.0).contains(&s.plant().p));
                }
            }
        }
    }
}
