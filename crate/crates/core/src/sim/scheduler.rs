use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::mapping::FlowerCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "lowercase")]
pub enum CyclePhase {
    Idle,
    Inflating { remaining: Duration },
    Deflating { remaining: Duration, guard_hold: bool },
}

impl CyclePhase {
    pub fn name(&self) -> &'static str {
        match self {
            CyclePhase::Idle => "idle",
            CyclePhase::Inflating { .. } => "inflating",
            CyclePhase::Deflating { .. } => "deflating",
        }
    }

    pub fn remaining(&self) -> Duration {
        match *self {
            CyclePhase::Idle => Duration::ZERO,
            CyclePhase::Inflating { remaining } | CyclePhase::Deflating { remaining, .. } => remaining,
        }
    }
}

/// What the scheduler asks of the actuators for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actuation {
    pub valve_open: bool,
    pub pid_active: bool,
    /// Latched setpoint while inflating.
    pub setpoint: Option<f64>,
    /// True on the first tick of an inflation phase.
    pub cycle_start: bool,
    /// Phase that applied during this tick.
    pub phase: CyclePhase,
}

/// Inflate/deflate cycle state machine. Commands latch only at cycle
/// boundaries; an in-progress phase always runs to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleScheduler {
    phase: CyclePhase,
    latched: Option<FlowerCommand>,
    pending: Option<FlowerCommand>,
    guard_enabled: bool,
    p_min: f64,
}

impl CycleScheduler {
    pub fn new(guard_enabled: bool, p_min: f64) -> Self {
        Self {
            phase: CyclePhase::Idle,
            latched: None,
            pending: None,
            guard_enabled,
            p_min,
        }
    }

    pub fn phase(&self) -> CyclePhase {
        self.phase
    }

    pub fn latched(&self) -> Option<&FlowerCommand> {
        self.latched.as_ref()
    }

    pub fn guard_enabled(&self) -> bool {
        self.guard_enabled
    }

    pub fn set_guard(&mut self, enabled: bool) {
        self.guard_enabled = enabled;
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn set_p_min(&mut self, p_min: f64) {
        self.p_min = p_min;
    }

    /// Latest command wins; it takes effect at the next cycle boundary.
    pub fn submit(&mut self, cmd: FlowerCommand) {
        self.pending = Some(cmd);
    }

    fn begin_inflation(&mut self) -> bool {
        if let Some(cmd) = self.pending.take() {
            self.latched = Some(cmd);
        }
        match self.latched {
            Some(cmd) => {
                self.phase = CyclePhase::Inflating {
                    remaining: cmd.t_inflation,
                };
                true
            }
            None => {
                self.phase = CyclePhase::Idle;
                false
            }
        }
    }

    pub fn step(&mut self, filtered_pressure: f64, dt: Duration) -> Actuation {
        let mut cycle_start = false;
        if self.phase == CyclePhase::Idle {
            cycle_start = self.begin_inflation();
        }

        let actuation = match &mut self.phase {
            CyclePhase::Idle => Actuation {
                valve_open: false,
                pid_active: false,
                setpoint: None,
                cycle_start,
                phase: CyclePhase::Idle,
            },
            CyclePhase::Inflating { .. } => Actuation {
                valve_open: false,
                pid_active: true,
                setpoint: self.latched.map(|c| c.setpoint_kpa),
                cycle_start,
                phase: self.phase,
            },
            CyclePhase::Deflating { guard_hold, .. } => {
                if self.guard_enabled && (*guard_hold || filtered_pressure <= self.p_min) {
                    *guard_hold = true;
                }
                let hold = *guard_hold;
                Actuation {
                    valve_open: !hold,
                    pid_active: false,
                    setpoint: None,
                    cycle_start,
                    phase: self.phase,
                }
            }
        };

        self.advance(dt);
        actuation
    }

    fn advance(&mut self, dt: Duration) {
        match &mut self.phase {
            CyclePhase::Idle => {}
            CyclePhase::Inflating { remaining } => {
                *remaining = remaining.saturating_sub(dt);
                if remaining.is_zero() {
                    let t_def = self.latched.map(|c| c.t_deflation).unwrap_or_default();
                    self.phase = CyclePhase::Deflating {
                        remaining: t_def,
                        guard_hold: false,
                    };
                    if t_def.is_zero() {
                        self.begin_inflation();
                    }
                }
            }
            CyclePhase::Deflating { remaining, .. } => {
                *remaining = remaining.saturating_sub(dt);
                if remaining.is_zero() {
                    self.begin_inflation();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TICK: Duration = Duration::from_millis(10);

    fn cmd(sp: f64, inf_ms: u64) -> FlowerCommand {
        FlowerCommand {
            setpoint_kpa: sp,
            t_inflation: Duration::from_millis(inf_ms),
            t_deflation: Duration::from_millis(inf_ms + 500),
        }
    }

    fn phases(s: &mut CycleScheduler, ticks: usize) -> Vec<&'static str> {
        (0..ticks).map(|_| s.step(130.0, TICK).phase.name()).collect()
    }

    fn runs(v: &[&'static str]) -> Vec<(&'static str, usize)> {
        let mut out: Vec<(&'static str, usize)> = Vec::new();
        for &p in v {
            match out.last_mut() {
                Some((q, n)) if *q == p => *n += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }

    #[test]
    fn idle_until_first_command() {
        let mut s = CycleScheduler::new(true, 120.0);
        let a = s.step(120.0, TICK);
        assert_eq!(a.phase, CyclePhase::Idle);
        assert!(!a.valve_open && !a.pid_active);
    }

    #[test]
    fn full_cycle_timing() {
        let mut s = CycleScheduler::new(false, 120.0);
        s.submit(cmd(135.0, 2800));
        let r = runs(&phases(&mut s, 280 + 330 + 280 + 330));
        assert_eq!(
            r,
            vec![("inflating", 280), ("deflating", 330), ("inflating", 280), ("deflating", 330)]
        );
    }

    #[test]
    fn new_command_waits_for_cycle_boundary() {
        let mut s = CycleScheduler::new(false, 120.0);
        s.submit(cmd(135.0, 2800));
        phases(&mut s, 100);
        s.submit(cmd(120.0, 800));
        let r = runs(&phases(&mut s, 180 + 330 + 80 + 130));
        assert_eq!(
            r,
            vec![("inflating", 180), ("deflating", 330), ("inflating", 80), ("deflating", 130)]
        );
        assert_eq!(s.latched().unwrap().setpoint_kpa, 120.0);
    }

    #[test]
    fn valve_and_pid_follow_phase() {
        let mut s = CycleScheduler::new(false, 120.0);
        s.submit(cmd(130.0, 800));
        for _ in 0..(80 + 130) * 3 {
            let a = s.step(125.0, TICK);
            match a.phase {
                CyclePhase::Inflating { .. } => assert!(!a.valve_open && a.pid_active && a.setpoint == Some(130.0)),
                CyclePhase::Deflating { .. } => assert!(a.valve_open && !a.pid_active),
                CyclePhase::Idle => panic!("went idle"),
            }
        }
    }

    #[test]
    fn guard_latches_valve_closed_for_rest_of_phase() {
        let mut s = CycleScheduler::new(true, 120.0);
        s.submit(cmd(130.0, 100));
        for _ in 0..10 {
            s.step(130.0, TICK);
        }
        assert!(s.step(125.0, TICK).valve_open);
        assert!(!s.step(120.0, TICK).valve_open);
        // pressure reading recovers but the valve stays shut until the phase ends
        assert!(!s.step(121.0, TICK).valve_open);

        let mut off = CycleScheduler::new(false, 120.0);
        off.submit(cmd(130.0, 100));
        for _ in 0..10 {
            off.step(130.0, TICK);
        }
        assert!(off.step(110.0, TICK).valve_open);
    }
}
