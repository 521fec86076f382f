use serde::{Deserialize, Serialize};

use super::snapshot::{ActiveParams, StateSnapshot};
use crate::dsp::Calibration;
use crate::link::quantize;
use crate::mapping::PARAM_NAMES;
use crate::orchestrator::RunConfig;
use crate::signal_source::Eyes;

/// Operator input, as sent by the dashboard. JSON objects tagged by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorCommand {
    SetEyes { eyes: Eyes },
    OverrideAlpha { a_psd: f64 },
    ClearOverride,
    SetParam { name: String, value: f64 },
    SetGuard { enabled: bool },
    /// Starts (or restarts) a run; without a config the session's current one is used.
    Start {
        #[serde(default)]
        config: Option<Box<RunConfig>>,
    },
    Stop,
    Reset,
}

impl OperatorCommand {
    pub fn kind(&self) -> &'static str {
        match self {
            OperatorCommand::SetEyes { .. } => "set_eyes",
            OperatorCommand::OverrideAlpha { .. } => "override_alpha",
            OperatorCommand::ClearOverride => "clear_override",
            OperatorCommand::SetParam { .. } => "set_param",
            OperatorCommand::SetGuard { .. } => "set_guard",
            OperatorCommand::Start { .. } => "start",
            OperatorCommand::Stop => "stop",
            OperatorCommand::Reset => "reset",
        }
    }
}

/// Messages from the service to a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(StateSnapshot),
    Ack { command: String },
    Rejection { command: String, reason: String },
}

pub const NO_ACTIVE_RUN: &str = "no active run";

/// Parameters accepted by `SetParam`, beyond the mapping ones.
pub const LIVE_PARAM_NAMES: &[&str] = &["threshold", "p_ref", "kp", "ki", "kd", "windup_limit"];

/// What a command is checked against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandContext {
    pub running: bool,
    pub synthetic: bool,
    pub params: ActiveParams,
}

impl CommandContext {
    pub fn from_snapshot(s: &StateSnapshot) -> Self {
        Self {
            running: s.running,
            synthetic: s.eyes_state.is_some(),
            params: s.params,
        }
    }
}

/// Returns the parameter set after `name = value`, or the violated invariant.
pub fn apply_param(params: &ActiveParams, name: &str, value: f64) -> Result<ActiveParams, String> {
    let mut p = *params;
    if PARAM_NAMES.contains(&name) {
        p.mapping = params.mapping.with_param(name, value).map_err(|e| e.to_string())?;
        return Ok(p);
    }
    match name {
        "threshold" | "p_ref" => {
            let cal = params
                .calibration()
                .ok_or_else(|| "calibration not established yet".to_string())?;
            let (p_ref, threshold) = if name == "p_ref" {
                (value, cal.threshold)
            } else {
                (cal.p_ref, value)
            };
            let cal = Calibration::new(p_ref, threshold).map_err(|e| e.to_string())?;
            p.p_ref = Some(cal.p_ref);
            p.threshold = Some(cal.threshold);
        }
        "kp" | "ki" | "kd" | "windup_limit" => {
            match name {
                "kp" => p.kp = value,
                "ki" => p.ki = value,
                "kd" => p.kd = value,
                _ => p.windup_limit = value,
            }
            p.pid().validate().map_err(|e| e.to_string())?;
        }
        other => {
            let known: Vec<&str> = PARAM_NAMES.iter().chain(LIVE_PARAM_NAMES).copied().collect();
            return Err(format!("unknown parameter {other:?} (expected one of {})", known.join(", ")));
        }
    }
    Ok(p)
}

/// Checks a command against the current state without applying it.
pub fn validate_command(cmd: &OperatorCommand, ctx: &CommandContext) -> Result<(), String> {
    let needs_run = !matches!(cmd, OperatorCommand::Start { .. });
    if needs_run && !ctx.running {
        return Err(NO_ACTIVE_RUN.into());
    }
    match cmd {
        OperatorCommand::SetEyes { .. } if !ctx.synthetic => Err("eyes state can only be set on a synthetic source".into()),
        OperatorCommand::OverrideAlpha { a_psd } => {
            if !(0.0..=100.0).contains(a_psd) {
                return Err(format!("a_psd must be within 0..=100, got {a_psd}"));
            }
            quantize(*a_psd).map(|_| ()).map_err(|e| e.to_string())
        }
        OperatorCommand::SetParam { name, value } => {
            if !value.is_finite() {
                return Err(format!("{name} must be finite, got {value}"));
            }
            apply_param(&ctx.params, name, *value).map(|_| ())
        }
        OperatorCommand::Start { config: Some(cfg) } => cfg.validate().map_err(|e| e.to_string()),
        _ => Ok(()),
    }
}
