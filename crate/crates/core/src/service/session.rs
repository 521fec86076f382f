use std::collections::VecDeque;

use super::command::{apply_param, validate_command, CommandContext, OperatorCommand};
use super::snapshot::{ActiveParams, StateSnapshot};
use crate::link::quantize;
use crate::orchestrator::{resolve_calibration, Pipeline, RunConfig, RunError, TickOutput, TICK_MS};

/// Server ticks between two snapshots: 100 Hz / 5 = 20 Hz.
pub const SNAPSHOT_EVERY_TICKS: u64 = 5;

/// Result of one server tick.
#[derive(Debug, Default)]
pub struct LiveTick {
    pub output: Option<TickOutput>,
    pub snapshot: Option<StateSnapshot>,
    /// Commands that validated but failed when applied (e.g. a Start whose
    /// calibration failed).
    pub errors: Vec<String>,
}

/// A steerable run. Commands are validated on submission and applied, in
/// order, at the next tick boundary; the pipeline never sees a half-applied
/// change.
#[derive(Debug)]
pub struct LiveSession {
    config: RunConfig,
    params: ActiveParams,
    pipeline: Option<Pipeline>,
    queue: VecDeque<OperatorCommand>,
    server_ticks: u64,
}

impl LiveSession {
    /// A stopped session; a `Start` command begins the first run.
    pub fn idle(config: RunConfig) -> Self {
        let params = ActiveParams::from_config(&config, None);
        Self {
            config,
            params,
            pipeline: None,
            queue: VecDeque::new(),
            server_ticks: 0,
        }
    }

    /// A session with a run already started.
    pub fn start(config: RunConfig) -> Result<Self, RunError> {
        let mut s = Self::idle(config);
        s.launch()?;
        Ok(s)
    }

    fn launch(&mut self) -> Result<(), RunError> {
        self.config.validate()?;
        let cal = match self.params.calibration() {
            Some(cal) if self.config.calibration.is_some() => cal,
            _ => resolve_calibration(&self.config)?,
        };
        let mut cfg = self.config.clone();
        cfg.calibration = Some(cal);
        let pipeline = Pipeline::unbounded(&cfg, cal)?;
        self.config = cfg;
        self.params = ActiveParams::from_config(&self.config, Some(cal));
        self.pipeline = Some(pipeline);
        Ok(())
    }

    pub fn is_running(&self) -> bool {
        self.pipeline.is_some()
    }

    /// The configuration a `Reset` would restart with, including live edits.
    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn params(&self) -> &ActiveParams {
        &self.params
    }

    pub fn pipeline(&self) -> Option<&Pipeline> {
        self.pipeline.as_ref()
    }

    /// Server clock, s. Advances on every tick, running or not.
    pub fn t_s(&self) -> f64 {
        (self.server_ticks * TICK_MS) as f64 / 1000.0
    }

    fn context(&self) -> CommandContext {
        CommandContext {
            running: self.is_running(),
            synthetic: self.pipeline.as_ref().is_some_and(Pipeline::is_synthetic),
            params: self.pending_params(),
        }
    }

    /// Params as they will be once the queue is drained.
    fn pending_params(&self) -> ActiveParams {
        let mut p = self.params;
        for cmd in &self.queue {
            match cmd {
                OperatorCommand::SetParam { name, value } => {
                    if let Ok(next) = apply_param(&p, name, *value) {
                        p = next;
                    }
                }
                OperatorCommand::SetGuard { enabled } => p.guard = *enabled,
                _ => {}
            }
        }
        p
    }

    /// Validates and queues a command. Rejections name the violated invariant.
    pub fn submit(&mut self, cmd: OperatorCommand) -> Result<(), String> {
        validate_command(&cmd, &self.context())?;
        self.queue.push_back(cmd);
        Ok(())
    }

    fn apply(&mut self, cmd: OperatorCommand) -> Result<(), String> {
        // a Stop earlier in the same drain may have ended the run
        validate_command(&cmd, &self.context())?;
        match cmd {
            OperatorCommand::Start { config } => {
                let prev = self.config.clone();
                if let Some(cfg) = config {
                    self.config = *cfg;
                    self.params = ActiveParams::from_config(&self.config, None);
                }
                if let Err(e) = self.launch() {
                    self.config = prev;
                    self.pipeline = None;
                    return Err(e.to_string());
                }
            }
            OperatorCommand::Reset => self.launch().map_err(|e| e.to_string())?,
            OperatorCommand::Stop => self.pipeline = None,
            OperatorCommand::SetEyes { eyes } => {
                if let Some(p) = &mut self.pipeline {
                    p.set_eyes(Some(eyes));
                }
            }
            OperatorCommand::OverrideAlpha { a_psd } => {
                let v = quantize(a_psd).map_err(|e| e.to_string())?;
                if let Some(p) = &mut self.pipeline {
                    p.set_override_alpha(Some(v));
                }
            }
            OperatorCommand::ClearOverride => {
                if let Some(p) = &mut self.pipeline {
                    p.set_override_alpha(None);
                }
            }
            OperatorCommand::SetParam { name, value } => {
                let next = apply_param(&self.params, &name, value)?;
                self.set_params(next)?;
            }
            OperatorCommand::SetGuard { enabled } => {
                let next = ActiveParams {
                    guard: enabled,
                    ..self.params
                };
                self.set_params(next)?;
            }
        }
        Ok(())
    }

    fn set_params(&mut self, next: ActiveParams) -> Result<(), String> {
        if let Some(p) = &mut self.pipeline {
            p.set_mapping(next.mapping).map_err(|e| e.to_string())?;
            if let Some(cal) = next.calibration() {
                p.set_calibration(cal).map_err(|e| e.to_string())?;
            }
            p.set_pid_gains(next.pid()).map_err(|e| e.to_string())?;
            p.set_guard(next.guard);
        }
        self.config.mapping = next.mapping;
        self.config.guard_enabled = next.guard;
        self.config.flower.pid = next.pid();
        if let Some(cal) = next.calibration() {
            self.config.calibration = Some(cal);
        }
        self.params = next;
        Ok(())
    }

    pub fn snapshot(&self) -> StateSnapshot {
        match &self.pipeline {
            Some(p) => StateSnapshot::capture(p, self.params, self.t_s()),
            None => StateSnapshot::idle(self.params, self.t_s()),
        }
    }

    /// One 10 ms server tick: drain commands, step the run, and every fifth
    /// tick publish a snapshot.
    pub fn tick(&mut self) -> Result<LiveTick, RunError> {
        let mut out = LiveTick::default();
        while let Some(cmd) = self.queue.pop_front() {
            let kind = cmd.kind();
            if let Err(e) = self.apply(cmd) {
                log::warn!("{kind} failed: {e}");
                out.errors.push(format!("{kind}: {e}"));
            }
        }
        if let Some(p) = &mut self.pipeline {
            if p.is_finished() {
                self.pipeline = None;
            } else {
                out.output = Some(p.step()?);
            }
        }
        self.server_ticks += 1;
        if self.server_ticks.is_multiple_of(SNAPSHOT_EVERY_TICKS) {
            out.snapshot = Some(self.snapshot());
        }
        Ok(out)
    }
}
