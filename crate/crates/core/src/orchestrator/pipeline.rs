use thiserror::Error;

use super::config::{derive_seed, RunConfig, SourceConfig, SENSOR_STREAM};
use crate::dsp::{AlphaPipeline, AlphaReading, Calibration, DspError, SpectrumFrame};
use crate::link::{encode_frame, quantize, FrameDecoder, LinkError, Pacer};
use crate::mapping::{to_duty, to_flower_command, FlowerCommand, MappingError, MappingParams};
use crate::signal_source::{
    EegSample, Eyes, ReplaySource, Scenario, SourceError, SynthGenerator, SAMPLE_PERIOD_MS, SAMPLE_RATE_HZ,
};
use crate::sim::{CharacterPlant, FlowerSim, FlowerTick, PidGains, SimError, CONTROL_DT};

/// Control tick period on the integer millisecond clock.
pub const TICK_MS: u64 = 10;

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl StageError {
    pub fn stage(&self) -> &'static str {
        match self {
            StageError::Source(_) => "signal_source",
            StageError::Dsp(_) => "dsp",
            StageError::Mapping(_) => "mapping",
            StageError::Link(_) => "link",
            StageError::Sim(_) => "embodiment_sim",
        }
    }
}

/// A contract violation inside a running pipeline.
#[derive(Debug, Error)]
#[error("stage {} failed at tick {tick}: {error}", .error.stage())]
pub struct PipelineError {
    pub tick: u64,
    pub error: StageError,
}

/// One actuator command as it left the link, stamped on the run clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandEvent<C> {
    pub t_ms: u64,
    /// The integer A_PSD carried by the wire frame.
    pub a_psd: u8,
    pub command: C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterState {
    pub duty: u8,
    pub omega: f64,
    pub dance_freq_hz: f64,
    pub amplitude: f64,
}

/// Everything that happened during one control tick.
#[derive(Debug, Clone, Default)]
pub struct TickOutput {
    pub tick: u64,
    pub t_ms: u64,
    /// Plant states at the tick instant.
    pub character: Option<CharacterState>,
    pub flower: Option<FlowerTick>,
    /// Samples consumed in `[t, t + 10 ms)`.
    pub samples: Vec<EegSample>,
    pub readings: Vec<(SpectrumFrame, AlphaReading)>,
    pub character_commands: Vec<CommandEvent<u8>>,
    pub flower_commands: Vec<CommandEvent<FlowerCommand>>,
}

#[derive(Debug)]
enum Feed {
    Synth(SynthGenerator),
    Replay { samples: Vec<EegSample>, pos: usize },
}

impl Feed {
    fn next(&mut self) -> Option<EegSample> {
        match self {
            Feed::Synth(g) => Some(g.next_sample()),
            Feed::Replay { samples, pos } => {
                let s = samples.get(*pos).copied();
                *pos += 1;
                s
            }
        }
    }
}

/// Pacer and wire for one embodiment.
#[derive(Debug, Clone)]
struct Channel {
    pacer: Pacer<AlphaReading>,
    decoder: FrameDecoder,
}

impl Channel {
    fn new(cadence_s: f64) -> Self {
        Self {
            pacer: Pacer::from_seconds(cadence_s),
            decoder: FrameDecoder::new(),
        }
    }

    /// Sends the due reading (or the override) through the codec.
    fn poll(&mut self, now_ms: u64, override_alpha: Option<u8>) -> Result<Vec<u8>, StageError> {
        let Some(reading) = self.pacer.poll(now_ms) else {
            return Ok(Vec::new());
        };
        let value = match override_alpha {
            Some(v) => v,
            None => quantize(reading.a_psd)?,
        };
        Ok(self.decoder.decode(&encode_frame(value)?))
    }
}

/// Loads the whole replay file. Replays are short recordings.
pub fn load_replay(path: &std::path::Path) -> Result<Vec<EegSample>, SourceError> {
    ReplaySource::open(path)?.read_all()
}

/// The deterministic run engine: source, dsp, pacing, link, mapping and both
/// plants on a single 100 Hz clock.
///
/// At tick `k` (time `10k` ms) the plants are logged and advanced with the
/// commands received before `10k`; then the EEG samples falling in
/// `[10k, 10k + 10)` are processed. Commands they produce act from tick `k + 1`.
#[derive(Debug)]
pub struct Pipeline {
    feed: Feed,
    scenario: Option<Scenario>,
    total_samples: Option<u64>,
    samples_consumed: u64,
    dsp: AlphaPipeline,
    mapping: MappingParams,
    character: Option<(Channel, CharacterPlant)>,
    flower: Option<(Channel, FlowerSim)>,
    duty: u8,
    tick: u64,
    override_alpha: Option<u8>,
    latest: Option<(SpectrumFrame, AlphaReading)>,
    alpha_events: u64,
    pending: Option<EegSample>,
}

impl Pipeline {
    /// Finite run over the configured scenario or replay file.
    pub fn new(config: &RunConfig, calibration: Calibration) -> Result<Self, PipelineError> {
        Self::build(config, calibration, true)
    }

    /// Live run: a synthetic source keeps producing after its scenario ends.
    pub fn unbounded(config: &RunConfig, calibration: Calibration) -> Result<Self, PipelineError> {
        Self::build(config, calibration, false)
    }

    fn build(config: &RunConfig, calibration: Calibration, finite: bool) -> Result<Self, PipelineError> {
        let err = |error: StageError| PipelineError { tick: 0, error };
        let (feed, scenario, total) = match &config.source {
            SourceConfig::Synth { params, scenario } => {
                let mut params = params.clone();
                params.rng_seed = config.seed;
                let gen = SynthGenerator::new(params, scenario.clone()).map_err(|e| err(e.into()))?;
                let total = (scenario.total_duration() * SAMPLE_RATE_HZ).round() as u64;
                (Feed::Synth(gen), Some(scenario.clone()), finite.then_some(total))
            }
            SourceConfig::Replay { path } => {
                let samples = load_replay(path).map_err(|e| err(e.into()))?;
                let n = samples.len() as u64;
                (Feed::Replay { samples, pos: 0 }, None, Some(n))
            }
        };
        let dsp = AlphaPipeline::new(&config.dsp, calibration).map_err(|e| err(e.into()))?;
        config.mapping.validate().map_err(|e| err(e.into()))?;
        let character = if config.embodiment.has_character() {
            let plant = CharacterPlant::new(config.character).map_err(|e| err(e.into()))?;
            Some((Channel::new(config.cadence_character_s()), plant))
        } else {
            None
        };
        let flower = if config.embodiment.has_flower() {
            let sim = FlowerSim::new(
                &config.flower,
                config.guard_enabled,
                config.mapping.p_min,
                derive_seed(config.seed, SENSOR_STREAM),
            )
            .map_err(|e| err(e.into()))?;
            Some((Channel::new(config.cadence_flower_s()), sim))
        } else {
            None
        };
        Ok(Self {
            feed,
            scenario,
            total_samples: total,
            samples_consumed: 0,
            dsp,
            mapping: config.mapping,
            character,
            flower,
            duty: 0,
            tick: 0,
            override_alpha: None,
            latest: None,
            alpha_events: 0,
            pending: None,
        })
    }

    /// Number of ticks in a finite run: enough to cover every sample.
    pub fn total_ticks(&self) -> Option<u64> {
        self.total_samples
            .map(|n| (n * SAMPLE_PERIOD_MS).div_ceil(TICK_MS))
    }

    pub fn is_finished(&self) -> bool {
        self.total_ticks().is_some_and(|n| self.tick >= n)
    }

    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    /// Time of the next tick, ms.
    pub fn t_ms(&self) -> u64 {
        self.tick * TICK_MS
    }

    pub fn scenario(&self) -> Option<&Scenario> {
        self.scenario.as_ref()
    }

    pub fn samples_consumed(&self) -> u64 {
        self.samples_consumed
    }

    pub fn frames_emitted(&self) -> u64 {
        self.dsp.frames_emitted()
    }

    /// Frames that passed the alpha gate.
    pub fn alpha_events(&self) -> u64 {
        self.alpha_events
    }

    pub fn latest(&self) -> Option<&(SpectrumFrame, AlphaReading)> {
        self.latest.as_ref()
    }

    pub fn calibration(&self) -> &Calibration {
        self.dsp.calibration()
    }

    pub fn mapping(&self) -> &MappingParams {
        &self.mapping
    }

    pub fn character(&self) -> Option<&CharacterPlant> {
        self.character.as_ref().map(|(_, p)| p)
    }

    pub fn flower(&self) -> Option<&FlowerSim> {
        self.flower.as_ref().map(|(_, s)| s)
    }

    /// Sum of decoder errors over both links.
    pub fn link_errors(&self) -> u64 {
        let c = self.character.as_ref().map_or(0, |(ch, _)| ch.decoder.error_count());
        let f = self.flower.as_ref().map_or(0, |(ch, _)| ch.decoder.error_count());
        c + f
    }

    /// Eyes state driving a synthetic source; `None` for replays.
    pub fn eyes(&self) -> Option<Eyes> {
        match &self.feed {
            Feed::Synth(g) => Some(g.current_eyes()),
            Feed::Replay { .. } => None,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.feed, Feed::Synth(_))
    }

    /// Forces the synthetic eyes state. Returns false for a replay source.
    pub fn set_eyes(&mut self, eyes: Option<Eyes>) -> bool {
        match &mut self.feed {
            Feed::Synth(g) => {
                g.set_eyes_override(eyes);
                true
            }
            Feed::Replay { .. } => false,
        }
    }

    pub fn override_alpha(&self) -> Option<u8> {
        self.override_alpha
    }

    pub fn set_override_alpha(&mut self, value: Option<u8>) {
        self.override_alpha = value;
    }

    pub fn set_mapping(&mut self, params: MappingParams) -> Result<(), MappingError> {
        params.validate()?;
        self.mapping = params;
        if let Some((_, sim)) = &mut self.flower {
            sim.scheduler_mut().set_p_min(params.p_min);
        }
        Ok(())
    }

    pub fn set_calibration(&mut self, cal: Calibration) -> Result<(), DspError> {
        self.dsp.set_calibration(cal)
    }

    pub fn guard_enabled(&self) -> Option<bool> {
        self.flower().map(|s| s.scheduler().guard_enabled())
    }

    pub fn set_guard(&mut self, enabled: bool) {
        if let Some((_, sim)) = &mut self.flower {
            sim.scheduler_mut().set_guard(enabled);
        }
    }

    pub fn set_pid_gains(&mut self, gains: PidGains) -> Result<(), SimError> {
        gains.validate()?;
        if let Some((_, sim)) = &mut self.flower {
            sim.pid_mut().gains = gains;
        }
        Ok(())
    }

    fn next_sample_before(&mut self, end_ms: u64) -> Option<EegSample> {
        if let Some(total) = self.total_samples {
            if self.samples_consumed >= total {
                return None;
            }
        }
        let s = match self.pending.take() {
            Some(s) => s,
            None => self.feed.next()?,
        };
        if s.t_ms() >= end_ms {
            self.pending = Some(s);
            return None;
        }
        self.samples_consumed += 1;
        Some(s)
    }

    /// Advances the run by one 10 ms control tick.
    pub fn step(&mut self) -> Result<TickOutput, PipelineError> {
        let tick = self.tick;
        let err = |error: StageError| PipelineError { tick, error };
        let t_ms = self.t_ms();
        let dt = CONTROL_DT.as_secs_f64();
        let mut out = TickOutput {
            tick,
            t_ms,
            ..TickOutput::default()
        };

        if let Some((_, plant)) = &mut self.character {
            out.character = Some(CharacterState {
                duty: self.duty,
                omega: plant.omega,
                dance_freq_hz: plant.dance_frequency(),
                amplitude: plant.amplitude,
            });
            plant.step(self.duty, dt).map_err(|e| err(e.into()))?;
        }
        if let Some((_, sim)) = &mut self.flower {
            out.flower = Some(sim.tick().map_err(|e| err(e.into()))?);
        }

        while let Some(sample) = self.next_sample_before(t_ms + TICK_MS) {
            out.samples.push(sample);
            let now = sample.t_ms();
            if let Some((spectrum, reading)) = self.dsp.push(sample).map_err(|e| err(e.into()))? {
                if reading.gated {
                    self.alpha_events += 1;
                }
                if let Some((ch, _)) = &mut self.character {
                    ch.pacer.offer(reading);
                }
                if let Some((ch, _)) = &mut self.flower {
                    ch.pacer.offer(reading);
                }
                self.latest = Some((spectrum.clone(), reading));
                out.readings.push((spectrum, reading));
            }
            if let Some((ch, _)) = &mut self.character {
                for a in ch.poll(now, self.override_alpha).map_err(err)? {
                    let cmd = to_duty(f64::from(a), &self.mapping).map_err(|e| err(e.into()))?;
                    self.duty = cmd.duty;
                    out.character_commands.push(CommandEvent {
                        t_ms: now,
                        a_psd: a,
                        command: cmd.duty,
                    });
                }
            }
            if let Some((ch, sim)) = &mut self.flower {
                for a in ch.poll(now, self.override_alpha).map_err(err)? {
                    let cmd = to_flower_command(f64::from(a), &self.mapping).map_err(|e| err(e.into()))?;
                    sim.submit(cmd);
                    out.flower_commands.push(CommandEvent {
                        t_ms: now,
                        a_psd: a,
                        command: cmd,
                    });
                }
            }
        }

        self.tick += 1;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::config::Embodiment;

    fn cal() -> Calibration {
        Calibration::new(50.0, 12.5).unwrap()
    }

    #[test]
    fn default_run_has_seven_thousand_ticks() {
        let p = Pipeline::new(&RunConfig::default(), cal()).unwrap();
        assert_eq!(p.total_ticks(), Some(7000));
    }

    #[test]
    fn every_sample_consumed_once_in_order() {
        let mut cfg = RunConfig::default();
        cfg.embodiment = Embodiment::Character;
        cfg.set_scenario(Scenario::parse("closed,3\n").unwrap());
        let mut p = Pipeline::new(&cfg, cal()).unwrap();
        let mut next = 0;
        while !p.is_finished() {
            let out = p.step().unwrap();
            for s in &out.samples {
                assert_eq!(s.index, next);
                assert!(s.t_ms() >= out.t_ms && s.t_ms() < out.t_ms + TICK_MS);
                next += 1;
            }
        }
        assert_eq!(next, 750);
        assert_eq!(p.tick_index(), 300);
        assert_eq!(p.frames_emitted(), 2);
    }

    #[test]
    fn commands_act_from_the_next_tick() {
        let mut cfg = RunConfig::default();
        cfg.embodiment = Embodiment::Character;
        cfg.set_scenario(Scenario::parse("closed,4\n").unwrap());
        let mut p = Pipeline::new(&cfg, cal()).unwrap();
        let mut issued: Option<(u64, u8)> = None;
        while !p.is_finished() {
            let out = p.step().unwrap();
            let logged = out.character.unwrap().duty;
            match issued {
                Some((tick, duty)) if out.tick == tick + 1 => assert_eq!(logged, duty),
                None => assert_eq!(logged, 0),
                _ => {}
            }
            if let Some(c) = out.character_commands.last() {
                issued = Some((out.tick, c.command));
            }
        }
        assert!(issued.is_some());
    }

    #[test]
    fn override_replaces_every_command() {
        let mut cfg = RunConfig::default();
        cfg.set_scenario(Scenario::parse("open,8\n").unwrap());
        let mut p = Pipeline::new(&cfg, cal()).unwrap();
        p.set_override_alpha(Some(57));
        let mut seen = 0;
        while !p.is_finished() {
            let out = p.step().unwrap();
            for c in &out.character_commands {
                assert_eq!(c.a_psd, 57);
                assert_eq!(c.command, 145);
                seen += 1;
            }
            for c in &out.flower_commands {
                assert_eq!(c.a_psd, 57);
                assert_eq!(c.command, to_flower_command(57.0, &MappingParams::default()).unwrap());
            }
        }
        assert_eq!(seen, 7);
    }

    #[test]
    fn replay_without_file_fails_at_source_stage() {
        let cfg = RunConfig {
            source: SourceConfig::Replay {
                path: "/nonexistent.csv".into(),
            },
            ..RunConfig::default()
        };
        let e = Pipeline::new(&cfg, cal()).unwrap_err();
        assert_eq!(e.error.stage(), "signal_source");
        assert!(e.to_string().contains("tick 0"));
    }
}
