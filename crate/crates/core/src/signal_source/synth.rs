use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EegSample, Eyes, Scenario, SourceError, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Hz, restricted to the 8-13 Hz alpha band.
    pub alpha_freq: f64,
    /// µV amplitude with eyes closed.
    pub alpha_amp_closed: f64,
    /// µV amplitude with eyes open (alpha-blocking).
    pub alpha_amp_open: f64,
    /// RMS of the 1/f background, µV.
    pub noise_amp: f64,
    /// Time constant of the amplitude transition between eyes states, s.
    pub transition_tau: f64,
    pub rng_seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            alpha_freq: 10.0,
            alpha_amp_closed: 20.0,
            alpha_amp_open: 2.0,
            noise_amp: 4.0,
            transition_tau: 0.5,
            rng_seed: 1,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: String| Err(SourceError::Config(m));
        if !(8.0..=13.0).contains(&self.alpha_freq) {
            return bad(format!("alpha_freq {} outside [8, 13] Hz", self.alpha_freq));
        }
        for (name, v) in [
            ("alpha_amp_closed", self.alpha_amp_closed),
            ("alpha_amp_open", self.alpha_amp_open),
            ("noise_amp", self.noise_amp),
            ("transition_tau", self.transition_tau),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.alpha_amp_open >= self.alpha_amp_closed {
            return bad(format!(
                "alpha_amp_open ({}) must be below alpha_amp_closed ({})",
                self.alpha_amp_open, self.alpha_amp_closed
            ));
        }
        Ok(())
    }

    fn target_amplitude(&self, eyes: Eyes) -> f64 {
        match eyes {
            Eyes::Open => self.alpha_amp_open,
            Eyes::Closed => self.alpha_amp_closed,
        }
    }
}

const PINK_ROWS: usize = 16;

/// Voss-McCartney 1/f generator. Row `k` is redrawn every `2^k` samples; the
/// sum of all rows plus a white term has unit variance after scaling.
#[derive(Debug, Clone)]
struct PinkNoise {
    rows: [f64; PINK_ROWS],
    counter: u64,
}

impl PinkNoise {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut rows = [0.0; PINK_ROWS];
        for r in rows.iter_mut() {
            *r = rng.sample(StandardNormal);
        }
        Self { rows, counter: 0 }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        self.counter = self.counter.wrapping_add(1);
        let row = self.counter.trailing_zeros() as usize;
        if row < PINK_ROWS {
            self.rows[row] = rng.sample(StandardNormal);
        }
        let white: f64 = rng.sample(StandardNormal);
        (self.rows.iter().sum::<f64>() + white) / ((PINK_ROWS + 1) as f64).sqrt()
    }
}

/// Synthetic single-channel occipital EEG: an alpha sinusoid whose amplitude
/// follows the eyes state, on top of pink background noise.
#[derive(Debug, Clone)]
pub struct SynthGenerator {
    params: SynthParams,
    scenario: Scenario,
    eyes_override: Option<Eyes>,
    index: u64,
    amplitude: Option<f64>,
    phase: f64,
    rng: ChaCha8Rng,
    pink: PinkNoise,
}

impl SynthGenerator {
    pub fn new(params: SynthParams, scenario: Scenario) -> Result<Self, SourceError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        let phase = rng.random_range(0.0..2.0 * PI);
        let pink = PinkNoise::new(&mut rng);
        Ok(Self {
            params,
            scenario,
            eyes_override: None,
            index: 0,
            amplitude: None,
            phase,
            rng,
            pink,
        })
    }

    pub fn params(&self) -> &SynthParams {
        &self.params
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Live steering: an override replaces the scenario's eyes state until cleared.
    pub fn set_eyes_override(&mut self, eyes: Option<Eyes>) {
        self.eyes_override = eyes;
    }

    pub fn eyes_override(&self) -> Option<Eyes> {
        self.eyes_override
    }

    /// Eyes state that applies to the next sample.
    pub fn current_eyes(&self) -> Eyes {
        self.eyes_override
            .unwrap_or_else(|| self.scenario.eyes_at(self.index as f64 / SAMPLE_RATE_HZ))
    }

    /// Current alpha envelope, µV.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
            .unwrap_or_else(|| self.params.target_amplitude(self.current_eyes()))
    }

    pub fn next_sample(&mut self) -> EegSample {
        let target = self.params.target_amplitude(self.current_eyes());
        let amp = match self.amplitude {
            None => target,
            Some(prev) if self.params.transition_tau > 0.0 => {
                let decay = (-1.0 / (SAMPLE_RATE_HZ * self.params.transition_tau)).exp();
                target + (prev - target) * decay
            }
            Some(_) => target,
        };
        self.amplitude = Some(amp);

        let t = self.index as f64 / SAMPLE_RATE_HZ;
        let alpha = amp * (2.0 * PI * self.params.alpha_freq * t + self.phase).sin();
        let noise = if self.params.noise_amp > 0.0 {
            self.params.noise_amp * self.pink.next(&mut self.rng)
        } else {
            0.0
        };
        let sample = EegSample::new(self.index, alpha + noise);
        self.index += 1;
        sample
    }
}

impl Iterator for SynthGenerator {
    type Item = EegSample;

    fn next(&mut self) -> Option<EegSample> {
        Some(self.next_sample())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_source::ScenarioSegment;

    fn rms(xs: &[f64]) -> f64 {
        (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
    }

    fn quiet(open: f64) -> SynthParams {
        SynthParams {
            alpha_amp_open: open,
            noise_amp: 0.0,
            ..SynthParams::default()
        }
    }

    #[test]
    fn silent_when_open_with_no_alpha_or_noise() {
        let scen = Scenario::new(vec![ScenarioSegment::new(Eyes::Open, 10.0)]).unwrap();
        let gen = SynthGenerator::new(quiet(0.0), scen).unwrap();
        assert!(gen.take(2500).all(|s| s.v == 0.0));
    }

    #[test]
    fn closed_steady_state_is_pure_sinusoid() {
        let scen = Scenario::new(vec![ScenarioSegment::new(Eyes::Closed, 10.0)]).unwrap();
        let gen = SynthGenerator::new(quiet(2.0), scen).unwrap();
        let phase = gen.phase;
        for s in gen.take(1000) {
            let expected = 20.0 * (2.0 * PI * 10.0 * s.t + phase).sin();
            assert!((s.v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a: Vec<f64> = SynthGenerator::new(SynthParams::default(), Scenario::default())
            .unwrap()
            .take(5000)
            .map(|s| s.v)
            .collect();
        let b: Vec<f64> = SynthGenerator::new(SynthParams::default(), Scenario::default())
            .unwrap()
            .take(5000)
            .map(|s| s.v)
            .collect();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        let c: Vec<f64> = SynthGenerator::new(
            SynthParams { rng_seed: 2, ..SynthParams::default() },
            Scenario::default(),
        )
        .unwrap()
        .take(5000)
        .map(|s| s.v)
        .collect();
        assert_ne!(a, c);
    }

    #[test]
    fn closed_window_has_more_energy_than_open() {
        // open 5 s then closed 5 s; compare 2 s steady-state windows
        let scen = Scenario::new(vec![
            ScenarioSegment::new(Eyes::Open, 5.0),
            ScenarioSegment::new(Eyes::Closed, 5.0),
        ])
        .unwrap();
        let v: Vec<f64> = SynthGenerator::new(quiet(2.0), scen)
            .unwrap()
            .take(2500)
            .map(|s| s.v)
            .collect();
        assert!(rms(&v[2000..2500]) > rms(&v[500..1000]));
    }

    #[test]
    fn cadence_is_exact() {
        let samples: Vec<EegSample> = SynthGenerator::new(SynthParams::default(), Scenario::default())
            .unwrap()
            .take(17_500)
            .collect();
        for w in samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        let n = samples.len();
        assert!((samples[n - 1].t - samples[0].t - (n - 1) as f64 / 250.0).abs() < 1e-12);
    }

    #[test]
    fn exhausted_scenario_holds_last_state_and_override_wins() {
        let scen = Scenario::new(vec![ScenarioSegment::new(Eyes::Closed, 1.0)]).unwrap();
        let mut gen = SynthGenerator::new(SynthParams::default(), scen).unwrap();
        for _ in 0..1000 {
            gen.next_sample();
        }
        assert_eq!(gen.current_eyes(), Eyes::Closed);
        gen.set_eyes_override(Some(Eyes::Open));
        assert_eq!(gen.current_eyes(), Eyes::Open);
        for _ in 0..2000 {
            gen.next_sample();
        }
        assert!((gen.amplitude() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn pink_noise_rms_matches_noise_amp() {
        let scen = Scenario::new(vec![ScenarioSegment::new(Eyes::Open, 1.0)]).unwrap();
        let params = SynthParams {
            alpha_amp_open: 0.0,
            alpha_amp_closed: 1.0,
            noise_amp: 4.0,
            ..SynthParams::default()
        };
        let v: Vec<f64> = SynthGenerator::new(params, scen).unwrap().take(200_000).map(|s| s.v).collect();
        let r = rms(&v);
        assert!((r - 4.0).abs() < 0.6, "rms {r}");
    }

    #[test]
    fn validation() {
        let mut p = SynthParams::default();
        p.alpha_freq = 15.0;
        assert!(p.validate().is_err());
        let mut p = SynthParams::default();
        p.alpha_amp_open = 30.0;
        assert!(p.validate().is_err());
        let mut p = SynthParams::default();
        p.noise_amp = -1.0;
        assert!(p.validate().is_err());
    }
}
