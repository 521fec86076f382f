use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorParams {
    /// kPa, standard deviation of the raw reading.
    pub noise_sigma: f64,
    /// Moving-average length in samples.
    pub ma_window: usize,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            noise_sigma: 0.2,
            ma_window: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub raw: f64,
    pub filtered: f64,
}

/// Absolute pressure sensor sampled at 100 Hz with a moving-average filter.
#[derive(Debug, Clone)]
pub struct PressureSensor {
    params: SensorParams,
    noise: Option<Normal<f64>>,
    ring: VecDeque<f64>,
    rng: ChaCha8Rng,
    seed: u64,
}

impl PressureSensor {
    pub fn new(params: SensorParams, seed: u64) -> Result<Self, SimError> {
        if !(params.noise_sigma.is_finite() && params.noise_sigma >= 0.0) {
            return Err(SimError::Config(format!("noise_sigma must be >= 0, got {}", params.noise_sigma)));
        }
        if params.ma_window == 0 {
            return Err(SimError::Config("ma_window must be >= 1".into()));
        }
        let noise = if params.noise_sigma > 0.0 {
            Some(Normal::new(0.0, params.noise_sigma).map_err(|e| SimError::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            params,
            noise,
            ring: VecDeque::with_capacity(params.ma_window),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    /// Clears the filter window and rewinds the noise stream.
    pub fn reset(&mut self) {
        self.ring.clear();
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }

    pub fn read(&mut self, p_true: f64) -> SensorReading {
        let raw = match &self.noise {
            Some(n) => p_true + n.sample(&mut self.rng),
            None => p_true,
        };
        if self.ring.len() == self.params.ma_window {
            self.ring.pop_front();
        }
        self.ring.push_back(raw);
        let filtered = self.ring.iter().sum::<f64>() / self.ring.len() as f64;
        SensorReading { raw, filtered }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_reads_truth() {
        let mut s = PressureSensor::new(SensorParams { noise_sigma: 0.0, ..Default::default() }, 1).unwrap();
        for p in [120.0, 121.5, 130.25] {
            let r = s.read(p);
            assert_eq!(r.raw, p);
        }
        for _ in 0..10 {
            s.read(127.0);
        }
        assert_eq!(s.read(127.0).filtered, 127.0);
    }

    #[test]
    fn first_tick_is_single_sample_mean() {
        let mut s = PressureSensor::new(SensorParams::default(), 9).unwrap();
        let r = s.read(120.0);
        assert_eq!(r.filtered, r.raw);
        let r2 = s.read(120.0);
        assert!((r2.filtered - (r.raw + r2.raw) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn filtered_variance_is_sigma_squared_over_window() {
        let mut s = PressureSensor::new(SensorParams::default(), 42).unwrap();
        // non-overlapping windows give independent filtered values
        let mut vals = Vec::new();
        for i in 0..200_000 {
            let r = s.read(125.0);
            if i % 10 == 9 {
                vals.push(r.filtered);
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        let expected = 0.2f64.powi(2) / 10.0;
        assert!((var - expected).abs() / expected < 0.2, "{var} vs {expected}");
    }

    #[test]
    fn reset_replays_noise() {
        let mut s = PressureSensor::new(SensorParams::default(), 5).unwrap();
        let a: Vec<f64> = (0..20).map(|_| s.read(120.0).raw).collect();
        s.reset();
        let b: Vec<f64> = (0..20).map(|_| s.read(120.0).raw).collect();
        assert_eq!(a, b);
    }
}
