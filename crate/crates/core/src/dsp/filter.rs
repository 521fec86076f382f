//! Causal Butterworth bandpass realised as cascaded second-order sections.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::DspError;
use crate::signal_source::{EegSample, SAMPLE_RATE_HZ};

/// Default total bandpass order (10-pole lowpass prototype, 10 biquads).
pub const DEFAULT_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    /// Transposed direct form II.
    #[inline]
    fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z_inv2 = z_inv * z_inv;
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z_inv2;
        let den = 1.0 + self.a[0] * z_inv + self.a[1] * z_inv2;
        num / den
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandpassFilter {
    low_cut: f64,
    high_cut: f64,
    order: usize,
    fs: f64,
    sections: Vec<Biquad>,
}

impl Default for BandpassFilter {
    fn default() -> Self {
        Self::new(1.0, 40.0, DEFAULT_ORDER, SAMPLE_RATE_HZ).expect("default band is valid")
    }
}

impl BandpassFilter {
    /// Designs a Butterworth bandpass of total order `order` (even) by the
    /// lowpass-to-bandpass transform of an `order/2`-pole prototype followed
    /// by the bilinear transform with prewarped band edges.
    pub fn new(low_cut: f64, high_cut: f64, order: usize, fs: f64) -> Result<Self, DspError> {
        let nyquist = fs / 2.0;
        if !(fs.is_finite() && fs > 0.0) {
            return Err(DspError::Design(format!("invalid sample rate {fs}")));
        }
        if !(low_cut > 0.0 && low_cut < high_cut && high_cut < nyquist) {
            return Err(DspError::Design(format!(
                "need 0 < low_cut < high_cut < {nyquist}, got [{low_cut}, {high_cut}]"
            )));
        }
        if order == 0 || !order.is_multiple_of(2) {
            return Err(DspError::Design(format!("order must be a positive even integer, got {order}")));
        }

        let k = 2.0 * fs;
        let w1 = k * (PI * low_cut / fs).tan();
        let w2 = k * (PI * high_cut / fs).tan();
        let bw = w2 - w1;
        let w0_sq = w1 * w2;
        let n = order / 2;

        // Analog bandpass poles in the upper half plane (plus real ones).
        let mut upper = Vec::new();
        let mut real = Vec::new();
        for i in 0..n {
            let theta = PI * (2 * i + n + 1) as f64 / (2 * n) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                let z = (k + s) / (k - s);
                if z.im.abs() < 1e-12 {
                    real.push(z.re);
                } else if z.im > 0.0 {
                    upper.push(z);
                }
            }
        }
        real.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut pairs: Vec<(Complex64, Complex64)> = upper.iter().map(|&z| (z, z.conj())).collect();
        for chunk in real.chunks(2) {
            let (a, b) = (chunk[0], *chunk.get(1).unwrap_or(&0.0));
            pairs.push((Complex64::new(a, 0.0), Complex64::new(b, 0.0)));
        }
        if pairs.len() != n {
            return Err(DspError::Design(format!(
                "pole pairing produced {} sections, expected {n}",
                pairs.len()
            )));
        }

        // Unit gain per section at the digital band centre.
        let centre = 2.0 * (w0_sq.sqrt() / k).atan();
        let z_inv = Complex64::from_polar(1.0, -centre);
        let sections = pairs
            .into_iter()
            .map(|(p1, p2)| {
                let mut bq = Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [-(p1 + p2).re, (p1 * p2).re],
                    z: [0.0; 2],
                };
                let g = 1.0 / bq.response(z_inv).norm();
                bq.b = [g, 0.0, -g];
                bq
            })
            .collect();

        Ok(Self {
            low_cut,
            high_cut,
            order,
            fs,
            sections,
        })
    }

    pub fn low_cut(&self) -> f64 {
        self.low_cut
    }

    pub fn high_cut(&self) -> f64 {
        self.high_cut
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sample_rate(&self) -> f64 {
        self.fs
    }

    pub fn num_sections(&self) -> usize {
        self.sections.len()
    }

    /// Clears the delay registers.
    pub fn reset(&mut self) {
        for s in &mut self.sections {
            s.z = [0.0; 2];
        }
    }

    pub fn process(&mut self, x: f64) -> Result<f64, DspError> {
        if !x.is_finite() {
            return Err(DspError::SignalIntegrity(x));
        }
        Ok(self.sections.iter_mut().fold(x, |acc, s| s.process(acc)))
    }

    pub fn filter_step(&mut self, sample: EegSample) -> Result<EegSample, DspError> {
        Ok(EegSample {
            v: self.process(sample.v)?,
            ..sample
        })
    }

    /// Complex frequency response of the designed cascade at `f_hz`.
    pub fn response(&self, f_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f_hz / self.fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, f_hz: f64) -> f64 {
        self.response(f_hz).norm()
    }
}
