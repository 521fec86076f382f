use std::collections::VecDeque;

use crate::signal_source::EegSample;

pub const WINDOW_LEN: usize = 500;
/// Half-overlap hop.
pub const HOP_LEN: usize = 250;

/// One analysis window of consecutive samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFrame {
    /// Index of the first sample in the window.
    pub start_index: u64,
    pub samples: Vec<f64>,
}

impl SampleFrame {
    /// Index of the last sample in the window.
    pub fn end_index(&self) -> u64 {
        self.start_index + self.samples.len() as u64 - 1
    }

    pub fn t_end(&self) -> f64 {
        EegSample::new(self.end_index(), 0.0).t
    }

    pub fn t_end_ms(&self) -> u64 {
        EegSample::new(self.end_index(), 0.0).t_ms()
    }
}

/// Rolling window: first frame after `len` samples, then one per `hop`.
#[derive(Debug, Clone)]
pub struct Windower {
    len: usize,
    hop: usize,
    buf: VecDeque<EegSample>,
    until_next: usize,
}

impl Default for Windower {
    fn default() -> Self {
        Self::new(WINDOW_LEN, HOP_LEN)
    }
}

impl Windower {
    pub fn new(len: usize, hop: usize) -> Self {
        assert!(len > 0 && hop > 0 && hop <= len, "invalid window {len}/{hop}");
        Self {
            len,
            hop,
            buf: VecDeque::with_capacity(len),
            until_next: len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn reset(&mut self) {
        self.buf.clear();
        self.until_next = self.len;
    }

    pub fn push_sample(&mut self, sample: EegSample) -> Option<SampleFrame> {
        if self.buf.len() == self.len {
            self.buf.pop_front();
        }
        self.buf.push_back(sample);
        self.until_next -= 1;
        if self.until_next > 0 {
            return None;
        }
        self.until_next = self.hop;
        Some(SampleFrame {
            start_index: self.buf[0].index,
            samples: self.buf.iter().map(|s| s.v).collect(),
        })
    }
}

/// Batch windowing of a complete recording; same frames as streaming.
pub fn offline_frames(samples: &[EegSample], len: usize, hop: usize) -> Vec<SampleFrame> {
    if samples.len() < len {
        return Vec::new();
    }
    (0..=(samples.len() - len) / hop)
        .map(|k| {
            let w = &samples[k * hop..k * hop + len];
            SampleFrame {
                start_index: w[0].index,
                samples: w.iter().map(|s| s.v).collect(),
            }
        })
        .collect()
}
