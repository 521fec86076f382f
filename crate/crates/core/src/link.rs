//! Wire format of the PC → microcontroller channel: one ASCII decimal A_PSD
//! value (0-100) per line, LF terminated. Documented serial profile:
//! 115200 baud, 8N1. The simulator treats the link as instantaneous.

use thiserror::Error;

pub const BAUD_RATE: u32 = 115_200;
pub const TERMINATOR: u8 = b'\n';
pub const MAX_VALUE: u8 = 100;
const MAX_DIGITS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("value {0} outside 0..=100")]
    OutOfRange(f64),
}

/// Rounds a real A_PSD half away from zero to the integer sent on the wire.
pub fn quantize(a_psd: f64) -> Result<u8, LinkError> {
    let r = a_psd.round();
    if !(0.0..=f64::from(MAX_VALUE)).contains(&r) {
        return Err(LinkError::OutOfRange(a_psd));
    }
    Ok(r as u8)
}

pub fn encode_frame(value: u8) -> Result<Vec<u8>, LinkError> {
    if value > MAX_VALUE {
        return Err(LinkError::OutOfRange(f64::from(value)));
    }
    let mut out = value.to_string().into_bytes();
    out.push(TERMINATOR);
    Ok(out)
}

/// Streaming decoder. Partial frames are buffered across chunks; a frame
/// with a non-digit byte, more than three digits, a leading zero or a value
/// above 100 is discarded and counted, and decoding resumes after the next LF.
#[derive(Debug, Clone, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    corrupt: bool,
    errors: u64,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn error_count(&self) -> u64 {
        self.errors
    }

    /// Bytes held for an incomplete frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    pub fn decode(&mut self, chunk: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for &b in chunk {
            if b == TERMINATOR {
                match self.finish_frame() {
                    Some(v) => out.push(v),
                    None => self.errors += 1,
                }
                self.buf.clear();
                self.corrupt = false;
            } else if self.corrupt {
                continue;
            } else if b.is_ascii_digit() && self.buf.len() < MAX_DIGITS {
                self.buf.push(b);
            } else {
                self.corrupt = true;
                self.buf.clear();
            }
        }
        out
    }

    fn finish_frame(&self) -> Option<u8> {
        if self.corrupt || self.buf.is_empty() {
            return None;
        }
        if self.buf.len() > 1 && self.buf[0] == b'0' {
            return None;
        }
        let v = self.buf.iter().fold(0u32, |acc, &d| acc * 10 + u32::from(d - b'0'));
        (v <= u32::from(MAX_VALUE)).then_some(v as u8)
    }
}

/// Latest-wins decimator. The first tick fires when the first item is
/// offered; later ticks fire every `cadence`. At each tick the newest item
/// offered since the previous emission is forwarded; anything older is
/// dropped, and nothing is emitted when no new item arrived.
#[derive(Debug, Clone)]
pub struct Pacer<T> {
    cadence_ms: u64,
    next_due: Option<u64>,
    latest: Option<T>,
}

impl<T> Pacer<T> {
    pub fn new(cadence_ms: u64) -> Self {
        assert!(cadence_ms > 0, "cadence must be positive");
        Self {
            cadence_ms,
            next_due: None,
            latest: None,
        }
    }

    pub fn from_seconds(cadence_s: f64) -> Self {
        Self::new((cadence_s * 1000.0).round() as u64)
    }

    pub fn cadence_ms(&self) -> u64 {
        self.cadence_ms
    }

    pub fn offer(&mut self, item: T) {
        self.latest = Some(item);
    }

    /// Advances the pacer clock to `now_ms` and returns the item due, if any.
    pub fn poll(&mut self, now_ms: u64) -> Option<T> {
        let due = match self.next_due {
            None if self.latest.is_some() => now_ms,
            None => return None,
            Some(d) => d,
        };
        if now_ms < due {
            return None;
        }
        let mut next = due + self.cadence_ms;
        while next <= now_ms {
            next += self.cadence_ms;
        }
        self.next_due = Some(next);
        self.latest.take()
    }
}

/// Batch form of [`Pacer`] over timestamped readings.
pub fn pace_frames<T: Clone>(readings: &[(u64, T)], cadence_ms: u64) -> Vec<(u64, T)> {
    let mut pacer = Pacer::new(cadence_ms);
    let mut out = Vec::new();
    for (t, r) in readings {
        pacer.offer(r.clone());
        if let Some(item) = pacer.poll(*t) {
            out.push((*t, item));
        }
    }
    out
}
