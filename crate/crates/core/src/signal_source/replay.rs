use std::fs::File;
use std::io::{BufRead, BufReader, Lines, Write};
use std::path::Path;

use super::{EegSample, SourceError, SAMPLE_RATE_HZ};

pub const RAW_CSV_HEADER: &str = "t_s,eeg_uV";

/// Deterministic replay of a raw-EEG CSV (`t_s,eeg_uV`, 250 Hz implied).
///
/// An optional `# sample_rate_hz=<x>` comment may precede the header; any
/// rate other than 250 is rejected, as is a `t_s` column drifting more than
/// half a sample from `row / 250`.
pub struct ReplaySource {
    lines: Lines<Box<dyn BufRead + Send>>,
    line_no: usize,
    index: u64,
    done: bool,
}

impl std::fmt::Debug for ReplaySource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReplaySource")
            .field("line_no", &self.line_no)
            .field("index", &self.index)
            .finish()
    }
}

impl ReplaySource {
    pub fn open(path: &Path) -> Result<Self, SourceError> {
        let file = File::open(path)?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader<R: BufRead + Send + 'static>(reader: R) -> Result<Self, SourceError> {
        let mut lines = (Box::new(reader) as Box<dyn BufRead + Send>).lines();
        let mut line_no = 0;
        loop {
            let Some(line) = lines.next() else {
                return Err(SourceError::Config("replay file is empty (missing header)".into()));
            };
            let line = line?;
            line_no += 1;
            let trimmed = line.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once('=') {
                    if key.trim() == "sample_rate_hz" {
                        let rate: f64 = value.trim().parse().map_err(|_| SourceError::Parse {
                            line: line_no,
                            message: format!("bad sample rate {:?}", value.trim()),
                        })?;
                        if rate != SAMPLE_RATE_HZ {
                            return Err(SourceError::Config(format!(
                                "sample rate mismatch: file declares {rate} Hz, pipeline runs at {SAMPLE_RATE_HZ} Hz"
                            )));
                        }
                    }
                }
                continue;
            }
            if trimmed != RAW_CSV_HEADER {
                return Err(SourceError::Parse {
                    line: line_no,
                    message: format!("expected header `{RAW_CSV_HEADER}`, got {trimmed:?}"),
                });
            }
            break;
        }
        Ok(Self {
            lines,
            line_no,
            index: 0,
            done: false,
        })
    }

    pub fn replay_next(&mut self) -> Result<Option<EegSample>, SourceError> {
        if self.done {
            return Ok(None);
        }
        loop {
            let Some(line) = self.lines.next() else {
                self.done = true;
                return Ok(None);
            };
            let line = line?;
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let line_no = self.line_no;
            let err = |message: String| SourceError::Parse { line: line_no, message };
            let (t_str, v_str) = trimmed
                .split_once(',')
                .ok_or_else(|| err(format!("expected `t_s,eeg_uV`, got {trimmed:?}")))?;
            let t: f64 = t_str
                .trim()
                .parse()
                .map_err(|_| err(format!("bad t_s {:?}", t_str.trim())))?;
            let v: f64 = v_str
                .trim()
                .parse()
                .map_err(|_| err(format!("bad eeg_uV {:?}", v_str.trim())))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite sample {v}")));
            }
            let sample = EegSample::new(self.index, v);
            if (t - sample.t).abs() > 0.5 / SAMPLE_RATE_HZ {
                return Err(SourceError::Config(format!(
                    "sample rate mismatch at line {line_no}: t_s={t} but row {} of a {SAMPLE_RATE_HZ} Hz stream is at {}",
                    self.index, sample.t
                )));
            }
            self.index += 1;
            return Ok(Some(sample));
        }
    }

    /// Reads the remaining samples into memory.
    pub fn read_all(mut self) -> Result<Vec<EegSample>, SourceError> {
        let mut out = Vec::new();
        while let Some(s) = self.replay_next()? {
            out.push(s);
        }
        Ok(out)
    }
}

/// Writes samples in the raw-EEG CSV format.
pub fn write_raw_csv<W: Write>(mut w: W, samples: &[EegSample]) -> std::io::Result<()> {
    writeln!(w, "{RAW_CSV_HEADER}")?;
    for s in samples {
        writeln!(w, "{:.3},{}", s.t, s.v)?;
    }
    Ok(())
}
