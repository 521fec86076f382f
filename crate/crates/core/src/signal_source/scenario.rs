use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SourceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eyes {
    Open,
    Closed,
}

impl fmt::Display for Eyes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Eyes::Open => "open",
            Eyes::Closed => "closed",
        })
    }
}

impl FromStr for Eyes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "open" => Ok(Eyes::Open),
            "closed" => Ok(Eyes::Closed),
            other => Err(format!("unknown eyes state {other:?} (expected open|closed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSegment {
    pub eyes: Eyes,
    pub duration_s: f64,
}

impl ScenarioSegment {
    pub fn new(eyes: Eyes, duration_s: f64) -> Self {
        Self { eyes, duration_s }
    }
}

/// Non-empty ordered list of eyes-state segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ScenarioSegment>", into = "Vec<ScenarioSegment>")]
pub struct Scenario {
    segments: Vec<ScenarioSegment>,
}

/// The built-in 70 s protocol: open, closed, open, closed, open.
pub fn default_scenario() -> Vec<ScenarioSegment> {
    use Eyes::*;
    vec![
        ScenarioSegment::new(Open, 10.0),
        ScenarioSegment::new(Closed, 20.0),
        ScenarioSegment::new(Open, 10.0),
        ScenarioSegment::new(Closed, 20.0),
        ScenarioSegment::new(Open, 10.0),
    ]
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            segments: default_scenario(),
        }
    }
}

impl TryFrom<Vec<ScenarioSegment>> for Scenario {
    type Error = SourceError;

    fn try_from(segments: Vec<ScenarioSegment>) -> Result<Self, Self::Error> {
        Scenario::new(segments)
    }
}

impl From<Scenario> for Vec<ScenarioSegment> {
    fn from(s: Scenario) -> Self {
        s.segments
    }
}

impl Scenario {
    pub fn new(segments: Vec<ScenarioSegment>) -> Result<Self, SourceError> {
        if segments.is_empty() {
            return Err(SourceError::Config("scenario has no segments".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.duration_s.is_finite() && seg.duration_s > 0.0) {
                return Err(SourceError::Config(format!(
                    "segment {i}: duration must be > 0, got {}",
                    seg.duration_s
                )));
            }
        }
        Ok(Self { segments })
    }

    /// Parses one `open|closed,<duration_s>` segment per line. Blank lines
    /// and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, SourceError> {
        let mut segments = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| SourceError::Parse {
                line: i + 1,
                message,
            };
            let (eyes, dur) = line
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected `open|closed,<seconds>`, got {line:?}")))?;
            let eyes = eyes.parse::<Eyes>().map_err(parse_err)?;
            let duration_s = dur
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad duration {dur:?}: {e}")))?;
            if !(duration_s.is_finite() && duration_s > 0.0) {
                return Err(parse_err(format!("duration must be > 0, got {duration_s}")));
            }
            segments.push(ScenarioSegment { eyes, duration_s });
        }
        Self::new(segments)
    }

    pub fn load(path: &Path) -> Result<Self, SourceError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.segments
            .iter()
            .map(|s| format!("{},{}\n", s.eyes, s.duration_s))
            .collect()
    }

    pub fn segments(&self) -> &[ScenarioSegment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// `(start_s, end_s)` of every segment.
    pub fn boundaries(&self) -> Vec<(f64, f64)> {
        let mut start = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let b = (start, start + s.duration_s);
                start += s.duration_s;
                b
            })
            .collect()
    }

    /// Index of the segment covering `t`. Past the end the last segment holds.
    pub fn segment_index_at(&self, t: f64) -> usize {
        let mut end = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            end += seg.duration_s;
            if t < end {
                return i;
            }
        }
        self.segments.len() - 1
    }

    pub fn eyes_at(&self, t: f64) -> Eyes {
        self.segments[self.segment_index_at(t)].eyes
    }
}
