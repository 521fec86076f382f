use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::run::{
    OutputFile, CHARACTER_COMMANDS_CSV, PRESSURE_TRACE_CSV, PSD_CSV, SEGMENTS_CSV,
};

pub const FIG_DUTY_CSV: &str = "fig5b_duty.csv";
pub const FIG_PRESSURE_CSV: &str = "fig6b_pressure.csv";
pub const FIG_PSD_CSV: &str = "fig_psd_snapshots.csv";
pub const FIG_MARKERS_CSV: &str = "fig_markers.csv";

/// Upper edge of the exported PSD snapshots, Hz (the filter passband).
const SNAPSHOT_MAX_HZ: f64 = 40.0;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("file not found: {} (is this a completed run directory?)", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: no character or flower outputs to export", .0.display())]
    NothingToExport(PathBuf),
    #[error("{file} line {line}: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExportError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExportError::Malformed { .. } => 3,
            ExportError::NothingToExport(_) => 2,
            _ => 4,
        }
    }
}

struct Table {
    name: String,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(dir: &Path, name: &str, header: &str) -> Result<Self, ExportError> {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(ExportError::MissingInput(path));
        }
        let text = std::fs::read_to_string(&path).map_err(|source| ExportError::Io { path, source })?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == header => {}
            other => {
                return Err(ExportError::Malformed {
                    file: name.into(),
                    line: 1,
                    message: format!("expected header {header:?}, got {:?}", other.unwrap_or("")),
                })
            }
        }
        let width = header.split(',').count();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<String> = line.split(',').map(str::to_owned).collect();
            if cols.len() != width {
                return Err(ExportError::Malformed {
                    file: name.into(),
                    line: i + 2,
                    message: format!("expected {width} columns, got {}", cols.len()),
                });
            }
            rows.push(cols);
        }
        Ok(Self { name: name.into(), rows })
    }

    fn num(&self, row: usize, col: usize) -> Result<f64, ExportError> {
        self.rows[row][col].parse().map_err(|_| ExportError::Malformed {
            file: self.name.clone(),
            line: row + 2,
            message: format!("bad number {:?}", self.rows[row][col]),
        })
    }
}

struct Segment {
    index: String,
    eyes: String,
    start: f64,
    end: f64,
}

fn segment_at(segments: &[Segment], t: f64) -> Option<&Segment> {
    segments
        .iter()
        .find(|s| t >= s.start && t < s.end)
        .or_else(|| segments.last().filter(|s| t >= s.end))
}

fn write(dir: &Path, name: &str, body: String, rows: u64) -> Result<OutputFile, ExportError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|source| ExportError::Io { path, source })?;
    Ok(OutputFile { name: name.into(), rows })
}

/// Turns a run directory into figure-ready tidy CSVs: duty and pressure
/// against time tagged with the scenario segment, eyes-state change markers,
/// and one PSD snapshot per segment.
pub fn export_figures(run_dir: &Path) -> Result<Vec<OutputFile>, ExportError> {
    let seg_table = Table::read(run_dir, SEGMENTS_CSV, "index,eyes,start_s,end_s")?;
    let mut segments = Vec::new();
    for r in 0..seg_table.rows.len() {
        segments.push(Segment {
            index: seg_table.rows[r][0].clone(),
            eyes: seg_table.rows[r][1].clone(),
            start: seg_table.num(r, 2)?,
            end: seg_table.num(r, 3)?,
        });
    }
    let seg_label = |t: f64| segment_at(&segments, t).map_or(String::new(), |s| s.index.clone());

    let has_char = run_dir.join(CHARACTER_COMMANDS_CSV).is_file();
    let has_flower = run_dir.join(PRESSURE_TRACE_CSV).is_file();
    if !has_char && !has_flower {
        return Err(ExportError::NothingToExport(run_dir.to_owned()));
    }
    let psd = Table::read(run_dir, PSD_CSV, "frame_idx,t_end_s,f_hz,psd")?;
    let mut files = Vec::new();

    let mut body = String::from("t_s,eyes,segment\n");
    for s in &segments {
        writeln!(body, "{},{},{}", s.start, s.eyes, s.index).unwrap();
    }
    files.push(write(run_dir, FIG_MARKERS_CSV, body, segments.len() as u64)?);

    if has_char {
        let cmds = Table::read(run_dir, CHARACTER_COMMANDS_CSV, "t_s,a_psd,duty")?;
        let mut body = String::from("t_s,duty,segment\n");
        for r in 0..cmds.rows.len() {
            let t = cmds.num(r, 0)?;
            writeln!(body, "{},{},{}", cmds.rows[r][0], cmds.rows[r][2], seg_label(t)).unwrap();
        }
        files.push(write(run_dir, FIG_DUTY_CSV, body, cmds.rows.len() as u64)?);
    }
    if has_flower {
        let trace = Table::read(
            run_dir,
            PRESSURE_TRACE_CSV,
            "t_s,p_true_kpa,p_meas_kpa,p_filt_kpa,valve,pump_effort,phase",
        )?;
        let mut body = String::from("t_s,p_filt_kpa,segment\n");
        for r in 0..trace.rows.len() {
            let t = trace.num(r, 0)?;
            writeln!(body, "{},{},{}", trace.rows[r][0], trace.rows[r][3], seg_label(t)).unwrap();
        }
        files.push(write(run_dir, FIG_PRESSURE_CSV, body, trace.rows.len() as u64)?);
    }

    // Snapshot = last frame ending inside each segment (the final frame when
    // the run has no scenario).
    let mut picked: Vec<(String, String, String)> = Vec::new();
    let mut last_frame: Option<(String, String)> = None;
    for r in 0..psd.rows.len() {
        let frame = psd.rows[r][0].clone();
        if last_frame.as_ref().is_some_and(|(f, _)| *f == frame) {
            continue;
        }
        last_frame = Some((frame.clone(), psd.rows[r][1].clone()));
        let t = psd.num(r, 1)?;
        match segment_at(&segments, t) {
            Some(s) => {
                if let Some(p) = picked.iter_mut().find(|p| p.1 == s.index) {
                    p.0 = frame;
                } else {
                    picked.push((frame, s.index.clone(), s.eyes.clone()));
                }
            }
            None if segments.is_empty() => {
                picked = vec![(frame, String::new(), String::new())];
            }
            None => {}
        }
    }
    let mut body = String::from("frame_idx,t_end_s,segment,eyes,f_hz,psd\n");
    let mut rows = 0;
    for r in 0..psd.rows.len() {
        let row = &psd.rows[r];
        if let Some((_, seg, eyes)) = picked.iter().find(|p| p.0 == row[0]) {
            if psd.num(r, 2)? <= SNAPSHOT_MAX_HZ {
                writeln!(body, "{},{},{seg},{eyes},{},{}", row[0], row[1], row[2], row[3]).unwrap();
                rows += 1;
            }
        }
    }
    files.push(write(run_dir, FIG_PSD_CSV, body, rows)?);
    Ok(files)
}
