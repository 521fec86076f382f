//! Run configuration, the tick-driven pipeline engine, batch runs with CSV
//! telemetry, calibration and figure-data export.

mod config;
mod export;
mod pipeline;
mod run;

pub use config::{
    derive_seed, ConfigError, Embodiment, RunConfig, SourceConfig, CHARACTER_CADENCE_S, CONFIG_KEYS, FLOWER_CADENCE_S,
};
pub use export::{export_figures, ExportError, FIG_DUTY_CSV, FIG_MARKERS_CSV, FIG_PRESSURE_CSV, FIG_PSD_CSV};
pub use pipeline::{
    load_replay, CharacterState, CommandEvent, Pipeline, PipelineError, StageError, TickOutput, TICK_MS,
};
pub use run::{
    calibrate_cmd, calibrate_to_file, calibration_recording, fmt_ms, resolve_calibration, run, run_with_observer,
    CharacterSummary, FlowerSummary, OutputFile, RunError, RunReport, SegmentSummary, ALPHA_CSV, AUTO_CALIBRATION_S,
    CALIBRATION_FILE, CHARACTER_COMMANDS_CSV, CHARACTER_TRACE_CSV, EEG_RAW_CSV, FLOWER_COMMANDS_CSV,
    PRESSURE_TRACE_CSV, PSD_CSV, REPORT_JSON, SEGMENTS_CSV,
};
