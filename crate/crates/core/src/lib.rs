//! Alpha-wave EEG pipeline driving simulated soft actuators.
//!
//! A single-channel EEG stream (synthetic or replayed) is band-pass filtered,
//! windowed and turned into a one-sided PSD. Alpha power, normalised against an
//! eyes-closed calibration, drives two embodiments over a serial-style link:
//! a duty-driven soft character and a PID-regulated pneumatic soft flower.

pub mod dsp;
pub mod link;
pub mod mapping;
pub mod orchestrator;
pub mod service;
pub mod signal_source;
pub mod sim;
