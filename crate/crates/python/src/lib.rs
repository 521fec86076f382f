//! Python bindings: `import alphasoft`.

use std::path::{Path, PathBuf};

use alphasoft::dsp::{self, BandpassFilter, PsdEstimator, SpectrumFrame, WindowFunction};
use alphasoft::link;
use alphasoft::mapping::{self, MappingParams};
use alphasoft::orchestrator::{self, RunConfig, RunError};
use alphasoft::service::{self, OperatorCommand};
use alphasoft::signal_source::SAMPLE_RATE_HZ;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err(e: RunError) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        4 => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn from_json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Defaults, then the config file, then `overrides` (same keys as the file).
fn build_config(config: Option<PathBuf>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(&path).map_err(value_err)?,
        None => RunConfig::default(),
    };
    if let Some(kv) = overrides {
        for (k, v) in kv.iter() {
            let key: String = k.extract()?;
            let value = v.str()?.to_string();
            cfg.set(&key, &value, Path::new(".")).map_err(|e| value_err(format!("{key}: {e}")))?;
        }
    }
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

/// Amplitude-to-actuator mapping parameters.
#[pyclass(name = "Mapping", module = "alphasoft", from_py_object)]
#[derive(Clone)]
struct PyMapping(MappingParams);

#[pymethods]
impl PyMapping {
    #[new]
    #[pyo3(signature = (**params))]
    fn new(params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = MappingParams::default();
        if let Some(kv) = params {
            for (k, v) in kv.iter() {
                let name: String = k.extract()?;
                p = p.with_param(&name, v.extract()?).map_err(value_err)?;
            }
        }
        Ok(Self(p))
    }

    /// A copy with one parameter changed.
    fn with_param(&self, name: &str, value: f64) -> PyResult<Self> {
        self.0.with_param(name, value).map(Self).map_err(value_err)
    }

    /// Motor PWM duty (0-255) for an A_PSD in 0..=100.
    fn duty(&self, a_psd: f64) -> PyResult<u8> {
        mapping::to_duty(a_psd, &self.0).map(|c| c.duty).map_err(value_err)
    }

    /// `(setpoint_kpa, t_inflation_s, t_deflation_s)` for an A_PSD in 0..=100.
    fn flower(&self, a_psd: f64) -> PyResult<(f64, f64, f64)> {
        let c = mapping::to_flower_command(a_psd, &self.0).map_err(value_err)?;
        Ok((c.setpoint_kpa, c.t_inflation_s(), c.t_deflation_s()))
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mapping(alpha_gain={}, beta_gain={}, gamma_gain={})",
            self.0.alpha_gain, self.0.beta_gain, self.0.gamma_gain
        )
    }
}

#[pyclass(name = "Calibration", module = "alphasoft", from_py_object)]
#[derive(Clone, Copy)]
struct PyCalibration(dsp::Calibration);

#[pymethods]
impl PyCalibration {
    #[new]
    fn new(p_ref: f64, threshold: f64) -> PyResult<Self> {
        dsp::Calibration::new(p_ref, threshold).map(Self).map_err(value_err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        dsp::Calibration::parse(text).map(Self).map_err(value_err)
    }

    #[getter]
    fn p_ref(&self) -> f64 {
        self.0.p_ref
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.0.threshold
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Calibration(p_ref={}, threshold={})", self.0.p_ref, self.0.threshold)
    }
}

/// Butterworth bandpass, streaming.
#[pyclass(name = "BandpassFilter", module = "alphasoft")]
struct PyBandpass(BandpassFilter);

#[pymethods]
impl PyBandpass {
    #[new]
    #[pyo3(signature = (low_cut=1.0, high_cut=40.0, order=dsp::DEFAULT_ORDER, fs=SAMPLE_RATE_HZ))]
    fn new(low_cut: f64, high_cut: f64, order: usize, fs: f64) -> PyResult<Self> {
        BandpassFilter::new(low_cut, high_cut, order, fs).map(Self).map_err(value_err)
    }

    fn process(&mut self, samples: Vec<f64>) -> PyResult<Vec<f64>> {
        samples.into_iter().map(|x| self.0.process(x).map_err(value_err)).collect()
    }

    fn magnitude(&self, f_hz: f64) -> f64 {
        self.0.magnitude(f_hz)
    }

    fn reset(&mut self) {
        self.0.reset();
    }
}

/// One-sided PSD of one window: `(freq, psd)`.
#[pyfunction]
#[pyo3(signature = (samples, fs=SAMPLE_RATE_HZ, window="rectangular"))]
fn psd(samples: Vec<f64>, fs: f64, window: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let window: WindowFunction = window.parse().map_err(value_err)?;
    let mut est = PsdEstimator::new(samples.len(), fs, window);
    let p = est.psd(&samples).map_err(value_err)?;
    Ok((est.frequencies(), p))
}

/// Alpha gate and normalisation on one spectrum.
#[pyfunction]
fn detect_alpha<'py>(
    py: Python<'py>,
    freq: Vec<f64>,
    psd: Vec<f64>,
    calibration: PyCalibration,
) -> PyResult<Bound<'py, PyAny>> {
    if freq.len() != psd.len() || freq.len() < 2 {
        return Err(value_err("freq and psd must have the same length (>= 2)"));
    }
    let frame = SpectrumFrame {
        frame_idx: 0,
        t_end: 0.0,
        freq,
        psd,
    };
    from_json(py, &dsp::detect_alpha(&frame, &calibration.0))
}

#[pyfunction]
fn quantize(a_psd: f64) -> PyResult<u8> {
    link::quantize(a_psd).map_err(value_err)
}

#[pyfunction]
fn encode_frame<'py>(py: Python<'py>, value: u8) -> PyResult<Bound<'py, PyBytes>> {
    let bytes = link::encode_frame(value).map_err(value_err)?;
    Ok(PyBytes::new(py, &bytes))
}

/// Receiver side of the wire format; malformed frames are dropped and counted.
#[pyclass(name = "FrameDecoder", module = "alphasoft")]
#[derive(Default)]
struct PyFrameDecoder(link::FrameDecoder);

#[pymethods]
impl PyFrameDecoder {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// Values of the frames completed by `chunk`, as ints.
    fn decode(&mut self, chunk: &[u8]) -> Vec<u32> {
        self.0.decode(chunk).into_iter().map(u32::from).collect()
    }

    #[getter]
    fn error_count(&self) -> u64 {
        self.0.error_count()
    }
}

/// Runs a scenario to completion, writes the CSVs, and returns the report.
#[pyfunction]
#[pyo3(signature = (out_dir, config=None, **overrides))]
fn run<'py>(
    py: Python<'py>,
    out_dir: PathBuf,
    config: Option<PathBuf>,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = build_config(config, overrides)?;
    cfg.output_dir = out_dir;
    let report = orchestrator::run(&cfg).map_err(run_err)?;
    from_json(py, &report)
}

#[pyfunction]
#[pyo3(signature = (duration_s=orchestrator::AUTO_CALIBRATION_S, config=None, **overrides))]
fn calibrate(duration_s: f64, config: Option<PathBuf>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<PyCalibration> {
    let cfg = build_config(config, overrides)?;
    orchestrator::calibrate_cmd(&cfg, duration_s).map(PyCalibration).map_err(run_err)
}

/// Writes the plot-ready CSVs into `run_dir`; returns `[(file, rows)]`.
#[pyfunction]
fn export_figures(run_dir: PathBuf) -> PyResult<Vec<(String, u64)>> {
    match orchestrator::export_figures(&run_dir) {
        Ok(files) => Ok(files.into_iter().map(|f| (f.name, f.rows)).collect()),
        Err(e) if e.exit_code() == 4 => Err(PyOSError::new_err(e.to_string())),
        Err(e) => Err(value_err(e)),
    }
}

/// A steerable run on the server clock. Commands are the JSON objects the
/// WebSocket service accepts, passed as dicts.
#[pyclass(name = "LiveSession", module = "alphasoft", unsendable)]
struct PyLiveSession(service::LiveSession);

#[pymethods]
impl PyLiveSession {
    #[new]
    #[pyo3(signature = (config=None, idle=false, **overrides))]
    fn new(config: Option<PathBuf>, idle: bool, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg = build_config(config, overrides)?;
        if idle {
            return Ok(Self(service::LiveSession::idle(cfg)));
        }
        service::LiveSession::start(cfg).map(Self).map_err(run_err)
    }

    #[getter]
    fn running(&self) -> bool {
        self.0.is_running()
    }

    #[getter]
    fn t_s(&self) -> f64 {
        self.0.t_s()
    }

    /// Queues a command for the next tick; raises ValueError with the reason
    /// on rejection.
    fn submit(&mut self, py: Python<'_>, command: &Bound<'_, PyDict>) -> PyResult<()> {
        let text: String = py.import("json")?.call_method1("dumps", (command,))?.extract()?;
        let cmd: OperatorCommand = serde_json::from_str(&text).map_err(|e| value_err(format!("malformed command: {e}")))?;
        self.0.submit(cmd).map_err(PyValueError::new_err)
    }

    /// Advances `n` ticks of 10 ms; returns the snapshots published meanwhile.
    #[pyo3(signature = (n=1))]
    fn tick<'py>(&mut self, py: Python<'py>, n: u64) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let mut out = Vec::new();
        for _ in 0..n {
            let t = self.0.tick().map_err(run_err)?;
            if let Some(s) = t.snapshot {
                out.push(from_json(py, &s)?);
            }
        }
        Ok(out)
    }

    fn snapshot<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &self.0.snapshot())
    }
}

#[pymodule]
#[pyo3(name = "alphasoft")]
fn alphasoft_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SAMPLE_RATE_HZ", SAMPLE_RATE_HZ)?;
    m.add("CONFIG_KEYS", orchestrator::CONFIG_KEYS.to_vec())?;
    m.add_class::<PyMapping>()?;
    m.add_class::<PyCalibration>()?;
    m.add_class::<PyBandpass>()?;
    m.add_class::<PyFrameDecoder>()?;
    m.add_class::<PyLiveSession>()?;
    m.add_function(wrap_pyfunction!(psd, m)?)?;
    m.add_function(wrap_pyfunction!(detect_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(encode_frame, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(export_figures, m)?)?;
    Ok(())
}
