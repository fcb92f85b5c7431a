//! Python bindings: configuration, the experiment recipes and the small
//! closed-form helpers.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wvfreq_core::calibration::{self, ReferenceLine};
use wvfreq_core::config::ExperimentConfig;
use wvfreq_core::signal_chain::{self, FitPoint};
use wvfreq_core::{interferometer, recipes, Error};

create_exception!(wvfreq, WvfreqError, PyException, "Base class for model errors.");
create_exception!(wvfreq, InputError, WvfreqError, "Invalid or unparseable input.");
create_exception!(wvfreq, PhysicsError, WvfreqError, "Physically invalid operating point.");
create_exception!(wvfreq, NumericalError, WvfreqError, "Degenerate fit or numerical failure.");

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.exit_code() {
        2 => InputError::new_err(msg),
        3 => PhysicsError::new_err(msg),
        _ => NumericalError::new_err(msg),
    }
}

/// Experiment configuration. Keyword arguments are `key = value` overrides
/// using the same keys and unit strings as config files, e.g.
/// `Config(sigma="400um", seed=3)`.
#[pyclass(name = "Config", module = "wvfreq", frozen)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = ExperimentConfig::default();
        if let Some(d) = overrides {
            for (k, v) in d.iter() {
                let key: String = k.extract()?;
                let value = v.str()?.to_string();
                inner.set(&key, &value).map_err(py_err)?;
            }
        }
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Loads a `key = value` file.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::load(path).map_err(py_err)?,
        })
    }

    /// Recovers the configuration embedded in an output CSV.
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let table = wvfreq_core::csvio::read_table(text).map_err(py_err)?;
        Ok(Self {
            inner: recipes::config_from_metadata(&table.meta).map_err(py_err)?,
        })
    }

    /// A copy with more overrides applied.
    #[pyo3(signature = (**overrides))]
    fn replace(&self, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        if let Some(d) = overrides {
            for (k, v) in d.iter() {
                inner.set(&k.extract::<String>()?, &v.str()?.to_string()).map_err(py_err)?;
            }
        }
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn canonical(&self) -> String {
        self.inner.canonical()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Prism apex angle, rad (calibrated when the config gives a slope).
    fn apex_angle(&self) -> PyResult<f64> {
        self.inner.apex_angle().map_err(py_err)
    }

    /// Dark-port phase, rad.
    fn phase(&self) -> PyResult<f64> {
        Ok(self.inner.interferometer().map_err(py_err)?.phase())
    }

    fn amplification(&self) -> PyResult<f64> {
        let state = self.inner.interferometer().map_err(py_err)?;
        interferometer::amplification_factor(&state).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Config(hash='{}')", &self.inner.hash()[..12])
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner.canonical() == other.inner.canonical()
    }
}

#[pyclass(name = "LineFit", module = "wvfreq", frozen, get_all)]
struct PyLineFit {
    slope: f64,
    intercept: f64,
    slope_error: f64,
    intercept_error: f64,
    chi_squared: f64,
    points: usize,
    weighted: bool,
}

#[pymethods]
impl PyLineFit {
    fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    fn __repr__(&self) -> String {
        format!(
            "LineFit(slope={:e} +- {:e}, intercept={:e})",
            self.slope, self.slope_error, self.intercept
        )
    }
}

impl From<signal_chain::LineFit> for PyLineFit {
    fn from(f: signal_chain::LineFit) -> Self {
        Self {
            slope: f.slope,
            intercept: f.intercept,
            slope_error: f.slope_error,
            intercept_error: f.intercept_error,
            chi_squared: f.chi_squared,
            points: f.points,
            weighted: f.weighted,
        }
    }
}

/// Straight-line fit, weighted by `1/err^2` when `errors` is given.
#[pyfunction]
#[pyo3(signature = (x, y, errors = None))]
fn slope_fit(x: Vec<f64>, y: Vec<f64>, errors: Option<Vec<f64>>) -> PyResult<PyLineFit> {
    if x.len() != y.len() || errors.as_ref().is_some_and(|e| e.len() != x.len()) {
        return Err(InputError::new_err("x, y and errors must have equal length"));
    }
    let points: Vec<FitPoint> = match errors {
        Some(e) => x.iter().zip(&y).zip(&e).map(|((&a, &b), &s)| FitPoint::with_error(a, b, s)).collect(),
        None => x.iter().zip(&y).map(|(&a, &b)| FitPoint::new(a, b)).collect(),
    };
    Ok(signal_chain::slope_fit(&points).map_err(py_err)?.into())
}

#[pyfunction]
fn weak_value_magnitude(phase: f64) -> PyResult<f64> {
    interferometer::weak_value_magnitude(phase).map_err(py_err)
}

#[pyfunction]
fn postselection_probability(phase: f64) -> PyResult<f64> {
    interferometer::postselection_probability(phase).map_err(py_err)
}

#[pyfunction]
fn phase_for_postselection(probability: f64) -> PyResult<f64> {
    interferometer::phase_for_postselection(probability).map_err(py_err)
}

/// Slope sweep. Returns detunings, deflections and the fit.
#[pyfunction]
fn run_slope<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let s = py.detach(|| recipes::run_slope(&cfg)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("detuning", s.points.iter().map(|p| p.detuning).collect::<Vec<_>>())?;
    d.set_item("deflection", s.points.iter().map(|p| p.mean_deflection).collect::<Vec<_>>())?;
    d.set_item("std_of_mean", s.points.iter().map(|p| p.std_of_mean).collect::<Vec<_>>())?;
    d.set_item("model_slope", s.model_slope())?;
    d.set_item("amplification", s.amplification)?;
    d.set_item("unamplified_slope", s.unamplified_slope)?;
    d.set_item("fit", Py::new(py, PyLineFit::from(s.fit))?)?;
    Ok(d)
}

/// Driven and undriven spectra in dB relative to the driven fundamental.
#[pyfunction]
fn run_spectrum<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let s = py.detach(|| recipes::run_spectrum(&cfg)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("frequency", s.driven.frequencies().to_vec())?;
    d.set_item("driven_db", s.driven.power_db().to_vec())?;
    d.set_item("undriven_db", s.undriven.power_db().to_vec())?;
    d.set_item("resolution_bw", s.driven.resolution_bw())?;
    d.set_item("fundamental_to_floor_db", s.fundamental_to_floor_db())?;
    d.set_item("undriven_floor_db", s.undriven_floor_db)?;
    d.set_item("undriven_max_excess_db", s.undriven_max_excess_db)?;
    Ok(d)
}

/// Spectrum at the nonlinear drive with the harmonic levels.
#[pyfunction]
fn run_harmonics<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let h = py.detach(|| recipes::run_harmonics(&cfg)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("frequency", h.spectrum.frequencies().to_vec())?;
    d.set_item("power_db", h.spectrum.power_db().to_vec())?;
    d.set_item("drive", h.drive)?;
    d.set_item("nonlinearity", h.nonlinearity)?;
    d.set_item("floor_db", h.floor_db)?;
    d.set_item("harmonics", h.harmonics)?;
    Ok(d)
}

fn references(path: Option<std::path::PathBuf>) -> PyResult<Vec<ReferenceLine>> {
    match path {
        Some(p) => calibration::load_reference_lines(p).map_err(py_err),
        None => Ok(calibration::rb_d2_reference_lines()),
    }
}

/// Ideal and simulated sensitivity (Hz/sqrt(Hz)) and the usable range (Hz).
/// Pass reference-line scan `positions` to also get the calibration error.
#[pyfunction]
#[pyo3(signature = (config, positions = None, references_file = None))]
fn run_sensitivity<'py>(
    py: Python<'py>,
    config: &PyConfig,
    positions: Option<Vec<f64>>,
    references_file: Option<std::path::PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let cal = match positions {
        Some(p) => Some(calibration::fit_scan_calibration(&p, &references(references_file)?).map_err(py_err)?),
        None => None,
    };
    let cfg = config.inner.clone();
    let s = py
        .detach(|| recipes::run_sensitivity(&cfg, cal.as_ref()))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("ideal", s.ideal)?;
    d.set_item("simulated", s.simulated.sensitivity_per_rt_hz)?;
    d.set_item("statistical_error", s.statistical_error)?;
    d.set_item("calibration_error", s.calibration_error)?;
    d.set_item("snr", s.simulated.snr)?;
    d.set_item("ratio", s.ratio())?;
    d.set_item("usable_range", s.range.range)?;
    Ok(d)
}

/// `(range_hz, wavelength_span_m, clamped)`.
#[pyfunction]
fn run_range(config: &PyConfig) -> PyResult<(f64, f64, bool)> {
    let r = recipes::run_range(&config.inner).map_err(py_err)?;
    Ok((r.range.range, r.wavelength_span, r.range.clamped))
}

/// One detector record: `(times, samples)`.
#[pyfunction]
#[pyo3(signature = (config, filtered = false))]
fn simulate(py: Python<'_>, config: &PyConfig, filtered: bool) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = config.inner.clone();
    let ts = py
        .detach(|| recipes::run_simulate(&cfg, filtered))
        .map_err(py_err)?;
    let times = (0..ts.len()).map(|i| ts.time(i)).collect();
    Ok((times, ts.samples().to_vec()))
}

/// Linear scan calibration against reference lines (built-in Rb D2 set by default).
#[pyfunction]
#[pyo3(signature = (positions, references_file = None))]
fn fit_scan_calibration<'py>(
    py: Python<'py>,
    positions: Vec<f64>,
    references_file: Option<std::path::PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let lines = references(references_file)?;
    let cal = calibration::fit_scan_calibration(&positions, &lines).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("slope", cal.slope)?;
    d.set_item("intercept", cal.intercept)?;
    d.set_item("slope_error", cal.slope_error)?;
    d.set_item("intercept_error", cal.intercept_error)?;
    d.set_item("residual_rms", cal.residual_rms)?;
    d.set_item("fractional_slope_error", cal.fractional_slope_error())?;
    d.set_item("residuals", cal.residuals.clone())?;
    d.set_item("labels", lines.iter().map(|l| l.label.clone()).collect::<Vec<_>>())?;
    Ok(d)
}

#[pymodule]
fn wvfreq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("WvfreqError", py.get_type::<WvfreqError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("PhysicsError", py.get_type::<PhysicsError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyLineFit>()?;
    m.add_function(wrap_pyfunction!(slope_fit, m)?)?;
    m.add_function(wrap_pyfunction!(weak_value_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(postselection_probability, m)?)?;
    m.add_function(wrap_pyfunction!(phase_for_postselection, m)?)?;
    m.add_function(wrap_pyfunction!(run_slope, m)?)?;
    m.add_function(wrap_pyfunction!(run_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(run_harmonics, m)?)?;
    m.add_function(wrap_pyfunction!(run_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(run_range, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scan_calibration, m)?)?;
    Ok(())
}
