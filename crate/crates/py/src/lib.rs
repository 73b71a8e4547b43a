//! Python module `nvgyro`.
//!
//! Results of whole experiments come back as plain dicts and lists. The
//! fringe fit and the simulator are classes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use nvgyro_core::analysis::{self, FringeFit};
use nvgyro_core::units::{dps_to_hz, hz_to_dps};
use nvgyro_core::{
    experiment, Error, ExperimentConfig, FieldEnvironment, FringeSeries, PhysicalConstants, RotationProfile,
};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::SingularDenominator { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any(),
            _ => py.None().into_bound(py),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let items = items.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(map) => {
            let d = PyDict::new(py);
            for (k, x) in map {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// Experiment configuration parsed from TOML. Unknown keys are errors.
#[pyclass(name = "Config", frozen)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml=""))]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_toml_str(toml).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        Self::new(&text)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.inner)
    }

    #[getter]
    fn seed(&self) -> Option<u64> {
        self.inner.run.seed
    }

    /// Two equal sub-ensembles with RF pulse areas scaled by `1 -+ spread`.
    fn with_rf_spread(&self, spread: f64) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.sequence = inner.sequence.with_rf_spread(spread);
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(B={} G, tau_wp={} s, rf_gradient={:?})",
            self.inner.environment.b_gauss, self.inner.sequence.tau_wp, self.inner.sequence.rf_gradient
        )
    }
}

/// Damped-sine fit `A exp(-tau / T2*) sin(2 pi f tau + phi) + offset`.
#[pyclass(name = "FringeFit", frozen)]
struct PyFringeFit {
    inner: FringeFit,
}

#[pymethods]
impl PyFringeFit {
    #[getter]
    fn amplitude(&self) -> f64 {
        self.inner.amplitude
    }
    #[getter]
    fn frequency(&self) -> f64 {
        self.inner.frequency
    }
    #[getter]
    fn phase(&self) -> f64 {
        self.inner.phase
    }
    #[getter]
    fn t2star(&self) -> f64 {
        self.inner.t2star
    }
    #[getter]
    fn offset(&self) -> f64 {
        self.inner.offset
    }
    #[getter]
    fn residual_rms(&self) -> f64 {
        self.inner.residual_rms
    }
    #[getter]
    fn covariance(&self) -> Vec<Vec<f64>> {
        self.inner.covariance.iter().map(|r| r.to_vec()).collect()
    }

    /// Standard errors keyed by parameter name.
    fn std_errors<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (name, se) in FringeFit::PARAMETER_NAMES.iter().zip(self.inner.std_errors()) {
            d.set_item(name, se)?;
        }
        Ok(d)
    }

    fn evaluate(&self, tau: f64) -> f64 {
        self.inner.evaluate(tau)
    }

    fn __repr__(&self) -> String {
        let se = self.inner.std_errors();
        format!(
            "FringeFit(f={:.6} +/- {:.3e} Hz, T2*={:.4e} +/- {:.1e} s, A={:.4e})",
            self.inner.frequency, se[1], self.inner.t2star, se[3], self.inner.amplitude
        )
    }
}

/// 4-Ramsey simulator built from a configuration.
#[pyclass(name = "Simulator", frozen)]
struct PySimulator {
    config: ExperimentConfig,
    sim: nvgyro_core::Simulator,
}

impl PySimulator {
    fn env(&self, rotation_dps: f64) -> FieldEnvironment {
        let mut env = self.config.environment.field();
        env.nu_hz += dps_to_hz(rotation_dps);
        env
    }
}

#[pymethods]
impl PySimulator {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        let c = &config.inner;
        let sim = nvgyro_core::Simulator::new(&c.sequence, &c.detector, &c.constants)
            .and_then(|s| s.with_noise(&c.noise.extra()))
            .map_err(err)?;
        Ok(Self {
            config: c.clone(),
            sim,
        })
    }

    /// Fringe frequency in the configured frame (Hz) with an extra rotation.
    #[pyo3(signature = (rotation_dps=0.0))]
    fn fringe_frequency(&self, rotation_dps: f64) -> PyResult<f64> {
        self.sim.fringe_frequency(&self.env(rotation_dps)).map_err(err)
    }

    /// Four single-Ramsey scans and their combination over `taus` (s).
    #[pyo3(signature = (taus, seed=None, rotation_dps=0.0))]
    fn sweep<'py>(
        &self,
        py: Python<'py>,
        taus: Vec<f64>,
        seed: Option<u64>,
        rotation_dps: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let env = self.env(rotation_dps);
        let s = py.detach(|| self.sim.sweep(&env, &taus, seed)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("taus", &s.taus)?;
        for (k, single) in s.singles.iter().enumerate() {
            d.set_item(format!("R{}", k + 1), single)?;
        }
        d.set_item("R", &s.combined)?;
        d.set_item("sigma_single", s.sigma_single)?;
        d.set_item("sigma_combined", s.sigma_combined)?;
        Ok(d)
    }

    /// Rising zero crossing of the combined fringe nearest `tau_guess` (s).
    fn snap_working_point(&self, tau_guess: f64) -> PyResult<f64> {
        self.sim.snap_working_point(&self.env(0.0), tau_guess).map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (b_gauss, config=None))]
fn dq_splitting(b_gauss: f64, config: Option<&PyConfig>) -> PyResult<f64> {
    let c = config.map_or(PhysicalConstants::LITERATURE, |c| c.inner.constants);
    nvgyro_core::dq_splitting(b_gauss, &c).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (b_gauss, config=None))]
fn transition_frequencies(b_gauss: f64, config: Option<&PyConfig>) -> PyResult<(f64, f64)> {
    let c = config.map_or(PhysicalConstants::LITERATURE, |c| c.inner.constants);
    nvgyro_core::transition_frequencies(&FieldEnvironment::new(b_gauss), &c).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (taus, values, sigma=None))]
fn fit_decaying_sine(taus: Vec<f64>, values: Vec<f64>, sigma: Option<Vec<f64>>) -> PyResult<PyFringeFit> {
    let mut series = FringeSeries::new(taus, values).map_err(err)?;
    if let Some(s) = sigma {
        series = series.with_sigma(s).map_err(err)?;
    }
    let inner = analysis::fit_decaying_sine(&series).map_err(err)?;
    Ok(PyFringeFit { inner })
}

/// One-sided power spectrum as `(freqs_hz, power)`.
#[pyfunction]
#[pyo3(signature = (taus, values, zero_pad=1))]
fn power_spectrum(taus: Vec<f64>, values: Vec<f64>, zero_pad: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let series = FringeSeries::new(taus, values).map_err(err)?;
    let s = analysis::power_spectrum(&series, zero_pad).map_err(err)?;
    Ok((s.freqs, s.power))
}

/// Overlapping Allan deviation as `(tau_s, adev)`.
#[pyfunction]
fn allan_deviation(values: Vec<f64>, tau0: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let a = analysis::allan_deviation(&values, tau0).map_err(err)?;
    Ok((a.tau_avg, a.adev))
}

#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn run_fringes<'py>(py: Python<'py>, config: &PyConfig, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.inner;
    let exp = py.detach(|| experiment::run_fringes(cfg, seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("taus", &exp.sweep.taus)?;
    d.set_item("singles", exp.sweep.singles.iter().map(|s| s.as_slice()).collect::<Vec<_>>())?;
    d.set_item("combined", &exp.sweep.combined)?;
    d.set_item("fit", PyFringeFit { inner: exp.fit })?;
    d.set_item("fringe_frequency", exp.fringe_frequency)?;
    d.set_item("sq_frequencies", exp.sq_frequencies)?;
    d.set_item("spectrum_freqs", &exp.combined_spectrum.freqs)?;
    d.set_item("spectrum_power", &exp.combined_spectrum.power)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn calibrate<'py>(py: Python<'py>, config: &PyConfig, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = &config.inner;
    let cal = py.detach(|| experiment::calibrate(cfg, seed)).map_err(err)?;
    serialize(py, &cal)
}

/// Runs a rate-table program given as CSV text (`duration_s,rate_dps,accel_dps2`).
#[pyfunction]
#[pyo3(signature = (config, profile_csv, duration=None, seed=None))]
fn run_gyro<'py>(
    py: Python<'py>,
    config: &PyConfig,
    profile_csv: &str,
    duration: Option<f64>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.inner;
    let profile = RotationProfile::from_csv_str(profile_csv).map_err(err)?;
    let exp = py.detach(|| experiment::run_gyro(cfg, &profile, duration, seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("t", &exp.stream.t)?;
    d.set_item("signal", &exp.stream.signal)?;
    d.set_item("table_rate_dps", exp.stream.reference_rate_hz.iter().map(|&v| hz_to_dps(v)).collect::<Vec<_>>())?;
    d.set_item("nu_hat_dps", exp.stream.nu_hat_hz.iter().map(|&v| hz_to_dps(v)).collect::<Vec<_>>())?;
    d.set_item("calibration", serialize(py, &exp.calibration)?)?;
    d.set_item("telemetry", serialize(py, &exp.telemetry)?)?;
    d.set_item("predicted_sigma_dps", hz_to_dps(exp.predicted_sigma_hz))?;
    match &exp.sweep {
        Some((cal, fit)) => {
            let r = PyDict::new(py);
            r.set_item("alpha_percent_per_dps", cal.percent_per_dps())?;
            r.set_item("fit", serialize(py, fit)?)?;
            d.set_item("regression", r)?;
        }
        None => d.set_item("regression", py.None())?,
    }
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (config, duration, seed=None))]
fn run_allan<'py>(py: Python<'py>, config: &PyConfig, duration: f64, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.inner;
    let exp = py.detach(|| experiment::run_allan(cfg, duration, seed)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tau", &exp.allan.tau_avg)?;
    d.set_item("adev_hz", &exp.allan.adev)?;
    d.set_item("arw_hz", exp.arw_hz)?;
    d.set_item("predicted_arw_hz", exp.predicted_arw_hz)?;
    d.set_item("psn_budget_hz", exp.psn_budget.hz_per_rt_hz)?;
    d.set_item("slope", exp.slope)?;
    d.set_item("bias_stability", exp.bias_stability)?;
    d.set_item("samples", exp.stream.len())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (config=None, epsilon=1e-4))]
fn budget<'py>(py: Python<'py>, config: Option<&PyConfig>, epsilon: f64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config.map(|c| c.inner.clone()).unwrap_or_default();
    serialize(py, &experiment::budget(&cfg, epsilon).map_err(err)?)
}

#[pymodule]
fn nvgyro(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyFringeFit>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(dq_splitting, m)?)?;
    m.add_function(wrap_pyfunction!(transition_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decaying_sine, m)?)?;
    m.add_function(wrap_pyfunction!(power_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(allan_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(run_fringes, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(run_gyro, m)?)?;
    m.add_function(wrap_pyfunction!(run_allan, m)?)?;
    m.add_function(wrap_pyfunction!(budget, m)?)?;
    Ok(())
}
