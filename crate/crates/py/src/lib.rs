//! Python bindings: scenario loading, pattern algebra, single trials and
//! Monte Carlo sweeps.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use jdfe_core::error::Error;
use jdfe_core::harness::{self, RunOptions, Tolerances};
use jdfe_core::scenario::{self, EstimatorMode};
use jdfe_core::synth::SynthesisMode;

fn to_py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.exit_code() {
        2 => PyValueError::new_err(msg),
        4 => PyIOError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn parse_mode(mode: &str) -> PyResult<EstimatorMode> {
    match mode {
        "plain" => Ok(EstimatorMode::Plain),
        "etm" => Ok(EstimatorMode::Etm),
        other => Err(PyValueError::new_err(format!(
            "mode must be 'plain' or 'etm', got {other:?}"
        ))),
    }
}

fn parse_synthesis(synthesis: &str) -> PyResult<SynthesisMode> {
    match synthesis {
        "phase-model" => Ok(SynthesisMode::PhaseModel),
        "exact-delay" => Ok(SynthesisMode::ExactDelay),
        other => Err(PyValueError::new_err(format!(
            "synthesis must be 'phase-model' or 'exact-delay', got {other:?}"
        ))),
    }
}

/// Validated Q for a delay pattern, or ValueError if the coarray has holes.
#[pyfunction]
fn validate_pattern(coeffs: Vec<u32>) -> PyResult<u32> {
    let pattern = scenario::DelayPattern::new(coeffs).map_err(to_py_err)?;
    scenario::validate_pattern(&pattern).map_err(to_py_err)
}

/// Difference coarray as a dict lag -> multiplicity.
#[pyfunction]
fn difference_coarray(coeffs: Vec<u32>) -> PyResult<BTreeMap<i64, usize>> {
    let pattern = scenario::DelayPattern::new(coeffs).map_err(to_py_err)?;
    Ok(scenario::difference_coarray(&pattern))
}

/// Built-in minimum-redundancy delay pattern for M branches (2..=6).
#[pyfunction]
fn mra_pattern(m: usize) -> PyResult<Vec<u32>> {
    scenario::DelayPattern::mra(m)
        .map(|p| p.coeffs().to_vec())
        .ok_or_else(|| PyValueError::new_err(format!("no built-in MRA pattern for M = {m}")))
}

/// A loaded scenario; construct via `Scenario.from_file` or
/// `Scenario.from_json`.
#[pyclass]
struct Scenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::Scenario::from_json_str(json).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: scenario::Scenario::from_json_file(path).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn l(&self) -> u32 {
        self.inner.l
    }

    #[getter]
    fn f_nyq_hz(&self) -> f64 {
        self.inner.constants.f_nyq_hz
    }

    #[getter]
    fn f_sub_hz(&self) -> f64 {
        self.inner.f_sub_hz()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    #[getter]
    fn n_snapshots(&self) -> usize {
        self.inner.n_snapshots
    }

    #[getter]
    fn pattern(&self) -> Vec<u32> {
        self.inner.pattern.coeffs().to_vec()
    }

    /// Virtual aperture Q, or None when the coarray is non-contiguous.
    fn q(&self) -> Option<u32> {
        scenario::validate_pattern(&self.inner.pattern).ok()
    }

    /// Per-source unit phases (omega_rad, phi_rad).
    fn unit_phases(&self) -> Vec<(f64, f64)> {
        scenario::unit_phases(&self.inner)
            .into_iter()
            .map(|p| (p.omega_rad, p.phi_rad))
            .collect()
    }

    /// Identifiability check: (rate_ok, margin_hz, dof, dof_ok).
    #[pyo3(signature = (mode = "etm"))]
    fn check_rate(&self, mode: &str) -> PyResult<(bool, f64, Option<usize>, bool)> {
        let rc = scenario::check_rate_condition(&self.inner, parse_mode(mode)?);
        Ok((rc.rate_ok, rc.margin_hz, rc.dof, rc.dof_ok))
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(K={}, M={}, L={}, f_nyq={:.3e} Hz, N={})",
            self.inner.k(),
            self.inner.m(),
            self.inner.l,
            self.inner.constants.f_nyq_hz,
            self.inner.n_snapshots
        )
    }
}

/// Result of a single trial.
#[pyclass]
struct TrialResult {
    #[pyo3(get)]
    pairs: Vec<(f64, f64)>,
    #[pyo3(get)]
    truth: Vec<(f64, f64)>,
    #[pyo3(get)]
    freq_errors_hz: Vec<f64>,
    #[pyo3(get)]
    doa_errors_deg: Vec<f64>,
    #[pyo3(get)]
    success: bool,
    #[pyo3(get)]
    rmse_freq_hz: f64,
    #[pyo3(get)]
    rmse_doa_deg: f64,
}

/// Runs one trial and scores it against the scenario truth.
#[pyfunction]
#[pyo3(signature = (scenario, mode = "etm", synthesis = "phase-model", seed = 0, analytic = false))]
fn run(
    scenario: &Scenario,
    mode: &str,
    synthesis: &str,
    seed: u64,
    analytic: bool,
) -> PyResult<TrialResult> {
    let opts = RunOptions {
        mode: parse_mode(mode)?,
        synthesis: parse_synthesis(synthesis)?,
        analytic,
        seed,
        grids: None,
        tolerances: Tolerances::default(),
        dump_snapshots: None,
    };
    let (result, _) = harness::run_scenario(&scenario.inner, &opts).map_err(to_py_err)?;
    Ok(TrialResult {
        pairs: result
            .estimates
            .pairs
            .iter()
            .map(|p| (p.f_hz, p.theta_deg))
            .collect(),
        truth: result.truth.clone(),
        rmse_freq_hz: result.rmse_freq_hz(),
        rmse_doa_deg: result.rmse_doa_deg(),
        freq_errors_hz: result.freq_errors_hz,
        doa_errors_deg: result.doa_errors_deg,
        success: result.success,
    })
}

/// Pseudo-spectra of one run, for plotting: two frequency scans as
/// `(grid_hz, values)` and one DOA scan per estimated carrier as
/// `(f_hat_hz, grid_deg, values)`.
#[pyfunction]
#[pyo3(signature = (scenario, mode = "etm", synthesis = "phase-model", seed = 0, analytic = false))]
#[allow(clippy::type_complexity)]
fn pseudo_spectra(
    scenario: &Scenario,
    mode: &str,
    synthesis: &str,
    seed: u64,
    analytic: bool,
) -> PyResult<(Vec<(Vec<f64>, Vec<f64>)>, Vec<(f64, Vec<f64>, Vec<f64>)>)> {
    let opts = RunOptions {
        mode: parse_mode(mode)?,
        synthesis: parse_synthesis(synthesis)?,
        analytic,
        seed,
        grids: None,
        tolerances: Tolerances::default(),
        dump_snapshots: None,
    };
    let (_, spectra) = harness::run_scenario(&scenario.inner, &opts).map_err(to_py_err)?;
    let freq = spectra
        .freq
        .into_iter()
        .map(|s| (s.grid, s.values))
        .collect();
    let doa = spectra
        .doa
        .into_iter()
        .map(|s| (s.f_hat_hz.unwrap_or(f64::NAN), s.grid, s.values))
        .collect();
    Ok((freq, doa))
}

/// One sweep point as (snr_db, rmse_freq_hz, rmse_doa_deg, n_trials,
/// success_rate).
type SweepRow = (f64, f64, f64, usize, f64);

/// Monte Carlo RMSE sweep over SNR points.
#[pyfunction]
#[pyo3(signature = (scenario, snr_db, trials, mode = "etm", synthesis = "phase-model", seed = 0))]
fn sweep(
    scenario: &Scenario,
    snr_db: Vec<f64>,
    trials: usize,
    mode: &str,
    synthesis: &str,
    seed: u64,
) -> PyResult<Vec<SweepRow>> {
    let opts = RunOptions {
        mode: parse_mode(mode)?,
        synthesis: parse_synthesis(synthesis)?,
        analytic: false,
        seed,
        grids: None,
        tolerances: Tolerances::default(),
        dump_snapshots: None,
    };
    let result =
        harness::monte_carlo_rmse(&scenario.inner, &snr_db, trials, &opts, seed).map_err(to_py_err)?;
    Ok(result
        .points
        .iter()
        .map(|p| (p.snr_db, p.rmse_freq_hz, p.rmse_doa_deg, p.n_trials, p.success_rate))
        .collect())
}

#[pymodule]
fn jdfe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<TrialResult>()?;
    m.add_function(wrap_pyfunction!(validate_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(difference_coarray, m)?)?;
    m.add_function(wrap_pyfunction!(mra_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(pseudo_spectra, m)?)?;
    Ok(())
}
