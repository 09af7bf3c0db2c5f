//! Python bindings. Matrices cross the boundary as nested lists of Python
//! `complex`; populations and times as lists of floats.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use onerdm::bath;
use onerdm::error::Error;
use onerdm::generators::{GeneratorSpec, MasterEquation};
use onerdm::output;
use onerdm::rdm::{CMatrix, OneRdm};
use onerdm::representability;
use onerdm::scenario::{self, Builtin, RunOutcome, ScenarioFile};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::Dimension { .. }
        | Error::NotSquare { .. }
        | Error::NotHermitian { .. }
        | Error::NotUnitary { .. }
        | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix_in(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be a square list of lists"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_out(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Drude-Lorentz bosonic bath.
#[pyclass(module = "onerdm_py", name = "BathModel")]
struct PyBath {
    inner: bath::BathModel,
}

#[pymethods]
impl PyBath {
    #[new]
    fn new(lambda_: f64, temperature: f64) -> PyResult<Self> {
        Ok(Self {
            inner: bath::BathModel::new(lambda_, temperature).map_err(to_py)?,
        })
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda()
    }

    #[getter]
    fn temperature(&self) -> f64 {
        self.inner.temperature()
    }

    fn spectral_density(&self, omega: f64) -> f64 {
        self.inner.spectral_density(omega)
    }

    /// Γ̂(ω), the full-transform spectral function.
    fn spectral_function_ule(&self, omega: f64) -> f64 {
        self.inner.spectral_function_ule(omega)
    }

    /// Γ(ω) = πΓ̂(ω) + iξ(ω).
    fn spectral_function_redfield(&self, omega: f64) -> PyResult<Complex64> {
        self.inner.spectral_function_redfield(omega).map_err(to_py)
    }

    fn xi_integral(&self, omega: f64) -> PyResult<f64> {
        self.inner.xi_integral(omega).map_err(to_py)
    }

    fn ule_rate(&self, omega: f64) -> f64 {
        self.inner.ule_rate(omega)
    }
}

/// A validated scenario. Options return modified copies.
#[pyclass(module = "onerdm_py", name = "Scenario")]
struct PyScenario {
    file: ScenarioFile,
    inner: scenario::Scenario,
}

impl PyScenario {
    fn from_file(file: ScenarioFile) -> PyResult<Self> {
        let inner = scenario::Scenario::from_file(file.clone()).map_err(to_py)?;
        Ok(Self { file, inner })
    }
}

#[pymethods]
impl PyScenario {
    /// Built-in benchmark: "three-level" or "benzene".
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let b: Builtin = name.parse().map_err(to_py)?;
        Self::from_file(b.file())
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Self::from_file(ScenarioFile::load(&path).map_err(to_py)?)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Self::from_file(ScenarioFile::parse(text).map_err(to_py)?)
    }

    fn to_toml(&self) -> String {
        self.file.to_toml()
    }

    #[getter]
    fn name(&self) -> String {
        self.file.name.clone()
    }

    #[getter]
    fn kind(&self) -> String {
        self.file.generator.kind.to_string()
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.hamiltonian.energies().to_vec()
    }

    #[getter]
    fn initial_state(&self) -> Vec<Vec<Complex64>> {
        matrix_out(self.inner.initial_state.data())
    }

    #[pyo3(signature = (*, kind=None, blocked=None, threshold=None, lamb_shift=None, temperature=None, t_end=None, samples=None, hole=None, verify=None))]
    #[allow(clippy::too_many_arguments)]
    fn with_options(
        &self,
        kind: Option<&str>,
        blocked: Option<bool>,
        threshold: Option<f64>,
        lamb_shift: Option<bool>,
        temperature: Option<f64>,
        t_end: Option<f64>,
        samples: Option<usize>,
        hole: Option<bool>,
        verify: Option<bool>,
    ) -> PyResult<Self> {
        let mut f = self.file.clone();
        if let Some(k) = kind {
            f.generator.kind = k.parse::<MasterEquation>().map_err(to_py)?;
        }
        if let Some(b) = blocked {
            f.generator.pauli_blocked = b;
        }
        if let Some(t) = threshold {
            f.generator.threshold = t;
        }
        if let Some(l) = lamb_shift {
            f.generator.lamb_shift = l;
        }
        if let Some(t) = temperature {
            f.bath.temperature = t;
        }
        if let Some(t) = t_end {
            f.schedule.t_end = Some(t);
        }
        if let Some(n) = samples {
            f.schedule.samples = n;
            f.schedule.output_stride = None;
        }
        if let Some(h) = hole {
            f.schedule.hole = h;
        }
        if let Some(v) = verify {
            f.schedule.verify_expm = v;
        }
        Self::from_file(f)
    }

    fn generator(&self) -> PyResult<PyGenerator> {
        Ok(PyGenerator {
            inner: self.inner.generator().map_err(to_py)?,
        })
    }

    /// Propagate, audit and check. Releases the GIL while integrating.
    fn run(&self, py: Python<'_>) -> PyResult<PyRun> {
        let s = self.inner.clone();
        let outcome = py.detach(move || scenario::execute(&s)).map_err(to_py)?;
        Ok(PyRun {
            scenario: self.inner.clone(),
            outcome,
        })
    }

    /// Constraint and unitality checks without propagation.
    fn audit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let (spec, constraint, unitality) = scenario::audit_only(&self.inner).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("kind", spec.kind().to_string())?;
        d.set_item("pauli_blocked", spec.is_blocked())?;
        d.set_item("unitality_residual", unitality)?;
        d.set_item("non_unital", unitality > representability::CONSTRAINT_TOL)?;
        d.set_item("residual_norm", constraint.residual_norm)?;
        d.set_item("direct_norm", constraint.direct_norm)?;
        d.set_item("residual_matrix", matrix_out(&constraint.residual_matrix))?;
        d.set_item("satisfied", constraint.satisfied)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, kind={}, blocked={}, dim={})",
            self.file.name,
            self.file.generator.kind,
            self.file.generator.pauli_blocked,
            self.inner.hamiltonian.dim()
        )
    }
}

/// A built generator: Liouvillian action, superoperator and checks.
#[pyclass(module = "onerdm_py", name = "Generator")]
struct PyGenerator {
    inner: GeneratorSpec,
}

#[pymethods]
impl PyGenerator {
    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    #[getter]
    fn blocked(&self) -> bool {
        self.inner.is_blocked()
    }

    #[getter]
    fn frequencies(&self) -> Vec<f64> {
        self.inner.frequencies().to_vec()
    }

    fn liouvillian(&self, rho: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
        let m = matrix_in(rho)?;
        Ok(matrix_out(&self.inner.liouvillian_action(&m).map_err(to_py)?))
    }

    fn dissipator(&self, rho: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
        let m = matrix_in(rho)?;
        Ok(matrix_out(&self.inner.dissipator(&m).map_err(to_py)?))
    }

    /// Column-stacked d²×d² matrix (linear generators only).
    fn superoperator(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(matrix_out(&self.inner.superoperator_matrix().map_err(to_py)?))
    }

    fn unitality_residual(&self) -> PyResult<f64> {
        representability::unitality_residual(&self.inner).map_err(to_py)
    }

    fn lamb_shift_hamiltonian(&self) -> Vec<Vec<Complex64>> {
        matrix_out(self.inner.lamb_shift_hamiltonian())
    }
}

/// Result of `Scenario.run()`.
#[pyclass(module = "onerdm_py", name = "Run")]
struct PyRun {
    scenario: scenario::Scenario,
    outcome: RunOutcome,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.outcome.trajectory.times.clone()
    }

    /// Populations in the eigenbasis of H, one list per recorded time.
    #[getter]
    fn populations(&self) -> Vec<Vec<f64>> {
        self.outcome.trajectory.populations.clone()
    }

    #[getter]
    fn final_populations(&self) -> Vec<f64> {
        self.outcome.trajectory.final_populations().to_vec()
    }

    fn state(&self, step: usize) -> PyResult<Vec<Vec<Complex64>>> {
        self.outcome
            .trajectory
            .states
            .get(step)
            .map(|s: &OneRdm| matrix_out(s.data()))
            .ok_or_else(|| PyValueError::new_err(format!("step {step} out of range")))
    }

    #[getter]
    fn hole_defects(&self) -> Option<Vec<f64>> {
        self.outcome.trajectory.hole_defects()
    }

    #[getter]
    fn violation(&self) -> bool {
        self.outcome.audit.violation
    }

    #[getter]
    fn unitality_residual(&self) -> f64 {
        self.outcome.unitality
    }

    #[getter]
    fn oracle_deviation(&self) -> Option<f64> {
        self.outcome.oracle.map(|o| o.max_population_deviation)
    }

    fn audit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let a = &self.outcome.audit;
        let d = PyDict::new(py);
        d.set_item("min_eigenvalue", a.min_eigenvalue)?;
        d.set_item("max_eigenvalue", a.max_eigenvalue)?;
        d.set_item("max_trace_drift", a.max_trace_drift)?;
        d.set_item("max_hermiticity_defect", a.max_hermiticity_defect)?;
        d.set_item("first_violation_time", a.first_violation_time)?;
        d.set_item("violation", a.violation)?;
        d.set_item("max_hole_defect", a.max_hole_defect)?;
        Ok(d)
    }

    fn trajectory_csv(&self) -> PyResult<String> {
        output::trajectory_csv(&self.outcome.trajectory).map_err(to_py)
    }

    fn metadata_json(&self) -> String {
        output::pretty(&output::run_metadata(&self.scenario, &self.outcome))
    }
}

#[pymodule]
fn onerdm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBath>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyGenerator>()?;
    m.add_class::<PyRun>()?;
    m.add("BOLTZMANN_EH_PER_K", bath::BOLTZMANN_EH_PER_K)?;
    Ok(())
}
