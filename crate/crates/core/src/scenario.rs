//! Scenario files (TOML) and the built-in benchmark systems.
//!
//! Complex numbers are written either as a plain number or as `[re, im]`.
//! Couplings are given as a dense `matrix` or as sparse `terms` in the
//! working basis; initial occupations refer to the eigenbasis of `H`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::BathModel;
use crate::error::{Error, Result};
use crate::generators::{GeneratorOptions, GeneratorSpec, MasterEquation};
use crate::integrator::StepControl;
use crate::propagate::{self, OracleComparison, Trajectory};
use crate::rdm::{
    spectral_audit, CMatrix, CouplingOperator, OneRdm, SystemHamiltonian, DEFAULT_DEGENERACY_TOL,
};
use crate::representability::{self, AuditSummary, ConstraintReport};

pub const SCENARIO_FORMAT: &str = "onerdm-scenario/1";
pub const DEFAULT_SAMPLES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> Complex64 {
        match self {
            Entry::Real(r) => Complex64::new(r, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }

    fn from_complex(z: Complex64) -> Self {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub i: usize,
    pub j: usize,
    pub value: Entry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, written row by row. Identity if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvectors: Option<Vec<Vec<Entry>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracy_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Entry>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<Term>,
    /// Adds the adjoint of every listed term.
    #[serde(default)]
    pub add_hermitian_conjugate: bool,
}

fn default_label() -> String {
    "A".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSection {
    /// Occupations of the eigenvectors of `H`, ascending energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupations: Option<Vec<f64>>,
    /// Full matrix in the working basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Entry>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub lambda: f64,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pv_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pv_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub kind: MasterEquation,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub pauli_blocked: bool,
    #[serde(default)]
    pub lamb_shift: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Atomic time units. Defaults to a multiple of the slowest relaxation
    /// time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Spacing of recorded times. Overrides `samples`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_stride: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Co-propagate the hole matrix.
    #[serde(default)]
    pub hole: bool,
    /// Compare against matrix-exponential propagation (linear only).
    #[serde(default)]
    pub verify_expm: bool,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_rtol() -> f64 {
    StepControl::default().rtol
}
fn default_atol() -> f64 {
    StepControl::default().atol
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            t_end: None,
            output_stride: None,
            samples: DEFAULT_SAMPLES,
            rtol: default_rtol(),
            atol: default_atol(),
            hole: false,
            verify_expm: false,
        }
    }
}

/// On-disk form of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format: String,
    pub name: String,
    pub chi: f64,
    pub hamiltonian: HamiltonianSection,
    pub coupling: Vec<CouplingSection>,
    pub initial_state: InitialStateSection,
    pub bath: BathSection,
    pub generator: GeneratorSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.format != SCENARIO_FORMAT {
            return Err(Error::Config(format!(
                "unsupported scenario format '{}' (expected '{SCENARIO_FORMAT}')",
                file.format
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}

fn dense(rows: &[Vec<Entry>], dim: usize, what: &str) -> Result<CMatrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Config(format!("{what} must be {dim}x{dim}")));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| rows[i][j].value()))
}

fn rows_of(m: &CMatrix) -> Vec<Vec<Entry>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Entry::from_complex(m[(i, j)])).collect())
        .collect()
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub source: ScenarioFile,
    pub hamiltonian: SystemHamiltonian,
    pub couplings: Vec<CouplingOperator>,
    pub initial_state: OneRdm,
    pub bath: BathModel,
    pub options: GeneratorOptions,
    pub control: StepControl,
}

impl Scenario {
    pub fn from_file(source: ScenarioFile) -> Result<Self> {
        let config = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let h = &source.hamiltonian;
        let dim = h.energies.len();
        if dim == 0 {
            return Err(Error::Config("hamiltonian.energies is empty".into()));
        }
        let hamiltonian = match &h.eigenvectors {
            Some(rows) => SystemHamiltonian::from_eigensystem(&h.energies, dense(rows, dim, "hamiltonian.eigenvectors")?),
            None => SystemHamiltonian::from_energies(&h.energies),
        }
        .and_then(|s| s.with_degeneracy_tol(h.degeneracy_tol.unwrap_or(DEFAULT_DEGENERACY_TOL)))
        .map_err(config)?;

        if source.coupling.is_empty() {
            return Err(Error::Config("at least one [[coupling]] is required".into()));
        }
        let mut couplings = Vec::new();
        for (k, c) in source.coupling.iter().enumerate() {
            let op = match (&c.matrix, c.terms.is_empty()) {
                (Some(rows), true) => {
                    let mut m = dense(rows, dim, &format!("coupling[{k}].matrix"))?;
                    if c.add_hermitian_conjugate {
                        m = &m + m.adjoint();
                    }
                    CouplingOperator::new(c.label.clone(), m)
                }
                (None, false) => {
                    if let Some(t) = c.terms.iter().find(|t| t.i >= dim || t.j >= dim) {
                        return Err(Error::Config(format!(
                            "coupling[{k}] term ({}, {}) is outside dimension {dim}",
                            t.i, t.j
                        )));
                    }
                    let mut m = CMatrix::zeros(dim, dim);
                    for t in &c.terms {
                        m[(t.i, t.j)] += t.value.value();
                    }
                    if c.add_hermitian_conjugate {
                        m = &m + m.adjoint();
                    }
                    CouplingOperator::new(c.label.clone(), m)
                }
                _ => {
                    return Err(Error::Config(format!(
                        "coupling[{k}] needs exactly one of `matrix` or `terms`"
                    )))
                }
            }
            .map_err(config)?;
            couplings.push(op);
        }

        let init = &source.initial_state;
        let rho = match (&init.occupations, &init.matrix) {
            (Some(occ), None) => {
                if occ.len() != dim {
                    return Err(Error::Config(format!("initial_state.occupations must have {dim} entries")));
                }
                let v = hamiltonian.eigenvectors();
                let diag = crate::rdm::real_diagonal(occ);
                v * diag * v.adjoint()
            }
            (None, Some(rows)) => dense(rows, dim, "initial_state.matrix")?,
            _ => {
                return Err(Error::Config(
                    "initial_state needs exactly one of `occupations` or `matrix`".into(),
                ))
            }
        };
        let initial_state = OneRdm::new(crate::rdm::hermitize(&rho).map_err(config)?, source.chi).map_err(config)?;
        let audit = spectral_audit(&initial_state);
        if audit.violation {
            return Err(Error::Config(format!(
                "initial state is not N-representable: eigenvalues span [{:.3e}, {:.3e}] with cap {}",
                audit.min_eigenvalue, audit.max_eigenvalue, source.chi
            )));
        }

        let b = &source.bath;
        let mut bath = BathModel::new(b.lambda, b.temperature).map_err(config)?;
        if let Some(c) = b.pv_cutoff {
            bath = bath.with_pv_cutoff(c).map_err(config)?;
        }
        if let Some(p) = b.pv_points {
            bath = bath.with_pv_points(p).map_err(config)?;
        }

        let g = &source.generator;
        let options = GeneratorOptions::new(g.kind, source.chi)
            .blocked(g.pauli_blocked)
            .lamb_shift(g.lamb_shift)
            .threshold(g.threshold);

        let s = &source.schedule;
        if s.samples == 0 {
            return Err(Error::Config("schedule.samples must be positive".into()));
        }
        if let Some(t) = s.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("schedule.t_end must be positive, got {t}")));
            }
        }
        let control = StepControl::with_tolerances(s.rtol, s.atol);
        if !(s.rtol > 0.0 && s.atol > 0.0) {
            return Err(Error::Config("schedule tolerances must be positive".into()));
        }
        Ok(Self {
            source,
            hamiltonian,
            couplings,
            initial_state,
            bath,
            options,
            control,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(ScenarioFile::load(path)?)
    }

    pub fn name(&self) -> &str {
        &self.source.name
    }

    pub fn generator(&self) -> Result<GeneratorSpec> {
        GeneratorSpec::build(&self.hamiltonian, &self.couplings, &self.bath, self.options)
    }

    /// Recorded times and the rule that produced `t_end`.
    pub fn output_times(&self, spec: &GeneratorSpec) -> Result<(Vec<f64>, String)> {
        let s = &self.source.schedule;
        let (t_end, rule) = match s.t_end {
            Some(t) => (t, "given".to_string()),
            None => {
                let factor = if spec.is_blocked() {
                    propagate::BLOCKED_RELAXATION_TIMES
                } else {
                    propagate::LINEAR_RELAXATION_TIMES
                };
                (propagate::default_t_end(spec)?, format!("{factor}/slowest_downhill_rate"))
            }
        };
        let times = match s.output_stride {
            Some(stride) => propagate::strided_times(t_end, stride)?,
            None => propagate::uniform_times(t_end, s.samples)?,
        };
        Ok((times, rule))
    }
}

/// Propagates a scenario with its own schedule.
pub fn integrate(scenario: &Scenario) -> Result<Trajectory> {
    let spec = scenario.generator()?;
    let (times, _) = scenario.output_times(&spec)?;
    propagate::propagate(
        &spec,
        &scenario.initial_state,
        &times,
        scenario.control,
        scenario.source.schedule.hole,
    )
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: GeneratorSpec,
    pub trajectory: Trajectory,
    pub audit: AuditSummary,
    pub constraint: ConstraintReport,
    pub unitality: f64,
    pub oracle: Option<OracleComparison>,
    pub t_end_rule: String,
}

pub fn execute(scenario: &Scenario) -> Result<RunOutcome> {
    let spec = scenario.generator()?;
    let (times, t_end_rule) = scenario.output_times(&spec)?;
    let schedule = &scenario.source.schedule;
    let trajectory = propagate::propagate(&spec, &scenario.initial_state, &times, scenario.control, schedule.hole)?;
    let oracle = if schedule.verify_expm && !spec.is_blocked() {
        Some(propagate::verify_against_expm(&spec, &trajectory)?)
    } else {
        None
    };
    Ok(RunOutcome {
        audit: representability::audit_trajectory(&trajectory),
        constraint: representability::constraint_residual(&spec),
        unitality: representability::unitality_residual(&spec)?,
        oracle,
        t_end_rule,
        trajectory,
        spec,
    })
}

/// Checks only: constraint and unitality, no propagation.
pub fn audit_only(scenario: &Scenario) -> Result<(GeneratorSpec, ConstraintReport, f64)> {
    let spec = scenario.generator()?;
    let constraint = representability::constraint_residual(&spec);
    let unitality = representability::unitality_residual(&spec)?;
    Ok((spec, constraint, unitality))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    ThreeLevel,
    Benzene,
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three-level" => Ok(Self::ThreeLevel),
            "benzene" => Ok(Self::Benzene),
            other => Err(Error::InvalidParameter(format!(
                "unknown built-in '{other}' (expected three-level or benzene)"
            ))),
        }
    }
}

impl Builtin {
    pub fn file(self) -> ScenarioFile {
        match self {
            Self::ThreeLevel => three_level_file(),
            Self::Benzene => benzene_file(),
        }
    }

    pub fn scenario(self) -> Scenario {
        Scenario::from_file(self.file()).expect("built-in scenarios are valid")
    }
}

fn unit(i: usize, j: usize) -> Term {
    Term {
        i,
        j,
        value: Entry::Real(1.0),
    }
}

/// Three-level ladder with nearest-neighbour coupling, one electron in the
/// top level.
pub fn three_level_file() -> ScenarioFile {
    ScenarioFile {
        format: SCENARIO_FORMAT.into(),
        name: "three-level".into(),
        chi: 1.0,
        hamiltonian: HamiltonianSection {
            energies: vec![-0.5, 0.0, 0.5],
            eigenvectors: None,
            degeneracy_tol: None,
        },
        coupling: vec![CouplingSection {
            label: "A".into(),
            matrix: None,
            terms: vec![unit(0, 1), unit(1, 2)],
            add_hermitian_conjugate: true,
        }],
        initial_state: InitialStateSection {
            occupations: Some(vec![0.0, 0.0, 1.0]),
            matrix: None,
        },
        bath: BathSection {
            lambda: 0.01,
            temperature: 50.0,
            pv_cutoff: None,
            pv_points: None,
        },
        generator: GeneratorSection {
            kind: MasterEquation::Universal,
            threshold: 0.0,
            pauli_blocked: false,
            lamb_shift: false,
        },
        schedule: ScheduleSection::default(),
    }
}

/// Benzene π space (six spatial orbitals, six electrons) with two electrons
/// promoted, coupled through every symmetry-allowed transfer.
pub fn benzene_file() -> ScenarioFile {
    let pairs = [(0, 1), (0, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 5), (4, 5)];
    ScenarioFile {
        format: SCENARIO_FORMAT.into(),
        name: "benzene".into(),
        chi: 2.0,
        hamiltonian: HamiltonianSection {
            energies: vec![-0.492, -0.323, -0.323, 0.168, 0.168, 0.428],
            eigenvectors: None,
            degeneracy_tol: None,
        },
        coupling: vec![CouplingSection {
            label: "A".into(),
            matrix: None,
            terms: pairs.iter().map(|&(i, j)| unit(i, j)).collect(),
            add_hermitian_conjugate: true,
        }],
        initial_state: InitialStateSection {
            occupations: Some(vec![2.0, 1.0, 1.0, 1.0, 1.0, 0.0]),
            matrix: None,
        },
        bath: BathSection {
            lambda: 0.01,
            temperature: 50.0,
            pv_cutoff: None,
            pv_points: None,
        },
        generator: GeneratorSection {
            kind: MasterEquation::Redfield,
            threshold: 0.0,
            pauli_blocked: false,
            lamb_shift: false,
        },
        schedule: ScheduleSection::default(),
    }
}

/// Writes both built-ins as scenario files into `dir`.
pub fn export_builtins(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for b in [Builtin::ThreeLevel, Builtin::Benzene] {
        let file = b.file();
        let path = dir.join(format!("{}.toml", file.name));
        file.save(&path)?;
        out.push(path);
    }
    Ok(out)
}

/// Dense rows of a matrix in scenario notation.
pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<Entry>> {
    rows_of(m)
}
