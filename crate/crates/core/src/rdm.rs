//! Dense Hermitian matrix types: one-particle reduced density matrices,
//! system Hamiltonians and system-bath coupling operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on Hermiticity and unitarity of inputs.
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Tolerance for eigenvalue audits of a single state.
pub const PHYSICAL_TOL: f64 = 1e-8;
/// Merge eigenvalues closer than this (Eh) into one eigen-subspace.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// Largest absolute entry.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Returns `(M + M†) / 2`.
pub fn hermitize(m: &CMatrix) -> Result<CMatrix> {
    ensure_square(m)?;
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let h = hermitize(m)?;
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn real_diagonal(values: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(values.len(), values.len());
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = Complex64::new(*v, 0.0);
    }
    m
}

/// One-particle reduced density matrix. The same type holds the hole
/// matrix `χ𝟙 − ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneRdm {
    data: CMatrix,
    chi: f64,
    n_electrons: f64,
}

impl OneRdm {
    /// Wraps a Hermitian matrix. `chi` is the maximum occupation of one
    /// orbital (1 for spin-orbitals, 2 for spatial orbitals).
    pub fn new(data: CMatrix, chi: f64) -> Result<Self> {
        ensure_square(&data)?;
        if data.nrows() == 0 {
            return Err(Error::InvalidParameter("empty density matrix".into()));
        }
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "occupancy cap must be positive, got {chi}"
            )));
        }
        let defect = hermiticity_defect(&data);
        if defect > STRUCTURAL_TOL {
            return Err(Error::NotHermitian {
                what: "density matrix".into(),
                defect,
            });
        }
        let n_electrons = data.trace().re;
        Ok(Self {
            data,
            chi,
            n_electrons,
        })
    }

    /// Diagonal state with the given orbital occupations.
    pub fn from_occupations(occupations: &[f64], chi: f64) -> Result<Self> {
        Self::new(real_diagonal(occupations), chi)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn n_electrons(&self) -> f64 {
        self.n_electrons
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    /// The complementary hole matrix `χ𝟙 − ρ`.
    pub fn hole(&self) -> OneRdm {
        let data = identity(self.dim()).scale(self.chi) - &self.data;
        let n_electrons = data.trace().re;
        OneRdm {
            data,
            chi: self.chi,
            n_electrons,
        }
    }

    /// Diagonal of ρ in the eigenbasis of `h`, one entry per eigenvector.
    pub fn populations(&self, h: &SystemHamiltonian) -> Vec<f64> {
        let v = h.eigenvectors();
        let rotated = v.adjoint() * &self.data * v;
        (0..self.dim()).map(|i| rotated[(i, i)].re).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub trace: f64,
    pub hermiticity_defect: f64,
    pub violation: bool,
}

/// Eigenvalue check of the particle and hole conditions. Never fails.
pub fn spectral_audit(rho: &OneRdm) -> AuditReport {
    spectral_audit_with_tol(rho, PHYSICAL_TOL)
}

pub fn spectral_audit_with_tol(rho: &OneRdm, tol: f64) -> AuditReport {
    let eig = hermitian_eigenvalues(&rho.data).unwrap_or_default();
    let min_eigenvalue = eig.first().copied().unwrap_or(f64::NAN);
    let max_eigenvalue = eig.last().copied().unwrap_or(f64::NAN);
    let violation = !(min_eigenvalue >= -tol && max_eigenvalue <= rho.chi + tol);
    AuditReport {
        min_eigenvalue,
        max_eigenvalue,
        trace: rho.trace(),
        hermiticity_defect: hermiticity_defect(&rho.data),
        violation,
    }
}

/// Group of degenerate eigenvectors sharing one eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenSubspace {
    pub energy: f64,
    /// Indices into the sorted eigenvector list.
    pub members: Vec<usize>,
    pub projector: CMatrix,
}

impl EigenSubspace {
    pub fn dim(&self) -> usize {
        self.members.len()
    }
}

/// System Hamiltonian stored through its spectral decomposition.
#[derive(Debug, Clone)]
pub struct SystemHamiltonian {
    energies: Vec<f64>,
    eigenvectors: CMatrix,
    degeneracy_tol: f64,
    subspaces: Vec<EigenSubspace>,
    matrix: CMatrix,
}

impl SystemHamiltonian {
    /// Diagonal Hamiltonian in the computational basis.
    pub fn from_energies(energies: &[f64]) -> Result<Self> {
        Self::from_eigensystem(energies, identity(energies.len()))
    }

    /// `eigenvectors` holds the eigenvectors as columns, in the order of
    /// `energies`. Both are re-sorted by ascending energy.
    pub fn from_eigensystem(energies: &[f64], eigenvectors: CMatrix) -> Result<Self> {
        let d = energies.len();
        if d == 0 {
            return Err(Error::InvalidParameter("empty Hamiltonian".into()));
        }
        ensure_square(&eigenvectors)?;
        if eigenvectors.nrows() != d {
            return Err(Error::Dimension {
                expected: d,
                found: eigenvectors.nrows(),
            });
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("non-finite energy".into()));
        }
        let defect = max_norm(&(eigenvectors.adjoint() * &eigenvectors - identity(d)));
        if defect > STRUCTURAL_TOL {
            return Err(Error::NotUnitary { defect });
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
        let sorted: Vec<f64> = order.iter().map(|&k| energies[k]).collect();
        let mut vectors = CMatrix::zeros(d, d);
        for (new, &old) in order.iter().enumerate() {
            vectors.set_column(new, &eigenvectors.column(old));
        }
        let mut h = Self {
            energies: sorted,
            eigenvectors: vectors,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            subspaces: Vec::new(),
            matrix: CMatrix::zeros(d, d),
        };
        h.rebuild();
        Ok(h)
    }

    /// Diagonalizes a Hermitian matrix.
    pub fn from_matrix(m: &CMatrix) -> Result<Self> {
        ensure_square(m)?;
        let defect = hermiticity_defect(m);
        if defect > STRUCTURAL_TOL {
            return Err(Error::NotHermitian {
                what: "Hamiltonian".into(),
                defect,
            });
        }
        let eig = hermitize(m)?.symmetric_eigen();
        let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        Self::from_eigensystem(&energies, eig.eigenvectors)
    }

    pub fn with_degeneracy_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "degeneracy tolerance must be non-negative, got {tol}"
            )));
        }
        self.degeneracy_tol = tol;
        self.rebuild();
        Ok(self)
    }

    fn rebuild(&mut self) {
        let d = self.energies.len();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for k in 0..d {
            match groups.last_mut() {
                Some(g) if self.energies[k] - self.energies[*g.last().unwrap()] <= self.degeneracy_tol => {
                    g.push(k)
                }
                _ => groups.push(vec![k]),
            }
        }
        self.subspaces = groups
            .into_iter()
            .map(|members| {
                let mut projector = CMatrix::zeros(d, d);
                for &k in &members {
                    let v = self.eigenvectors.column(k);
                    projector += v * v.adjoint();
                }
                let energy =
                    members.iter().map(|&k| self.energies[k]).sum::<f64>() / members.len() as f64;
                EigenSubspace {
                    energy,
                    members,
                    projector,
                }
            })
            .collect();
        self.matrix = &self.eigenvectors * real_diagonal(&self.energies) * self.eigenvectors.adjoint();
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    pub fn subspaces(&self) -> &[EigenSubspace] {
        &self.subspaces
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// All distinct Bohr frequencies `ε_j − ε_i` between eigen-subspaces,
    /// sorted, including 0.
    pub fn bohr_frequencies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for a in &self.subspaces {
            for b in &self.subspaces {
                out.push(b.energy - a.energy);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|x, y| (*x - *y).abs() <= self.degeneracy_tol);
        out
    }
}

/// Hermitian system operator `A_α` entering the system-bath interaction.
#[derive(Debug, Clone)]
pub struct CouplingOperator {
    label: String,
    matrix: CMatrix,
}

impl CouplingOperator {
    pub fn new(label: impl Into<String>, matrix: CMatrix) -> Result<Self> {
        ensure_square(&matrix)?;
        let label = label.into();
        let defect = hermiticity_defect(&matrix);
        if defect > STRUCTURAL_TOL {
            return Err(Error::NotHermitian {
                what: format!("coupling operator '{label}'"),
                defect,
            });
        }
        Ok(Self { label, matrix })
    }

    /// Builds `Σ c |i⟩⟨j| + H.c.` from a list of `(i, j, c)` entries.
    pub fn from_transitions(
        label: impl Into<String>,
        dim: usize,
        entries: &[(usize, usize, Complex64)],
    ) -> Result<Self> {
        let mut m = CMatrix::zeros(dim, dim);
        for &(i, j, c) in entries {
            if i >= dim || j >= dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: i.max(j) + 1,
                });
            }
            m[(i, j)] += c;
            m[(j, i)] += c.conj();
        }
        Self::new(label, m)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}
