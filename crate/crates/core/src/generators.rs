//! Liouvillians of the Redfield, unified and universal Lindblad master
//! equations, with optional Pauli blocking and Lamb shift.
//!
//! Every dissipator is evaluated at the level of transition pieces
//! `Π_i A Π_j` with a coefficient matrix `c_pq`:
//!
//! `D(ρ) = Σ_pq c_pq (A_p ρ A_q† − ½{A_q† A_p, ρ})`.
//!
//! The three equations differ only in `c_pq`. Pauli blocking rescales each
//! population-transfer piece by `√f(target)`, which keeps the output
//! Hermitian and sends `χ𝟙` to zero for any coupling.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{BathModel, SpectralSample};
use crate::channels::{self, ChannelSet, FrequencyClusters};
use crate::error::{Error, Result};
use crate::rdm::{commutator, hermitize, identity, CMatrix, CouplingOperator, SystemHamiltonian};

/// Populations may overshoot `[0, χ]` by this much before blocking refuses
/// to evaluate.
pub const BLOCKING_POPULATION_TOL: f64 = 1e-6;

/// Factors below this (relative to χ) are treated as exactly zero.
pub const BLOCKING_SNAP: f64 = 1e-13;

// frequencies produced by the same decomposition agree to rounding; this is
// only for matching them up again
const FREQ_MATCH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MasterEquation {
    #[serde(rename = "rme")]
    Redfield,
    #[serde(rename = "ume")]
    Unified,
    #[serde(rename = "ule")]
    Universal,
}

impl MasterEquation {
    pub const ALL: [MasterEquation; 3] = [Self::Redfield, Self::Unified, Self::Universal];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Redfield => "rme",
            Self::Unified => "ume",
            Self::Universal => "ule",
        }
    }
}

impl fmt::Display for MasterEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MasterEquation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rme" | "redfield" => Ok(Self::Redfield),
            "ume" | "unified" => Ok(Self::Unified),
            "ule" | "universal" => Ok(Self::Universal),
            other => Err(Error::InvalidParameter(format!(
                "unknown master equation '{other}' (expected rme, ume or ule)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub kind: MasterEquation,
    pub pauli_blocked: bool,
    pub lamb_shift: bool,
    /// Clustering threshold in Eh. Only the unified equation reads it.
    pub threshold: f64,
    /// Occupancy cap χ.
    pub chi: f64,
}

impl GeneratorOptions {
    pub fn new(kind: MasterEquation, chi: f64) -> Self {
        Self {
            kind,
            pauli_blocked: false,
            lamb_shift: false,
            threshold: 0.0,
            chi,
        }
    }

    pub fn blocked(mut self, on: bool) -> Self {
        self.pauli_blocked = on;
        self
    }

    pub fn lamb_shift(mut self, on: bool) -> Self {
        self.lamb_shift = on;
        self
    }

    pub fn threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "occupancy cap must be positive, got {}",
                self.chi
            )));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "clustering threshold must be non-negative, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Bath spectral functions sampled at every frequency a generator needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateTable {
    samples: Vec<SpectralSample>,
    /// `(a, b, Ŝ(a, b))` for chained transition pairs.
    ule_lamb: Vec<(f64, f64, f64)>,
}

impl RateTable {
    pub fn from_samples(mut samples: Vec<SpectralSample>, ule_lamb: Vec<(f64, f64, f64)>) -> Result<Self> {
        for s in &samples {
            if !(s.gamma_hat.is_finite() && s.lamb_shift.is_finite() && s.omega.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "non-finite rate entry at omega = {}",
                    s.omega
                )));
            }
        }
        if ule_lamb.iter().any(|e| !e.2.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Lamb coefficient".into()));
        }
        samples.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        Ok(Self { samples, ule_lamb })
    }

    /// Samples the bath at `freqs` (in parallel when the principal-value
    /// integrals are requested).
    pub fn compute(bath: &BathModel, freqs: &[f64], lamb_shift: bool) -> Result<Self> {
        let samples = freqs
            .par_iter()
            .map(|&w| bath.sample(w, lamb_shift))
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(samples, Vec::new())
    }

    pub fn with_ule_lamb(mut self, bath: &BathModel, pairs: &[(f64, f64)]) -> Result<Self> {
        let computed = pairs
            .par_iter()
            .map(|&(a, b)| bath.ule_lamb_coefficient(a, b).map(|s| (a, b, s)))
            .collect::<Result<Vec<_>>>()?;
        self.ule_lamb.extend(computed);
        Ok(self)
    }

    pub fn samples(&self) -> &[SpectralSample] {
        &self.samples
    }

    pub fn ule_lamb_entries(&self) -> &[(f64, f64, f64)] {
        &self.ule_lamb
    }

    pub fn sample(&self, omega: f64) -> Result<&SpectralSample> {
        self.samples
            .iter()
            .find(|s| (s.omega - omega).abs() <= FREQ_MATCH_TOL)
            .ok_or_else(|| Error::InvalidParameter(format!("rate table has no entry at omega = {omega}")))
    }

    pub fn ule_lamb(&self, a: f64, b: f64) -> Result<f64> {
        self.ule_lamb
            .iter()
            .find(|e| (e.0 - a).abs() <= FREQ_MATCH_TOL && (e.1 - b).abs() <= FREQ_MATCH_TOL)
            .map(|e| e.2)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("rate table has no Lamb coefficient at ({a}, {b})"))
            })
    }

    /// Replaces `Γ̂(ω)` and `Γ̂(−ω)` by their mean wherever both are
    /// present: the infinite-temperature proxy without detailed balance.
    pub fn symmetrized(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| match self.sample(-s.omega) {
                Ok(m) => SpectralSample {
                    gamma_hat: 0.5 * (s.gamma_hat + m.gamma_hat),
                    ..*s
                },
                Err(_) => *s,
            })
            .collect();
        Self {
            samples,
            ule_lamb: self.ule_lamb.clone(),
        }
    }
}

/// One transition piece of one coupling operator.
#[derive(Debug, Clone)]
pub struct Piece {
    pub operator: usize,
    pub target: usize,
    pub source: usize,
    pub omega: f64,
    /// Index into [`GeneratorSpec::frequencies`].
    pub frequency: usize,
    pub op: CMatrix,
}

impl Piece {
    pub fn is_dephasing(&self) -> bool {
        self.target == self.source
    }
}

/// One entry of the T-tensor expansion: left piece `Π_i A Π_j`, right piece
/// `Π_l A Π_k`, and the rate multiplying it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTensorTerm {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub k: usize,
    pub left: usize,
    pub right: usize,
    pub coefficient: Complex64,
    pub blocked_by: Option<usize>,
}

/// Structure shared by every generator built from one `(H, {A_α})` pair.
struct Skeleton {
    channel_sets: Vec<ChannelSet>,
    pieces: Vec<Piece>,
    frequencies: Vec<f64>,
    clusters: Option<FrequencyClusters>,
}

impl Skeleton {
    fn new(h: &SystemHamiltonian, couplings: &[CouplingOperator], opts: &GeneratorOptions) -> Result<Self> {
        opts.validate()?;
        let channel_sets = couplings
            .iter()
            .map(|a| channels::decompose(h, a))
            .collect::<Result<Vec<_>>>()?;

        let mut all: Vec<f64> = channel_sets.iter().flat_map(|c| c.frequencies()).collect();
        all.sort_by(f64::total_cmp);
        let tol = h.degeneracy_tol();
        let mut frequencies: Vec<f64> = Vec::new();
        for w in all {
            match frequencies.last() {
                Some(&last) if (w - last).abs() <= tol => {}
                _ => frequencies.push(w),
            }
        }
        let index_of = |w: f64| {
            frequencies
                .iter()
                .position(|&f| (f - w).abs() <= tol)
                .expect("every channel frequency was collected")
        };

        let mut pieces = Vec::new();
        for (operator, set) in channel_sets.iter().enumerate() {
            for t in set.transitions() {
                let frequency = index_of(t.omega);
                pieces.push(Piece {
                    operator,
                    target: t.target,
                    source: t.source,
                    omega: frequencies[frequency],
                    frequency,
                    op: t.op.clone(),
                });
            }
        }
        let clusters = match opts.kind {
            MasterEquation::Unified => Some(channels::cluster(&frequencies, opts.threshold)?),
            _ => None,
        };
        Ok(Self {
            channel_sets,
            pieces,
            frequencies,
            clusters,
        })
    }

    fn sample_points(&self) -> Vec<f64> {
        let mut pts = self.frequencies.clone();
        if let Some(cl) = &self.clusters {
            pts.extend(cl.clusters().iter().map(|c| c.center));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= FREQ_MATCH_TOL);
        pts
    }

    fn chained_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (p, a) in self.pieces.iter().enumerate() {
            for (q, b) in self.pieces.iter().enumerate() {
                if a.source == b.target {
                    out.push((p, q));
                }
            }
        }
        out
    }

    fn lamb_points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for (p, q) in self.chained_pairs() {
            let key = (self.pieces[p].omega, self.pieces[q].omega);
            if !pts.iter().any(|k| (k.0 - key.0).abs() <= FREQ_MATCH_TOL && (k.1 - key.1).abs() <= FREQ_MATCH_TOL) {
                pts.push(key);
            }
        }
        pts
    }

    fn compute_rates(&self, bath: &BathModel, opts: &GeneratorOptions) -> Result<RateTable> {
        let lamb = opts.lamb_shift && opts.kind != MasterEquation::Universal;
        let table = RateTable::compute(bath, &self.sample_points(), lamb)?;
        if opts.lamb_shift && opts.kind == MasterEquation::Universal {
            table.with_ule_lamb(bath, &self.lamb_points())
        } else {
            Ok(table)
        }
    }
}

/// An assembled generator. Immutable once built; evaluation is pure and
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    options: GeneratorOptions,
    hamiltonian: SystemHamiltonian,
    channel_sets: Vec<ChannelSet>,
    pieces: Vec<Piece>,
    frequencies: Vec<f64>,
    clusters: Option<FrequencyClusters>,
    rates: RateTable,
    coefficients: CMatrix,
    lamb_hamiltonian: CMatrix,
    // Σ_q conj(c_pq) A_q and Σ_p W_p† A_p, cached for the linear case
    weighted: Vec<CMatrix>,
    anticommutator: CMatrix,
}

impl GeneratorSpec {
    pub fn build(
        h: &SystemHamiltonian,
        couplings: &[CouplingOperator],
        bath: &BathModel,
        options: GeneratorOptions,
    ) -> Result<Self> {
        let skel = Skeleton::new(h, couplings, &options)?;
        let rates = skel.compute_rates(bath, &options)?;
        Self::assemble(h, skel, rates, options)
    }

    /// Builds from a prepared rate table, e.g. a symmetrized one.
    pub fn from_rates(
        h: &SystemHamiltonian,
        couplings: &[CouplingOperator],
        rates: RateTable,
        options: GeneratorOptions,
    ) -> Result<Self> {
        let skel = Skeleton::new(h, couplings, &options)?;
        Self::assemble(h, skel, rates, options)
    }

    /// Same structure with a different rate table.
    pub fn with_rates(&self, rates: RateTable) -> Result<Self> {
        let skel = Skeleton {
            channel_sets: self.channel_sets.clone(),
            pieces: self.pieces.clone(),
            frequencies: self.frequencies.clone(),
            clusters: self.clusters.clone(),
        };
        Self::assemble(&self.hamiltonian, skel, rates, self.options)
    }

    /// Same structure and rates with different switches. The rate table
    /// must already cover what the new options need.
    pub fn with_options(&self, options: GeneratorOptions) -> Result<Self> {
        let couplings = self.coupling_matrices();
        Self::from_rates(&self.hamiltonian, &couplings, self.rates.clone(), options)
    }

    fn coupling_matrices(&self) -> Vec<CouplingOperator> {
        self.channel_sets
            .iter()
            .map(|s| CouplingOperator::new(s.label(), s.reconstruct()).expect("reconstructed coupling is Hermitian"))
            .collect()
    }

    fn assemble(h: &SystemHamiltonian, skel: Skeleton, rates: RateTable, options: GeneratorOptions) -> Result<Self> {
        let d = h.dim();
        let n = skel.pieces.len();
        let pieces = &skel.pieces;

        let redfield = |w: f64| -> Result<Complex64> {
            let s = rates.sample(w)?;
            let im = if options.lamb_shift { s.lamb_shift } else { 0.0 };
            Ok(Complex64::new(PI * s.gamma_hat, im))
        };
        let ule_amp = |w: f64| -> Result<f64> { Ok((2.0 * PI * rates.sample(w)?.gamma_hat).sqrt()) };

        let mut coefficients = CMatrix::zeros(n, n);
        let mut lamb = CMatrix::zeros(d, d);
        match options.kind {
            MasterEquation::Redfield => {
                let gamma: Vec<Complex64> = pieces.iter().map(|p| redfield(p.omega)).collect::<Result<_>>()?;
                for p in 0..n {
                    for q in 0..n {
                        coefficients[(p, q)] = gamma[p] + gamma[q].conj();
                        if options.lamb_shift {
                            let s = (gamma[p] - gamma[q].conj()) / Complex64::new(0.0, 2.0);
                            lamb += pieces[q].op.adjoint() * &pieces[p].op * s;
                        }
                    }
                }
            }
            MasterEquation::Unified => {
                let cl = skel.clusters.as_ref().expect("unified generator carries clusters");
                let centers: Vec<f64> = pieces
                    .iter()
                    .map(|p| cl.center_of(p.omega).expect("every frequency is clustered"))
                    .collect();
                for p in 0..n {
                    for q in 0..n {
                        if cl.cluster_of(pieces[p].omega) != cl.cluster_of(pieces[q].omega) {
                            continue;
                        }
                        let s = rates.sample(centers[p])?;
                        coefficients[(p, q)] = Complex64::new(2.0 * PI * s.gamma_hat, 0.0);
                        if options.lamb_shift {
                            lamb += pieces[q].op.adjoint() * &pieces[p].op * Complex64::new(s.lamb_shift, 0.0);
                        }
                    }
                }
            }
            MasterEquation::Universal => {
                let amp: Vec<f64> = pieces.iter().map(|p| ule_amp(p.omega)).collect::<Result<_>>()?;
                for p in 0..n {
                    for q in 0..n {
                        coefficients[(p, q)] = Complex64::new(amp[p] * amp[q], 0.0);
                    }
                }
                if options.lamb_shift {
                    for (p, q) in skel.chained_pairs() {
                        let s = rates.ule_lamb(pieces[p].omega, pieces[q].omega)?;
                        lamb += &pieces[p].op * &pieces[q].op * Complex64::new(s, 0.0);
                    }
                }
            }
        }
        let lamb_hamiltonian = hermitize(&lamb)?;

        let mut spec = Self {
            options,
            hamiltonian: h.clone(),
            channel_sets: skel.channel_sets,
            pieces: skel.pieces,
            frequencies: skel.frequencies,
            clusters: skel.clusters,
            rates,
            coefficients,
            lamb_hamiltonian,
            weighted: Vec::new(),
            anticommutator: CMatrix::zeros(d, d),
        };
        spec.refresh_cache();
        Ok(spec)
    }

    fn refresh_cache(&mut self) {
        let ones = vec![1.0; self.pieces.len()];
        let (weighted, anticommutator) = self.weighted_ops(&ones);
        self.weighted = weighted;
        self.anticommutator = anticommutator;
    }

    fn weighted_ops(&self, scale: &[f64]) -> (Vec<CMatrix>, CMatrix) {
        let d = self.dim();
        let n = self.pieces.len();
        let mut weighted = Vec::with_capacity(n);
        let mut anticommutator = CMatrix::zeros(d, d);
        for p in 0..n {
            let mut w = CMatrix::zeros(d, d);
            if scale[p] != 0.0 {
                for q in 0..n {
                    let c = self.coefficients[(p, q)];
                    if c == Complex64::new(0.0, 0.0) || scale[q] == 0.0 {
                        continue;
                    }
                    w += &self.pieces[q].op * (c.conj() * scale[q]);
                }
                anticommutator += w.adjoint() * &self.pieces[p].op * Complex64::new(scale[p], 0.0);
            }
            weighted.push(w);
        }
        (weighted, anticommutator)
    }

    pub fn options(&self) -> &GeneratorOptions {
        &self.options
    }

    pub fn kind(&self) -> MasterEquation {
        self.options.kind
    }

    pub fn is_blocked(&self) -> bool {
        self.options.pauli_blocked
    }

    pub fn chi(&self) -> f64 {
        self.options.chi
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &SystemHamiltonian {
        &self.hamiltonian
    }

    pub fn channel_sets(&self) -> &[ChannelSet] {
        &self.channel_sets
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Distinct Bohr frequencies over all coupling operators, ascending.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn clusters(&self) -> Option<&FrequencyClusters> {
        self.clusters.as_ref()
    }

    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    /// The piece-level coefficient matrix `c_pq`.
    pub fn coefficients(&self) -> &CMatrix {
        &self.coefficients
    }

    /// `Σ_α A_αω` summed over every piece at frequency index `k`.
    pub fn channel_operator(&self, k: usize) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for p in self.pieces.iter().filter(|p| p.frequency == k) {
            out += &p.op;
        }
        out
    }

    /// Rate multiplying `A_ω ρ A_ω†` for frequency index `k`.
    pub fn diagonal_rate(&self, k: usize) -> f64 {
        self.pieces
            .iter()
            .position(|p| p.frequency == k)
            .map(|p| self.coefficients[(p, p)].re)
            .unwrap_or(0.0)
    }

    /// Smallest downhill (ω > 0) diagonal rate; sets the relaxation time
    /// scale.
    pub fn slowest_rate(&self) -> Option<f64> {
        (0..self.frequencies.len())
            .filter(|&k| self.frequencies[k] > self.hamiltonian.degeneracy_tol())
            .map(|k| self.diagonal_rate(k))
            .filter(|&r| r > 0.0)
            .min_by(f64::total_cmp)
    }

    /// Copy with every coefficient between different Bohr frequencies
    /// removed (the Davies limit of this generator).
    pub fn secular_truncation(&self) -> Self {
        let mut out = self.clone();
        let n = self.pieces.len();
        for p in 0..n {
            for q in 0..n {
                if self.pieces[p].frequency != self.pieces[q].frequency {
                    out.coefficients[(p, q)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        if self.options.lamb_shift && self.options.kind == MasterEquation::Redfield {
            let d = self.dim();
            let mut lamb = CMatrix::zeros(d, d);
            for p in 0..n {
                for q in 0..n {
                    if self.pieces[p].frequency == self.pieces[q].frequency {
                        let s = (self.redfield_of(p) - self.redfield_of(q).conj()) / Complex64::new(0.0, 2.0);
                        lamb += self.pieces[q].op.adjoint() * &self.pieces[p].op * s;
                    }
                }
            }
            out.lamb_hamiltonian = hermitize(&lamb).expect("square");
        }
        out.refresh_cache();
        out
    }

    fn redfield_of(&self, p: usize) -> Complex64 {
        let s = self.rates.sample(self.pieces[p].omega).expect("rate present");
        Complex64::new(PI * s.gamma_hat, if self.options.lamb_shift { s.lamb_shift } else { 0.0 })
    }

    pub fn lamb_shift_hamiltonian(&self) -> &CMatrix {
        &self.lamb_hamiltonian
    }

    /// `H_S + H_LS` (the Lamb part is zero when switched off).
    pub fn effective_hamiltonian(&self) -> CMatrix {
        self.hamiltonian.matrix() + &self.lamb_hamiltonian
    }

    /// Per-orbital occupation of every eigen-subspace.
    pub fn subspace_populations(&self, rho: &CMatrix) -> Vec<f64> {
        self.hamiltonian
            .subspaces()
            .iter()
            .map(|s| (&s.projector * rho).trace().re / s.dim() as f64)
            .collect()
    }

    /// Pauli factors `f = χ − ρ^{ii}` per eigen-subspace.
    pub fn blocking_factors(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        let chi = self.options.chi;
        self.subspace_populations(rho)
            .into_iter()
            .enumerate()
            .map(|(index, population)| {
                if !(population >= -BLOCKING_POPULATION_TOL && population <= chi + BLOCKING_POPULATION_TOL) {
                    return Err(Error::Physicality { index, population, chi });
                }
                let f = chi - population;
                // a full subspace read back through the eigenvectors is only full to
                // round-off, and the square root would amplify that residue
                if f <= BLOCKING_SNAP * chi.max(1.0) {
                    return Ok(0.0);
                }
                Ok(f.min(chi))
            })
            .collect()
    }

    fn piece_scales(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        let f = self.blocking_factors(rho)?;
        Ok(self
            .pieces
            .iter()
            .map(|p| if p.is_dephasing() { 1.0 } else { f[p.target].sqrt() })
            .collect())
    }

    fn check_dim(&self, rho: &CMatrix) -> Result<()> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: rho.nrows().max(rho.ncols()),
            });
        }
        Ok(())
    }

    fn apply(&self, rho: &CMatrix, weighted: &[CMatrix], anticommutator: &CMatrix, scale: Option<&[f64]>) -> CMatrix {
        let mut out = (anticommutator * rho + rho * anticommutator) * Complex64::new(-0.5, 0.0);
        for (p, piece) in self.pieces.iter().enumerate() {
            let s = scale.map_or(1.0, |s| s[p]);
            if s == 0.0 {
                continue;
            }
            out += &piece.op * rho * weighted[p].adjoint() * Complex64::new(s, 0.0);
        }
        out
    }

    fn linear_dissipator(&self, rho: &CMatrix) -> CMatrix {
        self.apply(rho, &self.weighted, &self.anticommutator, None)
    }

    /// The dissipator with Pauli factors ignored, i.e. the underlying
    /// linear equation.
    pub fn unblocked_dissipator(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_dim(rho)?;
        Ok(self.linear_dissipator(rho))
    }

    fn require(&self, kind: MasterEquation, blocked: bool) -> Result<()> {
        if self.options.kind != kind || self.options.pauli_blocked != blocked {
            return Err(Error::Unsupported(format!(
                "generator is {}{}, requested {}{}",
                self.options.kind,
                if self.options.pauli_blocked { " (blocked)" } else { "" },
                kind,
                if blocked { " (blocked)" } else { "" },
            )));
        }
        Ok(())
    }

    pub fn dissipator_rme(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.require(MasterEquation::Redfield, false)?;
        self.check_dim(rho)?;
        Ok(self.linear_dissipator(rho))
    }

    pub fn dissipator_ume(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.require(MasterEquation::Unified, false)?;
        self.check_dim(rho)?;
        Ok(self.linear_dissipator(rho))
    }

    pub fn dissipator_ule(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.require(MasterEquation::Universal, false)?;
        self.check_dim(rho)?;
        Ok(self.linear_dissipator(rho))
    }

    /// ULE dissipator through its single jump operator
    /// `L = Σ_p γ̂(ω_p) A_p`, blocked or not.
    pub fn dissipator_ule_jump(&self, rho: &CMatrix) -> Result<CMatrix> {
        if self.options.kind != MasterEquation::Universal {
            return Err(Error::Unsupported(format!(
                "jump-operator form exists only for ule, generator is {}",
                self.options.kind
            )));
        }
        self.check_dim(rho)?;
        let scale = if self.options.pauli_blocked {
            self.piece_scales(rho)?
        } else {
            vec![1.0; self.pieces.len()]
        };
        let d = self.dim();
        let mut jump = CMatrix::zeros(d, d);
        for (p, piece) in self.pieces.iter().enumerate() {
            let amp = (2.0 * PI * self.rates.sample(piece.omega)?.gamma_hat).sqrt();
            jump += &piece.op * Complex64::new(amp * scale[p], 0.0);
        }
        let jd = jump.adjoint();
        let ldl = &jd * &jump;
        Ok(&jump * rho * &jd - (&ldl * rho + rho * &ldl) * Complex64::new(0.5, 0.0))
    }

    /// Pauli-blocked dissipator: population-transfer pieces into subspace
    /// `i` carry `√f(ρ^{ii})` on each side.
    pub fn dissipator_blocked(&self, rho: &CMatrix) -> Result<CMatrix> {
        if !self.options.pauli_blocked {
            return Err(Error::Unsupported("generator is not Pauli-blocked".into()));
        }
        self.check_dim(rho)?;
        let scale = self.piece_scales(rho)?;
        let (weighted, anticommutator) = self.weighted_ops(&scale);
        Ok(self.apply(rho, &weighted, &anticommutator, Some(&scale)))
    }

    /// Whichever dissipator the options select.
    pub fn dissipator(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_dim(rho)?;
        if self.options.pauli_blocked {
            self.dissipator_blocked(rho)
        } else {
            Ok(self.linear_dissipator(rho))
        }
    }

    /// `−i[H_S + H_LS, ρ] + D(ρ)`.
    pub fn liouvillian_action(&self, rho: &CMatrix) -> Result<CMatrix> {
        let h = self.effective_hamiltonian();
        let mut out = self.dissipator(rho)?;
        out += commutator(&h, rho) * Complex64::new(0.0, -1.0);
        Ok(out)
    }

    /// Matrix of the linear generator on column-stacked `vec(ρ)`.
    pub fn superoperator_matrix(&self) -> Result<CMatrix> {
        if self.options.pauli_blocked {
            return Err(Error::Unsupported(
                "Pauli-blocked generators are nonlinear and have no superoperator matrix".into(),
            ));
        }
        let d = self.dim();
        let id = identity(d);
        let h = self.effective_hamiltonian();
        let minus_i = Complex64::new(0.0, -1.0);
        // vec(AXB) = (Bᵀ ⊗ A) vec(X)
        let mut l = (id.kronecker(&h) - h.transpose().kronecker(&id)) * minus_i;
        let half = Complex64::new(0.5, 0.0);
        l -= id.kronecker(&self.anticommutator) * half;
        l -= self.anticommutator.transpose().kronecker(&id) * half;
        for (p, piece) in self.pieces.iter().enumerate() {
            l += self.weighted[p].conjugate().kronecker(&piece.op);
        }
        Ok(l)
    }

    /// The expansion `Σ c_pq T_{ijlk}` term by term.
    pub fn t_tensor_terms(&self) -> Vec<TTensorTerm> {
        let mut out = Vec::new();
        for (p, a) in self.pieces.iter().enumerate() {
            for (q, b) in self.pieces.iter().enumerate() {
                let c = self.coefficients[(p, q)];
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                out.push(TTensorTerm {
                    i: a.target,
                    j: a.source,
                    l: b.target,
                    k: b.source,
                    left: p,
                    right: q,
                    coefficient: c,
                    blocked_by: if self.options.pauli_blocked && !a.is_dephasing() {
                        Some(a.target)
                    } else {
                        None
                    },
                });
            }
        }
        out
    }
}

/// Column-stacking `vec`.
pub fn vectorize(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &nalgebra::DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdm::{max_norm, real_diagonal};

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn three_level(kind: MasterEquation) -> GeneratorSpec {
        let h = SystemHamiltonian::from_energies(&[-0.5, 0.0, 0.5]).unwrap();
        let a = CouplingOperator::from_transitions("A", 3, &[(0, 1, one()), (1, 2, one())]).unwrap();
        let bath = BathModel::new(0.01, 50.0).unwrap();
        GeneratorSpec::build(&h, &[a], &bath, GeneratorOptions::new(kind, 1.0)).unwrap()
    }

    fn random_state(d: usize, seed: u64) -> CMatrix {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        hermitize(&CMatrix::from_fn(d, d, |_, _| Complex64::new(next(), next()))).unwrap()
    }

    #[test]
    fn parses_kind_names() {
        assert_eq!("ULE".parse::<MasterEquation>().unwrap(), MasterEquation::Universal);
        assert_eq!("redfield".parse::<MasterEquation>().unwrap(), MasterEquation::Redfield);
        assert!("gksl".parse::<MasterEquation>().is_err());
        assert_eq!(MasterEquation::Unified.to_string(), "ume");
    }

    #[test]
    fn diagonal_rates_agree_across_equations() {
        let r: Vec<f64> = MasterEquation::ALL
            .iter()
            .map(|&k| three_level(k).diagonal_rate(1))
            .collect();
        assert!((r[0] - r[1]).abs() < 1e-15 * r[0]);
        assert!((r[0] - r[2]).abs() < 1e-12 * r[0]);
        let bath = BathModel::new(0.01, 50.0).unwrap();
        assert!((r[0] - 2.0 * PI * bath.spectral_function_ule(0.5)).abs() < 1e-15);
    }

    #[test]
    fn dissipators_are_hermitian_and_traceless() {
        for kind in MasterEquation::ALL {
            let spec = three_level(kind);
            let rho = random_state(3, 7);
            let d = spec.dissipator(&rho).unwrap();
            assert!(max_norm(&(&d - d.adjoint())) < 1e-15);
            assert!(d.trace().norm() < 1e-15);
        }
    }

    #[test]
    fn ule_jump_form_matches_double_sum() {
        let spec = three_level(MasterEquation::Universal);
        let rho = random_state(3, 11);
        let a = spec.dissipator_ule(&rho).unwrap();
        let b = spec.dissipator_ule_jump(&rho).unwrap();
        assert!(max_norm(&(a - b)) < 1e-15);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let spec = three_level(MasterEquation::Redfield);
        let rho = identity(3);
        assert!(spec.dissipator_ule(&rho).is_err());
        assert!(spec.dissipator_blocked(&rho).is_err());
        assert!(spec.dissipator_rme(&identity(2)).is_err());
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let h = SystemHamiltonian::from_energies(&[-0.5, 0.0, 0.5]).unwrap();
        let a = CouplingOperator::new("0", CMatrix::zeros(3, 3)).unwrap();
        let bath = BathModel::new(0.01, 50.0).unwrap();
        for kind in MasterEquation::ALL {
            let opts = GeneratorOptions::new(kind, 1.0).lamb_shift(true);
            let spec = GeneratorSpec::build(&h, &[a.clone()], &bath, opts).unwrap();
            let rho = random_state(3, 3);
            assert_eq!(max_norm(&spec.dissipator(&rho).unwrap()), 0.0);
            assert_eq!(max_norm(spec.lamb_shift_hamiltonian()), 0.0);
        }
    }

    #[test]
    fn superoperator_matches_action() {
        for kind in MasterEquation::ALL {
            let spec = three_level(kind);
            let l = spec.superoperator_matrix().unwrap();
            let rho = random_state(3, 5);
            let direct = spec.liouvillian_action(&rho).unwrap();
            let via = unvectorize(&(&l * vectorize(&rho)), 3);
            assert!(max_norm(&(direct - via)) < 1e-15);
        }
    }

    #[test]
    fn blocked_generator_has_no_superoperator() {
        let spec = three_level(MasterEquation::Redfield);
        let blocked = spec.with_options(spec.options().blocked(true)).unwrap();
        assert!(matches!(blocked.superoperator_matrix(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn full_target_blocks_its_inflow() {
        let spec = three_level(MasterEquation::Universal);
        let spec = spec.with_options(spec.options().blocked(true)).unwrap();
        // ground level full: nothing may flow into it
        let rho = real_diagonal(&[1.0, 0.0, 0.0]);
        let d = spec.dissipator_blocked(&rho).unwrap();
        assert!(max_norm(&d) < 1e-18);
        let unphysical = real_diagonal(&[1.2, 0.0, 0.0]);
        assert!(matches!(
            spec.dissipator_blocked(&unphysical),
            Err(Error::Physicality { index: 0, .. })
        ));
    }

    #[test]
    fn empty_target_scales_by_chi() {
        // a single downhill transfer 1 → 0, uphill suppressed at T = 0
        let h = SystemHamiltonian::from_energies(&[0.0, 1.0]).unwrap();
        let a = CouplingOperator::from_transitions("A", 2, &[(0, 1, one())]).unwrap();
        let bath = BathModel::new(0.01, 0.0).unwrap();
        let chi = 2.0;
        let plain = GeneratorSpec::build(&h, &[a.clone()], &bath, GeneratorOptions::new(MasterEquation::Redfield, chi))
            .unwrap();
        let blocked = plain.with_options(plain.options().blocked(true)).unwrap();
        let rho = real_diagonal(&[0.0, 1.0]);
        let lin = plain.dissipator(&rho).unwrap();
        let blk = blocked.dissipator(&rho).unwrap();
        assert!(max_norm(&(blk - lin * Complex64::new(chi, 0.0))) < 1e-15);
    }

    #[test]
    fn blocked_maps_full_identity_to_zero() {
        for kind in MasterEquation::ALL {
            let spec = three_level(kind);
            let opts = spec.options().blocked(true).lamb_shift(true).threshold(0.2);
            let h = spec.hamiltonian().clone();
            let a = CouplingOperator::new("A", random_state(3, 9)).unwrap();
            let bath = BathModel::new(0.01, 300.0).unwrap();
            let blocked = GeneratorSpec::build(&h, &[a], &bath, opts).unwrap();
            let out = blocked.liouvillian_action(&identity(3)).unwrap();
            assert!(max_norm(&out) < 1e-14, "{kind}: {}", max_norm(&out));
        }
    }

    #[test]
    fn t_tensor_blocking_labels() {
        let spec = three_level(MasterEquation::Redfield);
        let blocked = spec.with_options(spec.options().blocked(true)).unwrap();
        let terms = blocked.t_tensor_terms();
        // uphill-uphill rates underflow to zero at 50 K
        assert_eq!(terms.len(), 12);
        for t in &terms {
            assert_eq!(t.blocked_by, Some(t.i));
            assert_ne!(t.i, t.j);
        }
        assert!(spec.t_tensor_terms().iter().all(|t| t.blocked_by.is_none()));
    }

    #[test]
    fn lamb_hamiltonians_are_hermitian_and_diagonal_for_ladder() {
        let h = SystemHamiltonian::from_energies(&[-0.5, 0.0, 0.5]).unwrap();
        let a = CouplingOperator::from_transitions("A", 3, &[(0, 1, one()), (1, 2, one())]).unwrap();
        let bath = BathModel::new(0.01, 50.0).unwrap();
        for kind in [MasterEquation::Unified, MasterEquation::Redfield] {
            let opts = GeneratorOptions::new(kind, 1.0).lamb_shift(true);
            let spec = GeneratorSpec::build(&h, &[a.clone()], &bath, opts).unwrap();
            let secular = spec.secular_truncation();
            let hl = secular.lamb_shift_hamiltonian();
            assert!(max_norm(&(hl - hl.adjoint())) < 1e-15);
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!(hl[(i, j)].norm() < 1e-15);
                    }
                }
            }
            assert!(max_norm(hl) > 0.0);
        }
        let opts = GeneratorOptions::new(MasterEquation::Universal, 1.0).lamb_shift(true);
        let spec = GeneratorSpec::build(&h, &[a], &bath, opts).unwrap();
        let hl = spec.lamb_shift_hamiltonian();
        assert!(max_norm(&(hl - hl.adjoint())) < 1e-15);
        assert!(max_norm(hl) > 0.0);
    }

    #[test]
    fn unified_secular_limit() {
        let rme = three_level(MasterEquation::Redfield).secular_truncation();
        let ume = three_level(MasterEquation::Unified);
        assert!(max_norm(&(rme.coefficients() - ume.coefficients())) < 1e-15);
        let l1 = rme.superoperator_matrix().unwrap();
        let l2 = ume.superoperator_matrix().unwrap();
        assert!(max_norm(&(l1 - l2)) < 1e-15);
    }

    #[test]
    fn symmetrized_rates_make_identity_stationary() {
        for kind in MasterEquation::ALL {
            let spec = three_level(kind);
            let sym = spec.with_rates(spec.rates().symmetrized()).unwrap();
            let out = sym.liouvillian_action(&identity(3)).unwrap();
            assert!(max_norm(&out) < 1e-15, "{kind}");
        }
    }

    #[test]
    fn slowest_rate_is_downhill() {
        let spec = three_level(MasterEquation::Universal);
        let bath = BathModel::new(0.01, 50.0).unwrap();
        let expected = 2.0 * PI * bath.spectral_function_ule(0.5);
        assert!((spec.slowest_rate().unwrap() - expected).abs() < 1e-15);
    }
}
