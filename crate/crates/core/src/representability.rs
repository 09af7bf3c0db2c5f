//! N-representability diagnostics: the unitality constraint, hole
//! co-propagation and per-step spectral audits.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::generators::GeneratorSpec;
use crate::integrator::StepControl;
use crate::propagate::{self, Trajectory};
use crate::rdm::{commutator, hermiticity_defect, identity, max_norm, spectral_audit_with_tol, CMatrix, OneRdm};

/// A constraint residual below this counts as satisfied.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Eigenvalues may leave `[0, χ]` by this much before a trajectory audit
/// flags a violation.
pub const AUDIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ChannelConstraint {
    pub omega: f64,
    /// Diagonal rate γ(ω, ω) (or γ(ω̄), or |γ̂(ω)|²).
    pub rate: f64,
    /// `γ(ω) − γ(−ω)`; zero when `−ω` carries no channel.
    pub asymmetry: f64,
    /// `γ(ω) [A_ω, A_ω†]`.
    pub contribution: CMatrix,
}

#[derive(Debug, Clone)]
pub struct ConstraintReport {
    /// `Σ_ω γ(ω, ω) [A_ω, A_ω†]`, diagonal rates only.
    pub residual_matrix: CMatrix,
    pub residual_norm: f64,
    pub per_channel: Vec<ChannelConstraint>,
    /// `D(𝟙)` of the linear generator, including every cross term.
    pub direct_residual: CMatrix,
    pub direct_norm: f64,
    /// `‖D(𝟙) − residual_matrix‖_max`: what the cross terms add.
    pub cross_term_norm: f64,
    pub satisfied: bool,
}

impl ConstraintReport {
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "constraint_residual_norm = {:.6e}", self.residual_norm);
        let _ = writeln!(out, "direct_residual_norm = {:.6e}", self.direct_norm);
        let _ = writeln!(out, "cross_term_norm = {:.6e}", self.cross_term_norm);
        let _ = writeln!(out, "constraint_satisfied = {}", self.satisfied);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("# format: onerdm-constraint/1\nomega,rate,asymmetry,contribution_norm\n");
        for c in &self.per_channel {
            let _ = writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e}",
                c.omega,
                c.rate,
                c.asymmetry,
                max_norm(&c.contribution)
            );
        }
        out
    }
}

/// The unitality constraint of the linear generator underlying `spec`.
/// Blocked generators are reported through their unblocked rates; the
/// blocking itself always satisfies the constraint.
pub fn constraint_residual(spec: &GeneratorSpec) -> ConstraintReport {
    let d = spec.dim();
    let freqs = spec.frequencies();
    let mut residual = CMatrix::zeros(d, d);
    let mut per_channel = Vec::with_capacity(freqs.len());
    for (k, &omega) in freqs.iter().enumerate() {
        let a = spec.channel_operator(k);
        let rate = spec.diagonal_rate(k);
        let contribution = commutator(&a, &a.adjoint()) * Complex64::new(rate, 0.0);
        residual += &contribution;
        let mirror = freqs
            .iter()
            .position(|&w| (w + omega).abs() <= spec.hamiltonian().degeneracy_tol());
        let asymmetry = mirror.map_or(0.0, |m| rate - spec.diagonal_rate(m));
        per_channel.push(ChannelConstraint {
            omega,
            rate,
            asymmetry,
            contribution,
        });
    }
    let direct = spec
        .unblocked_dissipator(&identity(d))
        .expect("identity has the generator's dimension");
    let residual_norm = max_norm(&residual);
    ConstraintReport {
        cross_term_norm: max_norm(&(&direct - &residual)),
        direct_norm: max_norm(&direct),
        direct_residual: direct,
        residual_norm,
        residual_matrix: residual,
        per_channel,
        satisfied: residual_norm < CONSTRAINT_TOL,
    }
}

/// `‖𝓛(χ𝟙)‖_max`; zero exactly when the generator is unital.
pub fn unitality_residual(spec: &GeneratorSpec) -> Result<f64> {
    let full = identity(spec.dim()) * Complex64::new(spec.chi(), 0.0);
    Ok(max_norm(&spec.liouvillian_action(&full)?))
}

#[derive(Debug, Clone)]
pub struct HoleTrajectory {
    pub times: Vec<f64>,
    pub holes: Vec<OneRdm>,
    /// `‖q(t) − (χ𝟙 − ρ(t))‖_max`.
    pub defects: Vec<f64>,
}

impl HoleTrajectory {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().copied().fold(0.0, f64::max)
    }
}

/// Evolves the hole matrix `q₀ = χ𝟙 − ρ₀` directly alongside `ρ` and
/// records how far it drifts from the complement of `ρ(t)`.
pub fn copropagate_hole(
    spec: &GeneratorSpec,
    rho0: &OneRdm,
    times: &[f64],
    ctl: StepControl,
) -> Result<(Trajectory, HoleTrajectory)> {
    let traj = propagate::propagate(spec, rho0, times, ctl, true)?;
    let defects = traj.hole_defects().expect("hole requested");
    let holes = traj.holes.clone().expect("hole requested");
    let hole = HoleTrajectory {
        times: traj.times.clone(),
        holes,
        defects,
    };
    Ok((traj, hole))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditSummary {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_trace_drift: f64,
    pub max_hermiticity_defect: f64,
    pub first_violation_time: Option<f64>,
    pub violation: bool,
    pub max_hole_defect: Option<f64>,
    pub tolerance: f64,
}

impl AuditSummary {
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "min_eigenvalue = {:.12e}", self.min_eigenvalue);
        let _ = writeln!(out, "max_eigenvalue = {:.12e}", self.max_eigenvalue);
        let _ = writeln!(out, "max_trace_drift = {:.6e}", self.max_trace_drift);
        let _ = writeln!(out, "max_hermiticity_defect = {:.6e}", self.max_hermiticity_defect);
        let _ = writeln!(out, "violation = {}", self.violation);
        match self.first_violation_time {
            Some(t) => {
                let _ = writeln!(out, "first_violation_time = {t:.6e}");
            }
            None => {
                let _ = writeln!(out, "first_violation_time = none");
            }
        }
        if let Some(h) = self.max_hole_defect {
            let _ = writeln!(out, "max_hole_defect = {h:.6e}");
        }
        out
    }
}

pub fn audit_trajectory(traj: &Trajectory) -> AuditSummary {
    audit_trajectory_with_tol(traj, AUDIT_TOL)
}

pub fn audit_trajectory_with_tol(traj: &Trajectory, tol: f64) -> AuditSummary {
    let trace0 = traj.states[0].trace();
    let mut summary = AuditSummary {
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
        max_trace_drift: 0.0,
        max_hermiticity_defect: 0.0,
        first_violation_time: None,
        violation: false,
        max_hole_defect: traj
            .hole_defects()
            .map(|d| d.into_iter().fold(0.0, f64::max)),
        tolerance: tol,
    };
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let report = spectral_audit_with_tol(state, tol);
        summary.min_eigenvalue = summary.min_eigenvalue.min(report.min_eigenvalue);
        summary.max_eigenvalue = summary.max_eigenvalue.max(report.max_eigenvalue);
        summary.max_trace_drift = summary.max_trace_drift.max((state.trace() - trace0).abs());
        summary.max_hermiticity_defect = summary.max_hermiticity_defect.max(hermiticity_defect(state.data()));
        if report.violation && summary.first_violation_time.is_none() {
            summary.first_violation_time = Some(*t);
            summary.violation = true;
        }
    }
    summary
}
