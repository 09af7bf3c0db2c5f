//! Time propagation of a 1-RDM under a generator, with optional
//! co-propagation of the hole matrix and a matrix-exponential oracle.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{unvectorize, vectorize, GeneratorSpec};
use crate::integrator::{self, StepControl, StepStats};
use crate::rdm::{hermitize, identity, max_norm, CMatrix, OneRdm};

/// Multiples of the slowest downhill relaxation time used when no end time
/// is given. Blocked dynamics approach saturation algebraically, so they get
/// a longer window.
pub const LINEAR_RELAXATION_TIMES: f64 = 20.0;
pub const BLOCKED_RELAXATION_TIMES: f64 = 100.0;

pub fn default_t_end(spec: &GeneratorSpec) -> Result<f64> {
    let rate = spec.slowest_rate().ok_or_else(|| {
        Error::Config("no downhill relaxation channel; t_end must be given explicitly".into())
    })?;
    let factor = if spec.is_blocked() {
        BLOCKED_RELAXATION_TIMES
    } else {
        LINEAR_RELAXATION_TIMES
    };
    Ok(factor / rate)
}

/// Evenly spaced output grid `0, t_end/n, …, t_end`.
pub fn uniform_times(t_end: f64, intervals: usize) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && t_end.is_finite()) || intervals == 0 {
        return Err(Error::InvalidParameter(format!(
            "need t_end > 0 and at least one interval (t_end {t_end}, intervals {intervals})"
        )));
    }
    Ok((0..=intervals)
        .map(|k| if k == intervals { t_end } else { t_end * k as f64 / intervals as f64 })
        .collect())
}

/// Output grid with a fixed spacing, always ending exactly at `t_end`.
pub fn strided_times(t_end: f64, stride: f64) -> Result<Vec<f64>> {
    if !(stride > 0.0 && stride.is_finite()) {
        return Err(Error::InvalidParameter(format!("output stride must be positive, got {stride}")));
    }
    let n = (t_end / stride).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|k| k as f64 * stride).collect();
    times.push(t_end);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end);
    uniform_check(&times)?;
    Ok(times)
}

fn uniform_check(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("output times must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<OneRdm>,
    /// Diagonal of ρ(t) in the eigenbasis of `H_S`, one entry per
    /// eigenvector, ascending energy.
    pub populations: Vec<Vec<f64>>,
    /// Directly evolved hole matrices, when requested.
    pub holes: Option<Vec<OneRdm>>,
    pub stats: StepStats,
}

impl Trajectory {
    /// `‖q(t) − (χ𝟙 − ρ(t))‖_max` per recorded time.
    pub fn hole_defects(&self) -> Option<Vec<f64>> {
        self.holes.as_ref().map(|holes| {
            holes
                .iter()
                .zip(&self.states)
                .map(|(q, rho)| max_norm(&(q.data() - rho.hole().data())))
                .collect()
        })
    }

    pub fn final_state(&self) -> &OneRdm {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().expect("trajectory is never empty")
    }

    /// Population of eigenvector `k` at every recorded time.
    pub fn population_series(&self, k: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[k]).collect()
    }
}

fn stack(rho: &CMatrix, q: &CMatrix) -> CMatrix {
    let d = rho.nrows();
    let mut out = CMatrix::zeros(d, 2 * d);
    out.columns_mut(0, d).copy_from(rho);
    out.columns_mut(d, d).copy_from(q);
    out
}

fn hermitize_blocks(y: &mut CMatrix) {
    let d = y.nrows();
    for b in 0..y.ncols() / d {
        let block = y.columns(b * d, d).into_owned();
        let h = hermitize(&block).expect("square block");
        y.columns_mut(b * d, d).copy_from(&h);
    }
}

/// Propagates `rho0` under `spec`, recording at `times` (the first of
/// which may be 0). With `hole` on, `q = χ𝟙 − ρ₀` is evolved alongside
/// under `dq/dt = 𝓛(χ𝟙) − 𝓛(χ𝟙 − q)`: the equation a hole matrix obeys
/// when `𝓛` maps `χ𝟙` to zero, and `dq/dt = 𝓛(q)` for any linear `𝓛`.
pub fn propagate(
    spec: &GeneratorSpec,
    rho0: &OneRdm,
    times: &[f64],
    ctl: StepControl,
    hole: bool,
) -> Result<Trajectory> {
    let d = spec.dim();
    if rho0.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            found: rho0.dim(),
        });
    }
    if times.is_empty() {
        return Err(Error::InvalidParameter("no output times".into()));
    }
    let chi = spec.chi();
    let full = identity(d) * Complex64::new(chi, 0.0);

    let (raw, stats) = if hole {
        let image_of_full = spec.liouvillian_action(&full)?;
        let y0 = stack(rho0.data(), rho0.hole().data());
        integrator::integrate(
            |_, y| {
                let rho = y.columns(0, d).into_owned();
                let q = y.columns(d, d).into_owned();
                let drho = spec.liouvillian_action(&rho)?;
                let dq = &image_of_full - spec.liouvillian_action(&(&full - q))?;
                Ok(stack(&drho, &dq))
            },
            y0,
            0.0,
            times,
            ctl,
            hermitize_blocks,
        )?
    } else {
        integrator::integrate(
            |_, y| spec.liouvillian_action(y),
            rho0.data().clone(),
            0.0,
            times,
            ctl,
            hermitize_blocks,
        )?
    };

    let mut states = Vec::with_capacity(raw.len());
    let mut holes = hole.then(|| Vec::with_capacity(raw.len()));
    for y in raw {
        let rho = y.columns(0, d).into_owned();
        states.push(OneRdm::new(rho, chi)?);
        if let Some(h) = holes.as_mut() {
            h.push(OneRdm::new(y.columns(d, d).into_owned(), chi)?);
        }
    }
    let populations = states.iter().map(|s| s.populations(spec.hamiltonian())).collect();
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        populations,
        holes,
        stats,
    })
}

/// Exact propagation of a linear generator: `vec ρ(t) = exp(𝓛t) vec ρ₀`,
/// reusing one propagator per distinct spacing of `times`.
pub fn propagate_expm(spec: &GeneratorSpec, rho0: &CMatrix, times: &[f64]) -> Result<Vec<CMatrix>> {
    let l = spec.superoperator_matrix()?;
    let d = spec.dim();
    let mut out = Vec::with_capacity(times.len());
    let mut v: DVector<Complex64> = vectorize(rho0);
    let mut t = 0.0;
    let mut cached: Option<(f64, CMatrix)> = None;
    for &target in times {
        let dt = target - t;
        if dt < 0.0 {
            return Err(Error::InvalidParameter("output times must be increasing".into()));
        }
        if dt > 0.0 {
            let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                cached = Some((dt, (&l * Complex64::new(dt, 0.0)).exp()));
            }
            v = &cached.as_ref().expect("propagator cached").1 * v;
        }
        t = target;
        out.push(unvectorize(&v, d));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    /// Largest eigenbasis-population difference over all recorded times.
    pub max_population_deviation: f64,
    /// Largest matrix-element difference over all recorded times.
    pub max_element_deviation: f64,
}

/// Compares an integrated trajectory with the matrix-exponential solution.
pub fn verify_against_expm(spec: &GeneratorSpec, traj: &Trajectory) -> Result<OracleComparison> {
    let exact = propagate_expm(spec, traj.states[0].data(), &traj.times)?;
    let v = spec.hamiltonian().eigenvectors();
    let mut pop_dev: f64 = 0.0;
    let mut elem_dev: f64 = 0.0;
    for (state, reference) in traj.states.iter().zip(&exact) {
        let diff = state.data() - reference;
        elem_dev = elem_dev.max(max_norm(&diff));
        let rotated = v.adjoint() * diff * v;
        for k in 0..spec.dim() {
            pop_dev = pop_dev.max(rotated[(k, k)].re.abs());
        }
    }
    Ok(OracleComparison {
        max_population_deviation: pop_dev,
        max_element_deviation: elem_dev,
    })
}

/// Stationary state of a linear generator with trace `n_electrons`, from
/// `𝓛 vec ρ = 0` with one row replaced by the trace condition.
pub fn steady_state(spec: &GeneratorSpec, n_electrons: f64) -> Result<CMatrix> {
    let d = spec.dim();
    let mut l = spec.superoperator_matrix()?;
    // the (0,0) row is a combination of the others: the trace functional
    // annihilates every column of a trace-preserving 𝓛
    l.row_mut(0).fill(Complex64::new(0.0, 0.0));
    for i in 0..d {
        l[(0, i * d + i)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(d * d);
    rhs[0] = Complex64::new(n_electrons, 0.0);
    let v = l
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Unsupported("stationary state is not unique".into()))?;
    hermitize(&unvectorize(&v, d))
}
