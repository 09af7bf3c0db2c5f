//! Dormand-Prince 5(4) with adaptive steps, for matrix-valued ODEs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rdm::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    /// Largest step allowed; unbounded when `None`.
    pub max_step: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            initial_step: None,
            max_step: None,
        }
    }
}

impl StepControl {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "integrator tolerances must be positive (rtol {}, atol {})",
                self.rtol, self.atol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(y: &CMatrix, h: f64, terms: &[(f64, &CMatrix)]) -> CMatrix {
    let mut out = y.clone();
    for &(c, k) in terms {
        if c != 0.0 {
            out += k * Complex64::new(h * c, 0.0);
        }
    }
    out
}

fn error_norm(err: &CMatrix, y0: &CMatrix, y1: &CMatrix, ctl: &StepControl) -> f64 {
    let mut worst: f64 = 0.0;
    for ((e, a), b) in err.iter().zip(y0.iter()).zip(y1.iter()) {
        let scale = ctl.atol + ctl.rtol * a.norm().max(b.norm());
        worst = worst.max(e.norm() / scale);
    }
    worst
}

/// Integrates `dy/dt = f(t, y)` from `t0` and returns the state at each of
/// `times` (ascending, all ≥ `t0`). Steps are truncated to land exactly on
/// every requested time. `post` runs on every accepted state, e.g. to
/// re-Hermitize.
pub fn integrate<F, P>(
    mut f: F,
    y0: CMatrix,
    t0: f64,
    times: &[f64],
    ctl: StepControl,
    mut post: P,
) -> Result<(Vec<CMatrix>, StepStats)>
where
    F: FnMut(f64, &CMatrix) -> Result<CMatrix>,
    P: FnMut(&mut CMatrix),
{
    ctl.validate()?;
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidParameter(
            "output times must be strictly increasing and not before the start".into(),
        ));
    }
    let mut stats = StepStats::default();
    let mut out = Vec::with_capacity(times.len());
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    stats.evaluations += 1;
    let mut h = match ctl.initial_step {
        Some(h) => h,
        None => initial_step(&y, &k1, &ctl, times.last().map_or(1.0, |&te| te - t0)),
    };

    for &target in times {
        while t < target {
            let remaining = target - t;
            let mut step = h.min(remaining);
            if let Some(hmax) = ctl.max_step {
                step = step.min(hmax);
            }
            // avoid leaving a sliver that would need its own tiny step
            if remaining - step < 1e-3 * step {
                step = remaining;
            }
            if step <= 1e-13 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h: step });
            }

            let k2 = f(t + C2 * step, &combo(&y, step, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * step, &combo(&y, step, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * step, &combo(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(
                t + C5 * step,
                &combo(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                t + step,
                &combo(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y_new = combo(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + step, &y_new)?;
            stats.evaluations += 6;

            let zero = CMatrix::zeros(y.nrows(), y.ncols());
            let err = combo(
                &zero,
                step,
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            );
            let norm = error_norm(&err, &y, &y_new, &ctl);
            if !norm.is_finite() {
                stats.rejected += 1;
                h = step * 0.2;
                continue;
            }
            let factor = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if norm <= 1.0 {
                stats.accepted += 1;
                let landed = step == remaining;
                t = if landed { target } else { t + step };
                y = y_new;
                post(&mut y);
                // post-processing moves the state slightly; re-evaluate
                // rather than reuse k7
                k1 = f(t, &y)?;
                stats.evaluations += 1;
                // a step shortened to hit a sample time says nothing about
                // the achievable step size
                if !(landed && step < h) {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn initial_step(y: &CMatrix, dy: &CMatrix, ctl: &StepControl, span: f64) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for (a, b) in y.iter().zip(dy.iter()) {
        let scale = ctl.atol + ctl.rtol * a.norm();
        d0 = d0.max(a.norm() / scale);
        d1 = d1.max(b.norm() / scale);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.abs().max(1e-12))
}
