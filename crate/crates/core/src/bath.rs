//! Bosonic bath with a Drude-Lorentz spectral density.
//!
//! Two spectral functions are provided. The full Fourier transform of the
//! bath autocorrelation function, `Γ̂(ω)`, feeds the universal Lindblad
//! equation. The one-sided transform `Γ(ω) = π Γ̂(ω) + i ξ(ω)` feeds the
//! Redfield and unified equations, where `ξ` is a principal-value integral.
//! All energies are in Hartree, temperatures in Kelvin, and ħ = 1.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};

/// Boltzmann constant in Eh/K (CODATA 2018).
pub const BOLTZMANN_EH_PER_K: f64 = 3.166_811_563e-6;

/// Default number of log-spaced panels for the principal-value quadratures.
pub const DEFAULT_PV_POINTS: usize = 48;

/// Maximum relative change tolerated between two quadrature refinements.
const REFINEMENT_TOL: f64 = 1e-6;

/// `J(ω) = ω λ² / (ω² + λ²)`.
pub fn drude_lorentz(omega: f64, lambda: f64) -> f64 {
    omega * lambda * lambda / (omega * omega + lambda * lambda)
}

/// Mean boson number `1 / (exp(ω / k_B T) − 1)`. Underflows to zero for
/// `ω ≫ k_B T`; zero at `T = 0`.
pub fn bose_einstein(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "Bose-Einstein occupancy needs omega > 0, got {omega}"
        )));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be non-negative, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / (BOLTZMANN_EH_PER_K * temperature)).exp_m1())
}

/// One evaluation of the bath spectral functions at a frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSample {
    pub omega: f64,
    /// `Γ̂(ω)`, the full-transform spectral function. Non-negative.
    pub gamma_hat: f64,
    /// `Im Γ(ω)`, the principal-value part of the one-sided transform.
    pub lamb_shift: f64,
}

impl SpectralSample {
    /// One-sided transform `Γ(ω) = π Γ̂(ω) + i ξ(ω)`.
    pub fn redfield(&self) -> Complex64 {
        Complex64::new(PI * self.gamma_hat, self.lamb_shift)
    }

    /// ULE jump amplitude `√(2π Γ̂(ω))`.
    pub fn ule_rate(&self) -> f64 {
        (2.0 * PI * self.gamma_hat).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathModel {
    lambda: f64,
    temperature: f64,
    pv_cutoff: Option<f64>,
    pv_points: usize,
}

impl BathModel {
    pub fn new(lambda: f64, temperature: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Drude-Lorentz width must be positive, got {lambda}"
            )));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be non-negative, got {temperature}"
            )));
        }
        Ok(Self {
            lambda,
            temperature,
            pv_cutoff: None,
            pv_points: DEFAULT_PV_POINTS,
        })
    }

    /// Fixes the upper limit of the principal-value quadratures. When unset
    /// the cutoff is `100 · max(λ, |ω|)` for each evaluation.
    pub fn with_pv_cutoff(mut self, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "principal-value cutoff must be positive, got {cutoff}"
            )));
        }
        self.pv_cutoff = Some(cutoff);
        Ok(self)
    }

    pub fn with_pv_points(mut self, points: usize) -> Result<Self> {
        if points < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 quadrature panels, got {points}"
            )));
        }
        self.pv_points = points;
        Ok(self)
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        let mut out = Self::new(self.lambda, temperature)?;
        out.pv_cutoff = self.pv_cutoff;
        out.pv_points = self.pv_points;
        Ok(out)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn pv_cutoff(&self) -> Option<f64> {
        self.pv_cutoff
    }

    pub fn pv_points(&self) -> usize {
        self.pv_points
    }

    /// `k_B T` in Hartree.
    pub fn thermal_energy(&self) -> f64 {
        BOLTZMANN_EH_PER_K * self.temperature
    }

    pub fn spectral_density(&self, omega: f64) -> f64 {
        drude_lorentz(omega, self.lambda)
    }

    fn reduced_frequency(&self, omega: f64) -> f64 {
        if self.temperature == 0.0 {
            f64::INFINITY
        } else {
            omega / self.thermal_energy()
        }
    }

    /// `J(ω) N(ω)` for `ω ≥ 0`, continuous at zero.
    fn absorption_weight(&self, omega: f64) -> f64 {
        if self.temperature == 0.0 {
            return 0.0;
        }
        if omega == 0.0 {
            return self.thermal_energy();
        }
        self.spectral_density(omega) / self.reduced_frequency(omega).exp_m1()
    }

    /// `J(ω) (N(ω) + 1)` for `ω ≥ 0`, continuous at zero.
    fn emission_weight(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return self.thermal_energy();
        }
        self.spectral_density(omega) / -(-self.reduced_frequency(omega)).exp_m1()
    }

    /// Full-transform spectral function `Γ̂(ω)`: `J(ω)(N(ω)+1)` above zero,
    /// `J(−ω)N(−ω)` below, and the common limit `k_B T` at zero.
    pub fn spectral_function_ule(&self, omega: f64) -> f64 {
        if omega >= 0.0 {
            self.emission_weight(omega)
        } else {
            self.absorption_weight(-omega)
        }
    }

    /// `ln Γ̂(ω)`, finite even where `Γ̂` itself underflows.
    pub fn log_spectral_function_ule(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return self.thermal_energy().ln();
        }
        let w = omega.abs();
        let x = self.reduced_frequency(w);
        let log_j = self.spectral_density(w).ln();
        if omega > 0.0 {
            log_j - (-(-x).exp_m1()).ln()
        } else if x.is_infinite() {
            f64::NEG_INFINITY
        } else if x > 30.0 {
            // ln(e^x − 1) = x + ln(1 − e^{−x})
            log_j - (x + (-(-x).exp()).ln_1p())
        } else {
            log_j - x.exp_m1().ln()
        }
    }

    /// ULE jump amplitude `γ̂(ω) = √(2π Γ̂(ω))`.
    pub fn ule_rate(&self, omega: f64) -> f64 {
        let g = self.spectral_function_ule(omega);
        debug_assert!(g >= 0.0, "negative spectral function {g} at {omega}");
        (2.0 * PI * g).sqrt()
    }

    fn cutoff_for(&self, scale: f64) -> Result<f64> {
        let reference = self.lambda.max(scale);
        match self.pv_cutoff {
            None => Ok(100.0 * reference),
            Some(c) if c >= 50.0 * reference => Ok(c),
            Some(c) => Err(Error::InvalidParameter(format!(
                "principal-value cutoff {c} is below 50 x max(lambda, |omega|) = {}",
                50.0 * reference
            ))),
        }
    }

    /// Log-spaced panel edges over `(0, cutoff]`, refined geometrically
    /// around each feature point.
    fn panel_breaks(&self, cutoff: f64, features: &[(f64, f64)], points: usize) -> Vec<f64> {
        let lo = 1e-4 * self.lambda;
        let ratio = (cutoff / lo).powf(1.0 / points as f64);
        let mut breaks = vec![0.0, cutoff];
        let mut x = lo;
        while x < cutoff {
            breaks.push(x);
            x *= ratio;
        }
        for &(center, width) in features {
            let mut step = width;
            while step < cutoff {
                for p in [center - step, center + step] {
                    if p > 0.0 && p < cutoff {
                        breaks.push(p);
                    }
                }
                step *= 2.0;
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
    }

    fn refined<F: Fn(usize) -> Result<f64>>(&self, what: &str, eval: F) -> Result<f64> {
        let coarse = eval(self.pv_points)?;
        let fine = eval(2 * self.pv_points)?;
        let scale = fine.abs().max(coarse.abs());
        if (fine - coarse).abs() > REFINEMENT_TOL * scale && (fine - coarse).abs() > 1e-300 {
            return Err(Error::Quadrature(format!(
                "{what}: refinement changed the result from {coarse:e} to {fine:e}"
            )));
        }
        Ok(fine)
    }

    /// Real coefficient `ξ_im` with `ξ = i ξ_im`:
    ///
    /// `𝒫∫₀^∞ dω J(ω) [N(ω)/(ω₀+ω) + (N(ω)+1)/(ω₀−ω)]`.
    ///
    /// The pole at `ω = |ω₀|` is excised symmetrically; inside the window the
    /// odd part of the integrand is removed by subtracting its residue. The
    /// tail beyond the cutoff is approximated by `−λ²/cutoff`.
    pub fn xi_integral(&self, omega0: f64) -> Result<f64> {
        self.refined("xi integral", |points| self.xi_integral_at(omega0, points))
    }

    /// `xi_integral` at a fixed panel count, without the refinement check.
    pub fn xi_integral_at(&self, omega0: f64, points: usize) -> Result<f64> {
        let cutoff = self.cutoff_for(omega0.abs())?;
        let opts = QuadOptions::default();
        let lam2 = self.lambda * self.lambda;
        let tail = -lam2 / cutoff;
        let thermal = self.thermal_energy().max(1e-3 * self.lambda);

        if omega0 == 0.0 {
            // N/ω − (N+1)/ω = −1/ω
            let breaks = self.panel_breaks(cutoff, &[(0.0, self.lambda)], points);
            let r = quadrature::integrate(|w| -lam2 / (w * w + lam2), &breaks, opts);
            if !r.converged {
                return Err(Error::Quadrature(format!("xi at omega0 = 0: error {:e}", r.error)));
            }
            return Ok(r.value + tail);
        }

        let s = omega0.abs();
        let integrand = |w: f64| {
            self.absorption_weight(w) / (omega0 + w) + self.emission_weight(w) / (omega0 - w)
        };
        // regular factor g with integrand = g(ω) / (ω − s)
        let regular = |w: f64| {
            if omega0 > 0.0 {
                self.absorption_weight(w) * (w - s) / (omega0 + w) - self.emission_weight(w)
            } else {
                self.absorption_weight(w) + self.emission_weight(w) * (w - s) / (omega0 - w)
            }
        };
        let delta = (1e-4 * self.lambda.max(s)).min(0.5 * s);
        let features = [(s, delta), (0.0, thermal.min(self.lambda))];
        let breaks = self.panel_breaks(cutoff, &features, points);

        let lower: Vec<f64> = breaks.iter().copied().filter(|&b| b < s - delta).chain([s - delta]).collect();
        let upper: Vec<f64> = [s + delta]
            .into_iter()
            .chain(breaks.iter().copied().filter(|&b| b > s + delta))
            .collect();

        let g0 = regular(s);
        let window = quadrature::integrate(
            |w| {
                let dw = w - s;
                if dw == 0.0 {
                    0.0
                } else {
                    (regular(w) - g0) / dw
                }
            },
            &[s - delta, s, s + delta],
            opts,
        );
        let left = quadrature::integrate(integrand, &lower, opts);
        let right = quadrature::integrate(integrand, &upper, opts);
        for (name, r) in [("window", &window), ("lower", &left), ("upper", &right)] {
            if !r.converged {
                return Err(Error::Quadrature(format!(
                    "xi at omega0 = {omega0}: {name} segment error {:e}",
                    r.error
                )));
            }
        }
        Ok(left.value + window.value + right.value + tail)
    }

    /// One-sided spectral function `Γ(ω₀) = π Γ̂(ω₀) + i ξ(ω₀)`.
    pub fn spectral_function_redfield(&self, omega0: f64) -> Result<Complex64> {
        Ok(Complex64::new(
            PI * self.spectral_function_ule(omega0),
            self.xi_integral(omega0)?,
        ))
    }

    /// Samples the spectral functions. Without the Lamb shift the
    /// principal-value integral is skipped and reported as zero.
    pub fn sample(&self, omega: f64, with_lamb_shift: bool) -> Result<SpectralSample> {
        let lamb_shift = if with_lamb_shift {
            self.xi_integral(omega)?
        } else {
            0.0
        };
        Ok(SpectralSample {
            omega,
            gamma_hat: self.spectral_function_ule(omega),
            lamb_shift,
        })
    }

    /// Redfield rate `γ(ω, ω′) = Γ(ω) + Γ*(ω′)`.
    pub fn rme_rates(&self, omega: f64, omega_prime: f64) -> Result<Complex64> {
        Ok(self.spectral_function_redfield(omega)? + self.spectral_function_redfield(omega_prime)?.conj())
    }

    /// Redfield Lamb coefficient `S(ω, ω′) = (Γ(ω) − Γ*(ω′)) / 2i`.
    pub fn rme_lamb(&self, omega: f64, omega_prime: f64) -> Result<Complex64> {
        let diff =
            self.spectral_function_redfield(omega)? - self.spectral_function_redfield(omega_prime)?.conj();
        Ok(diff / Complex64::new(0.0, 2.0))
    }

    /// ULE Lamb coefficient
    /// `Ŝ(a, b) = −2π 𝒫∫ dω ω⁻¹ √(Γ̂(ω − a) Γ̂(ω + b))`.
    ///
    /// The pole at zero is removed exactly by folding the negative half-line
    /// onto the positive one. The tail beyond the cutoff is approximated by
    /// `λ²/cutoff`.
    pub fn ule_lamb_coefficient(&self, omega_ml: f64, omega_ln: f64) -> Result<f64> {
        self.refined("ULE Lamb coefficient", |points| {
            self.ule_lamb_coefficient_at(omega_ml, omega_ln, points)
        })
    }

    pub fn ule_lamb_coefficient_at(&self, omega_ml: f64, omega_ln: f64, points: usize) -> Result<f64> {
        let cutoff = self.cutoff_for(omega_ml.abs().max(omega_ln.abs()))?;
        let q = |w: f64| {
            (self.spectral_function_ule(w - omega_ml) * self.spectral_function_ule(w + omega_ln)).sqrt()
        };
        let width = self.thermal_energy().max(1e-3 * self.lambda).min(self.lambda);
        let features = [
            (omega_ml.abs(), width),
            (omega_ln.abs(), width),
            (0.0, width),
        ];
        let breaks = self.panel_breaks(cutoff, &features, points);
        let r = quadrature::integrate(|w| (q(w) - q(-w)) / w, &breaks, QuadOptions::default());
        if !r.converged {
            return Err(Error::Quadrature(format!(
                "ULE Lamb coefficient ({omega_ml}, {omega_ln}): error {:e}",
                r.error
            )));
        }
        let tail = self.lambda * self.lambda / cutoff;
        Ok(-2.0 * PI * (r.value + tail))
    }
}
