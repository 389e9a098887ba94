//! Exact integration of quadratic Hamiltonians `½ pᵀMp + ½ qᵀKq` through
//! modified kick–move–kick coefficients on the normal modes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::{check_dim, MassMatrix, PhasePoint};

/// Distance (in `ωτ`) from a pole of `tan(ωτ/2)` that counts as resonant.
pub const RESONANCE_GUARD: f64 = 1e-8;

/// Splitting convention the modified coefficients are built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Half kick, full move, half kick.
    Kmk,
    /// Half move, full kick, half move.
    Mkm,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn tanc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tan() / x
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

fn tanhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tanh() / x
    }
}

fn check_resonance(theta: f64) -> Result<()> {
    // Poles of tan(θ/2) sit at odd multiples of π.
    let k = ((theta.abs() / PI - 1.0) / 2.0).round().max(0.0);
    let pole = (2.0 * k + 1.0) * PI;
    if (theta.abs() - pole).abs() < RESONANCE_GUARD {
        Err(Error::ResonantStep(theta))
    } else {
        Ok(())
    }
}

/// Modified move and kick coefficients `(m, k)` that make one splitting step
/// of `½ m p² + ½ k q²` reproduce the exact flow of `½ p² + ½ ω² q²` over `τ`.
///
/// Kick–move–kick: `m = sin ωτ/(ωτ)`, `k = (2ω/τ) tan(ωτ/2)`.
/// Move–kick–move: `m = tan(ωτ/2)/(ωτ/2)`, `k = ω sin ωτ/τ`.
pub fn harmonic_modified_coeffs(tau: f64, omega: f64, convention: Convention) -> Result<(f64, f64)> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidTimestep(tau));
    }
    modified_coeffs(omega * omega, tau, convention)
}

/// Same as [`harmonic_modified_coeffs`] but parametrised by the mode
/// eigenvalue `λ = ω²`; negative `λ` gives the hyperbolic continuation.
pub(crate) fn modified_coeffs(lambda: f64, tau: f64, convention: Convention) -> Result<(f64, f64)> {
    let (motion, spring) = if lambda >= 0.0 {
        let theta = lambda.sqrt() * tau;
        check_resonance(theta)?;
        (sinc(theta), lambda * tanc(theta / 2.0))
    } else {
        let theta = (-lambda).sqrt() * tau;
        (sinhc(theta), lambda * tanhc(theta / 2.0))
    };
    Ok(match convention {
        Convention::Kmk => (motion, spring),
        Convention::Mkm => {
            // Swap the roles: m̄ takes the tan form, k̄ the sin form.
            let ratio = if lambda == 0.0 { 1.0 } else { spring / lambda };
            (ratio, lambda * motion)
        }
    })
}

/// Simultaneous diagonalisation of `(M, K)`: with `M = LLᵀ` and
/// `LᵀKL = U Λ Uᵀ`, the coordinates `z = UᵀL⁻¹q`, `π = UᵀLᵀp` decouple into
/// unit-mass oscillators with `ω_j² = Λ_j`.
#[derive(Debug, Clone)]
pub struct NormalModes {
    eigenvalues: DVector<f64>,
    to_z: DMatrix<f64>,
    to_pi: DMatrix<f64>,
    from_z: DMatrix<f64>,
    from_pi: DMatrix<f64>,
}

impl NormalModes {
    pub fn new(mass: &MassMatrix, stiffness: &DMatrix<f64>) -> Result<Self> {
        let n = mass.dim();
        if stiffness.nrows() != n || stiffness.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: stiffness.nrows(),
            });
        }
        let chol = mass.matrix().clone().cholesky().ok_or(Error::DegenerateMass)?;
        let l = chol.l();
        let l_inv = l.clone().try_inverse().ok_or(Error::DegenerateMass)?;
        let a = l.transpose() * stiffness * &l;
        let a = (&a + a.transpose()) * 0.5;
        let eig = a.symmetric_eigen();
        let u = eig.eigenvectors;
        Ok(NormalModes {
            eigenvalues: eig.eigenvalues,
            to_z: u.transpose() * &l_inv,
            to_pi: u.transpose() * l.transpose(),
            from_z: &l * &u,
            from_pi: l_inv.transpose() * &u,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Squared mode frequencies.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Mode coordinates `(z, π)` of a phase point.
    pub fn to_modes(&self, x: &PhasePoint) -> (DVector<f64>, DVector<f64>) {
        (&self.to_z * &x.q, &self.to_pi * &x.p)
    }

    pub fn from_modes(&self, z: &DVector<f64>, pi: &DVector<f64>) -> PhasePoint {
        PhasePoint {
            q: &self.from_z * z,
            p: &self.from_pi * pi,
        }
    }

    /// Per-mode kick–move–kick coefficients for step `τ`.
    pub fn coefficients(&self, tau: f64) -> Result<Vec<(f64, f64)>> {
        self.eigenvalues
            .iter()
            .map(|&lambda| modified_coeffs(lambda, tau, Convention::Kmk))
            .collect()
    }

    /// One exact step given precomputed coefficients.
    pub fn step_with(&self, x: &PhasePoint, tau: f64, coeffs: &[(f64, f64)]) -> PhasePoint {
        let (mut z, mut pi) = self.to_modes(x);
        for (j, &(m, k)) in coeffs.iter().enumerate() {
            kmk_mode(&mut z[j], &mut pi[j], m, k, tau);
        }
        self.from_modes(&z, &pi)
    }
}

/// Kick–move–kick on one unit-mass mode with modified coefficients.
pub(crate) fn kmk_mode(z: &mut f64, pi: &mut f64, m: f64, k: f64, tau: f64) {
    *pi -= 0.5 * tau * k * *z;
    *z += tau * m * *pi;
    *pi -= 0.5 * tau * k * *z;
}

/// One step of the exact integrator for `½ pᵀMp + ½ qᵀKq`.
pub fn exact_quadratic_step(x: &PhasePoint, tau: f64, mass: &MassMatrix, stiffness: &DMatrix<f64>) -> Result<PhasePoint> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidTimestep(tau));
    }
    check_dim(mass.dim(), x.dim())?;
    let modes = NormalModes::new(mass, stiffness)?;
    let coeffs = modes.coefficients(tau)?;
    Ok(modes.step_with(x, tau, &coeffs))
}
