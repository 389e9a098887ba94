//! Oracles and measurements: reference solutions, energy traces, order
//! estimation, symplecticity defects and period estimates.

mod crossings;
mod trace;

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::hamiltonian::{hamiltonian, MassMatrix, PhasePoint, Potential};
use crate::integrators::{Integrator, SchemeConfig, Variant};
use crate::{Error, Result};

pub use crossings::{crossings, period_estimate, Crossing, CrossingTracker};
pub use trace::{
    collapse_ratio, energy_error_trace, energy_window_maxima, window_trace, CollapseReport, EnergyTrace,
    HalfPeriodWindow, WindowTrace,
};

/// Period of `H = p²/2 + q⁴/4` at `H = 1/2`, i.e. `2^{1/4} B(1/4, 1/2)`.
///
/// Uses `B(1/4, 1/2) = 2π / agm(1, √2)`.
pub fn quartic_period() -> f64 {
    let (mut a, mut b) = (1.0_f64, 2.0_f64.sqrt());
    while (a - b).abs() > 4.0 * f64::EPSILON * a {
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    2.0_f64.powf(0.25) * 2.0 * PI / (0.5 * (a + b))
}

const REFERENCE_TOL: f64 = 1e-13;
const REFERENCE_START_TAU: f64 = 0.05;
const REFERENCE_MAX_STEPS: usize = 1 << 26;

/// State at `t_final` from the order-8 scheme, halving the step until two
/// successive results agree to `1e-13` (relative to the state size).
pub fn reference_solution(x0: &PhasePoint, potential: &dyn Potential, mass: &MassMatrix, t_final: f64) -> Result<PhasePoint> {
    reference_solution_with_order(x0, potential, mass, t_final, 8)
}

/// [`reference_solution`] with a chosen corrected order.
pub fn reference_solution_with_order(
    x0: &PhasePoint,
    potential: &dyn Potential,
    mass: &MassMatrix,
    t_final: f64,
    order: usize,
) -> Result<PhasePoint> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidInput(format!("t_final must be non-negative, got {t_final}")));
    }
    if t_final == 0.0 {
        return Ok(x0.clone());
    }
    let run = |n: usize| -> Result<PhasePoint> {
        let cfg = SchemeConfig::corrected(order, t_final / n as f64)?;
        Integrator::new(cfg, potential, mass)?.integrate_fused(x0, n)
    };
    let mut n = (t_final / REFERENCE_START_TAU).ceil().max(1.0) as usize;
    let mut prev = run(n)?;
    let mut diff = f64::INFINITY;
    while 2 * n <= REFERENCE_MAX_STEPS {
        n *= 2;
        let next = run(n)?;
        diff = next.max_distance(&prev);
        if diff <= REFERENCE_TOL * next.max_norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::RefinementFailed(diff))
}

/// Result of a two-step convergence-order measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderReport {
    pub tau_coarse: f64,
    pub tau_fine: f64,
    /// Phase-space max-norm error at the final time.
    pub error_coarse: f64,
    pub error_fine: f64,
    pub measured_order: f64,
    /// Max `|H − H₀|` over the run.
    pub energy_error_coarse: f64,
    pub energy_error_fine: f64,
    pub energy_order: f64,
}

/// Measures the global order of `variant` against [`reference_solution`].
///
/// Step counts are `round(T/τ)`, so the effective timesteps are
/// `T / round(T/τ)`; those are what the report holds.
pub fn measure_convergence_order(
    variant: Variant,
    potential: &dyn Potential,
    mass: &MassMatrix,
    x0: &PhasePoint,
    t_final: f64,
    tau_pair: (f64, f64),
) -> Result<OrderReport> {
    let (coarse, fine) = tau_pair;
    if !(coarse > fine && fine > 0.0) || !(t_final > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need tau_coarse > tau_fine > 0 and T > 0, got ({coarse}, {fine}), T={t_final}"
        )));
    }
    let reference = reference_solution(x0, potential, mass, t_final)?;
    let h0 = hamiltonian(x0, potential, mass)?;
    let run = |tau: f64| -> Result<(f64, f64, f64)> {
        let n = (t_final / tau).round().max(1.0) as usize;
        let tau_eff = t_final / n as f64;
        let cfg = SchemeConfig::new(variant, tau_eff)?;
        let mut energy: f64 = 0.0;
        let end = Integrator::new(cfg, potential, mass)?.integrate(x0, n, |r| {
            if let Ok(h) = hamiltonian(r.state, potential, mass) {
                energy = energy.max((h - h0).abs());
            }
        })?;
        Ok((tau_eff, end.max_distance(&reference), energy))
    };
    let (tau_coarse, error_coarse, energy_error_coarse) = run(coarse)?;
    let (tau_fine, error_fine, energy_error_fine) = run(fine)?;
    let floor = 100.0 * f64::EPSILON * reference.max_norm().max(1.0);
    if error_fine < floor {
        return Err(Error::OrderUnmeasurable(error_fine));
    }
    let ratio = (tau_coarse / tau_fine).ln();
    Ok(OrderReport {
        tau_coarse,
        tau_fine,
        error_coarse,
        error_fine,
        measured_order: (error_coarse / error_fine).ln() / ratio,
        energy_error_coarse,
        energy_error_fine,
        energy_order: (energy_error_coarse / energy_error_fine).ln() / ratio,
    })
}

const JACOBIAN_STEP: f64 = 1e-6;

/// `‖JᵀΩJ − Ω‖_max` for the one-step map at `x`, with `J` from central
/// differences of step `1e-6`.
pub fn symplecticity_defect(cfg: &SchemeConfig, potential: &dyn Potential, mass: &MassMatrix, x: &PhasePoint) -> Result<f64> {
    let integ = Integrator::new(*cfg, potential, mass)?;
    let n = x.dim();
    let flat = x.to_vec();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let mut plus = flat.clone();
        let mut minus = flat.clone();
        plus[j] += JACOBIAN_STEP;
        minus[j] -= JACOBIAN_STEP;
        let a = integ.step(&PhasePoint::from_flat(&plus))?.0.to_vec();
        let b = integ.step(&PhasePoint::from_flat(&minus))?.0.to_vec();
        let width = plus[j] - minus[j];
        for i in 0..2 * n {
            jac[(i, j)] = (a[i] - b[i]) / width;
        }
    }
    let omega = symplectic_form(n);
    let defect = jac.transpose() * &omega * &jac - omega;
    Ok(defect.amax())
}

fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    omega
}

#[cfg(test)]
mod tests;

const FLOW_SUBSTEPS: usize = 256;

/// Flow of `T_eff` (the corrected kinetic piece at step `tau`) for time
/// `tau`, by classical RK4 with fixed substeps. Only used as an oracle for
/// the implicit move.
pub fn t_eff_flow(x: &PhasePoint, potential: &dyn Potential, mass: &MassMatrix, tau: f64, order: usize) -> Result<PhasePoint> {
    let n = x.dim();
    let rhs = |y: &[f64]| -> Result<Vec<f64>> {
        let s = PhasePoint::from_flat(y);
        let (gq, gp) = crate::operators::grad_t_eff(potential, mass, &s.q, &s.p, tau, order)?;
        Ok(gp.iter().copied().chain(gq.iter().map(|g| -g)).collect())
    };
    let h = tau / FLOW_SUBSTEPS as f64;
    let mut y = x.to_vec();
    // Kahan compensation: the increments are tiny next to y.
    let mut carry = vec![0.0; 2 * n];
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(u, v)| u + a * v).collect() };
    for _ in 0..FLOW_SUBSTEPS {
        let k1 = rhs(&y)?;
        let k2 = rhs(&axpy(&y, &k1, 0.5 * h))?;
        let k3 = rhs(&axpy(&y, &k2, 0.5 * h))?;
        let k4 = rhs(&axpy(&y, &k3, h))?;
        for i in 0..2 * n {
            let inc = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - carry[i];
            let sum = y[i] + inc;
            carry[i] = (sum - y[i]) - inc;
            y[i] = sum;
        }
    }
    Ok(PhasePoint::from_flat(&y))
}

/// Max-norm distance between the implicit move and the flow of `T_eff`.
pub fn move_local_error(x: &PhasePoint, potential: &dyn Potential, mass: &MassMatrix, tau: f64, order: usize) -> Result<f64> {
    let settings = crate::integrators::NewtonSettings::default();
    let (moved, _) = crate::integrators::move_generating(x, tau, potential, mass, order, &settings)?;
    Ok(moved.max_distance(&t_eff_flow(x, potential, mass, tau, order)?))
}

/// Least-squares slope of `log error` against `log τ`.
pub fn fit_order(taus: &[f64], errors: &[f64]) -> Result<f64> {
    if taus.len() != errors.len() {
        return Err(Error::DimensionMismatch {
            expected: taus.len(),
            found: errors.len(),
        });
    }
    if taus.len() < 2 {
        return Err(Error::InvalidInput("need at least two timesteps".into()));
    }
    if let Some(&e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::OrderUnmeasurable(e));
    }
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
