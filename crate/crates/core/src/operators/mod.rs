//! Differential-operator words and the correction generators built from them.
//!
//! Notation: `D = p_a ∂^a`, `D̄ = (∂_aV) ∂^a` and
//! `D̄₃ = (∂_aV)(∂_bV)(∂_cV) ∂^a∂^b∂^c`, with indices raised by the mass
//! matrix. Operators differentiate in `q` only; the momentum is a parameter.
//! Words apply rightmost atom first, so `D̄D²V = D̄(D(DV))`.
//!
//! Every word is expanded once into a sum of contraction trees (see
//! [`tree`]), which gives values and gradients that are exact to rounding.

pub mod scalar;
pub mod table;
pub mod tree;
pub mod word;

use nalgebra::DVector;

pub use table::{Family, Generator, GeneratorTable};
pub use tree::{EvalContext, TreeSum};
pub use word::{Atom, OperatorWord};

use crate::error::{Error, Result};
use crate::hamiltonian::{check_dim, MassMatrix, Potential};

/// Longest word the engine evaluates. Gradients of such a word need
/// derivative tensors of order `MAX_WORD_LEN + 1 = 8`.
pub const MAX_WORD_LEN: usize = 7;

fn check_inputs(potential: &dyn Potential, mass: &MassMatrix, q: &DVector<f64>, mom: Option<&DVector<f64>>) -> Result<()> {
    check_dim(potential.dim(), q.len())?;
    check_dim(potential.dim(), mass.dim())?;
    if let Some(m) = mom {
        check_dim(potential.dim(), m.len())?;
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidTimestep(tau))
    }
}

/// `(w V)(q, mom)`.
pub fn apply_word(
    word: &OperatorWord,
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    mom: &DVector<f64>,
) -> Result<f64> {
    check_inputs(potential, mass, q, Some(mom))?;
    let ctx = EvalContext::new(potential, mass, q, mom);
    Ok(TreeSum::from_word(word).value(&ctx))
}

/// `∇_q (w V)(q, mom)`.
pub fn grad_word_q(
    word: &OperatorWord,
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    mom: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_inputs(potential, mass, q, Some(mom))?;
    let ctx = EvalContext::new(potential, mass, q, mom);
    Ok(TreeSum::from_word(word).gradients(&ctx).0)
}

/// `∇_mom (w V)(q, mom)`; zero for words without momentum atoms.
pub fn grad_word_mom(
    word: &OperatorWord,
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    mom: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_inputs(potential, mass, q, Some(mom))?;
    let ctx = EvalContext::new(potential, mass, q, mom);
    Ok(TreeSum::from_word(word).gradients(&ctx).1)
}

/// Kinetic correction `T_n(q, p; τ)` for `n ∈ {2, 4, 6}`.
pub fn kinetic_correction(
    n: usize,
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    p: &DVector<f64>,
    tau: f64,
) -> Result<f64> {
    let generator = GeneratorTable::standard().kinetic(n)?;
    check_tau(tau)?;
    check_inputs(potential, mass, q, Some(p))?;
    let ctx = EvalContext::new(potential, mass, q, p);
    Ok(generator.expanded().value(&ctx) * tau.powi(n as i32))
}

/// Gradients `(∇_q T_n, ∇_p T_n)`.
pub fn grad_kinetic_correction(
    n: usize,
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    p: &DVector<f64>,
    tau: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let generator = GeneratorTable::standard().kinetic(n)?;
    check_tau(tau)?;
    check_inputs(potential, mass, q, Some(p))?;
    let ctx = EvalContext::new(potential, mass, q, p);
    let (gq, gp) = generator.expanded().gradients(&ctx);
    let w = tau.powi(n as i32);
    Ok((gq * w, gp * w))
}

/// Potential correction `V_n(q; τ)` for `n ∈ {2, 4, 6}`.
pub fn potential_correction(
    n: usize,
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    tau: f64,
) -> Result<f64> {
    let generator = GeneratorTable::standard().potential(n)?;
    check_tau(tau)?;
    check_inputs(potential, mass, q, None)?;
    let zero = DVector::zeros(q.len());
    let ctx = EvalContext::new(potential, mass, q, &zero);
    Ok(generator.expanded().value(&ctx) * tau.powi(n as i32))
}

/// `∇_q V_n(q; τ)`.
pub fn grad_potential_correction(
    n: usize,
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    tau: f64,
) -> Result<DVector<f64>> {
    let generator = GeneratorTable::standard().potential(n)?;
    check_tau(tau)?;
    check_inputs(potential, mass, q, None)?;
    let zero = DVector::zeros(q.len());
    let ctx = EvalContext::new(potential, mass, q, &zero);
    Ok(generator.expanded().gradients(&ctx).0 * tau.powi(n as i32))
}

/// `V_eff = V + V_2 + … + V_{order−2}`.
pub fn v_eff(potential: &dyn Potential, mass: &MassMatrix, q: &DVector<f64>, tau: f64, scheme_order: usize) -> Result<f64> {
    check_inputs(potential, mass, q, None)?;
    let mut total = potential.value(q);
    for n in GeneratorTable::correction_orders(scheme_order)? {
        total += potential_correction(n, potential, mass, q, tau)?;
    }
    Ok(total)
}

/// `∇_q V_eff`.
pub fn grad_v_eff(
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    tau: f64,
    scheme_order: usize,
) -> Result<DVector<f64>> {
    check_inputs(potential, mass, q, None)?;
    let mut total = potential.gradient(q);
    for n in GeneratorTable::correction_orders(scheme_order)? {
        total += grad_potential_correction(n, potential, mass, q, tau)?;
    }
    Ok(total)
}

/// `T_eff = ½pᵀMp + T_2 + … + T_{order−2}`.
pub fn t_eff(
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    p: &DVector<f64>,
    tau: f64,
    scheme_order: usize,
) -> Result<f64> {
    check_inputs(potential, mass, q, Some(p))?;
    let mut total = crate::hamiltonian::kinetic_energy(p, mass);
    for n in GeneratorTable::correction_orders(scheme_order)? {
        total += kinetic_correction(n, potential, mass, q, p, tau)?;
    }
    Ok(total)
}

/// `(∇_q T_eff, ∇_p T_eff)`.
pub fn grad_t_eff(
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    p: &DVector<f64>,
    tau: f64,
    scheme_order: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_inputs(potential, mass, q, Some(p))?;
    let mut gq = DVector::zeros(q.len());
    let mut gp = mass.raise(p);
    for n in GeneratorTable::correction_orders(scheme_order)? {
        let (a, b) = grad_kinetic_correction(n, potential, mass, q, p, tau)?;
        gq += a;
        gp += b;
    }
    Ok((gq, gp))
}

/// Move-step generating function `G(q, P; τ) = Σ_{n ≤ order} G_n τⁿ`.
///
/// `scheme_order = 2` keeps `G_0 + G_1 τ`; higher orders keep every term up to
/// `τ^{scheme_order}`.
pub fn generating_function(
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    big_p: &DVector<f64>,
    tau: f64,
    scheme_order: usize,
) -> Result<f64> {
    check_tau(tau)?;
    check_inputs(potential, mass, q, Some(big_p))?;
    let table = GeneratorTable::standard();
    let mut g = q.dot(big_p) + tau * crate::hamiltonian::kinetic_energy(big_p, mass);
    let ctx = EvalContext::new(potential, mass, q, big_p);
    for n in GeneratorTable::gfun_orders(scheme_order)? {
        g += table.gfun(n)?.expanded().value(&ctx) * tau.powi(n as i32);
    }
    Ok(g)
}

/// `(∂G/∂q, ∂G/∂P)`. The canonical transformation of the move step is
/// `p = ∂G/∂q`, `Q = ∂G/∂P`.
pub fn grad_generating_function(
    potential: &dyn Potential,
    mass: &MassMatrix,
    q: &DVector<f64>,
    big_p: &DVector<f64>,
    tau: f64,
    scheme_order: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_tau(tau)?;
    check_inputs(potential, mass, q, Some(big_p))?;
    let table = GeneratorTable::standard();
    let mut gq = big_p.clone();
    let mut gp = q + mass.raise(big_p) * tau;
    let ctx = EvalContext::new(potential, mass, q, big_p);
    for n in GeneratorTable::gfun_orders(scheme_order)? {
        let (a, b) = table.gfun(n)?.expanded().gradients(&ctx);
        let w = tau.powi(n as i32);
        gq.axpy(w, &a, 1.0);
        gp.axpy(w, &b, 1.0);
    }
    Ok((gq, gp))
}

#[cfg(test)]
mod tests;
