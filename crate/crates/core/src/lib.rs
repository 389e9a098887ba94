//! Corrected splitting integrators for separable Hamiltonian systems
//! `H = ½ pᵀMp + V(q)`.
//!
//! The classic kick–move–kick (Störmer–Verlet) scheme is second order. Adding
//! τ-dependent correction generators to the kick and move pieces raises the
//! global order to 4, 6 or 8 without extra sub-steps, while the move step is
//! realised through a generating function so that every step stays exactly
//! symplectic.
//!
//! - [`hamiltonian`]: phase-space types, the mass metric and potentials with
//!   exact derivative contractions.
//! - [`operators`]: the differential-operator words `D`, `D̄`, `D̄₃`, the
//!   correction generators and the generating-function terms.
//! - [`integrators`]: kick, move and full steps, plus the exact integrator for
//!   quadratic systems.
//! - [`verification`]: reference solutions, order measurement, symplecticity
//!   defect, energy traces and period estimation.

pub mod error;
pub mod hamiltonian;
pub mod integrators;
pub mod operators;
pub mod verification;

pub use error::{Error, Result};
pub use hamiltonian::{hamiltonian, MassMatrix, PhasePoint, Potential};
pub use integrators::{Integrator, SchemeConfig, StepReport, Variant};

/// Highest derivative order the public contraction API accepts.
pub const MAX_DERIVATIVE_ORDER: usize = 8;
