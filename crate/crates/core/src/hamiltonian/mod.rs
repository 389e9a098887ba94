//! Phase-space state, the mass metric and the energy function.
//!
//! Throughout, momenta carry a lower index (`p_a`); the mass matrix raises it,
//! `p^a = M^{ab} p_b`, and likewise turns a gradient `∂_a V` into `∂^a V`.

mod potential;

pub use potential::{dir_deriv, Harmonic, Polynomial1D, Potential, Quadratic, Quartic};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point `(q, p)` in phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                found: p.len(),
            });
        }
        if q.is_empty() {
            return Err(Error::InvalidInput("phase space must have dimension >= 1".into()));
        }
        if q.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("phase point has non-finite components".into()));
        }
        Ok(PhasePoint { q, p })
    }

    pub fn from_slices(q: &[f64], p: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(q), DVector::from_column_slice(p))
    }

    /// One degree of freedom.
    pub fn scalar(q: f64, p: f64) -> Self {
        PhasePoint {
            q: DVector::from_element(1, q),
            p: DVector::from_element(1, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// The time-reversed point `(q, -p)`.
    pub fn reversed(&self) -> Self {
        PhasePoint {
            q: self.q.clone(),
            p: -&self.p,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }

    /// Max-norm distance in phase space.
    pub fn max_distance(&self, other: &PhasePoint) -> f64 {
        let dq = (&self.q - &other.q).amax();
        let dp = (&self.p - &other.p).amax();
        dq.max(dp)
    }

    pub fn max_norm(&self) -> f64 {
        self.q.amax().max(self.p.amax())
    }

    /// Flattened `(q_1..q_N, p_1..p_N)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.q.iter().chain(self.p.iter()).copied().collect()
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let n = x.len() / 2;
        PhasePoint {
            q: DVector::from_column_slice(&x[..n]),
            p: DVector::from_column_slice(&x[n..2 * n]),
        }
    }
}

/// Symmetric positive semi-definite inverse-mass metric `M^{ab}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    matrix: DMatrix<f64>,
    identity: bool,
}

impl MassMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidMass(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMass("non-finite entries".into()));
        }
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidMass(format!("not symmetric (asymmetry {asym:e})")));
        }
        let min_eig = matrix.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-12 * scale {
            return Err(Error::InvalidMass(format!(
                "not positive semi-definite (smallest eigenvalue {min_eig:e})"
            )));
        }
        let identity = matrix == DMatrix::identity(matrix.nrows(), matrix.ncols());
        Ok(MassMatrix { matrix, identity })
    }

    pub fn identity(n: usize) -> Self {
        MassMatrix {
            matrix: DMatrix::identity(n, n),
            identity: true,
        }
    }

    pub fn scalar(m: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, m))
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `M^{ab} v_b`, without a dimension check.
    pub(crate) fn raise(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.identity {
            v.clone()
        } else {
            &self.matrix * v
        }
    }

    /// The single entry of a 1x1 metric.
    pub(crate) fn as_scalar(&self) -> Option<f64> {
        (self.dim() == 1).then(|| self.matrix[(0, 0)])
    }
}

/// Raises the index of a momentum-like vector: `p^a = M^{ab} p_b`.
pub fn raise_index(p: &DVector<f64>, mass: &MassMatrix) -> Result<DVector<f64>> {
    check_dim(mass.dim(), p.len())?;
    Ok(mass.raise(p))
}

/// Total energy `½ pᵀMp + V(q)`.
pub fn hamiltonian(x: &PhasePoint, potential: &dyn Potential, mass: &MassMatrix) -> Result<f64> {
    check_dim(mass.dim(), x.dim())?;
    check_dim(potential.dim(), x.dim())?;
    Ok(kinetic_energy(&x.p, mass) + potential.value(&x.q))
}

pub(crate) fn kinetic_energy(p: &DVector<f64>, mass: &MassMatrix) -> f64 {
    0.5 * p.dot(&mass.raise(p))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
