use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

use super::check_dim;
use crate::error::{Error, Result};
use crate::MAX_DERIVATIVE_ORDER;

/// Evaluation contract for a potential `V(q)` and its exact derivative tensors.
///
/// Everything the operator engine needs reduces to contractions of the
/// derivative tensors `∂_{a1}…∂_{ak} V` with direction vectors, so that is the
/// one required primitive besides the value. Implementations must be exact
/// (analytic), not finite-difference approximations, and must support
/// contractions of total order at least `MAX_DERIVATIVE_ORDER`.
pub trait Potential: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, q: &DVector<f64>) -> f64;

    /// Full contraction `∂_{a1}…∂_{ak} V u1^{a1}…uk^{ak}`; an empty `dirs`
    /// returns the value.
    fn contract(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> f64;

    /// Contraction leaving one lower index free. With no directions this is
    /// the gradient.
    fn contract_free(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |i, _| {
            let e = DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
            let mut all: Vec<&DVector<f64>> = dirs.to_vec();
            all.push(&e);
            self.contract(q, &all)
        })
    }

    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        self.contract_free(q, &[])
    }

    /// Fills `out[k]` with `V^{(k)}(q)` for a one-dimensional potential.
    fn derivatives_1d(&self, q: f64, out: &mut [f64]) {
        let q = DVector::from_element(1, q);
        let one = DVector::from_element(1, 1.0);
        let mut dirs: Vec<&DVector<f64>> = Vec::with_capacity(out.len());
        for slot in out.iter_mut() {
            *slot = self.contract(&q, &dirs);
            dirs.push(&one);
        }
    }

    /// Stiffness matrix `K` when `V = ½ qᵀKq` exactly.
    fn stiffness(&self) -> Option<DMatrix<f64>> {
        None
    }

    fn name(&self) -> String;
}

/// Exact directional derivative `∂_{a1}…∂_{ak} V u1^{a1}…uk^{ak}` for
/// `1 ≤ k ≤ 8`.
pub fn dir_deriv(potential: &dyn Potential, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> Result<f64> {
    if dirs.is_empty() || dirs.len() > MAX_DERIVATIVE_ORDER {
        return Err(Error::UnsupportedDerivativeOrder(dirs.len()));
    }
    check_dim(potential.dim(), q.len())?;
    for d in dirs {
        check_dim(potential.dim(), d.len())?;
    }
    Ok(potential.contract(q, dirs))
}

/// Product of the 1-D direction components, in sorted order so that the
/// result does not depend on the order of the arguments.
fn dir_product(dirs: &[&DVector<f64>]) -> f64 {
    let mut buf = [0.0f64; 16];
    let n = dirs.len().min(buf.len());
    for (slot, d) in buf.iter_mut().zip(dirs) {
        *slot = d[0];
    }
    buf[..n].sort_unstable_by(f64::total_cmp);
    buf[..n].iter().product()
}

/// Isotropic harmonic well `V = ½ ω² |q|²` in `dim` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub omega: f64,
    pub dim: usize,
}

impl Harmonic {
    pub fn new(omega: f64) -> Self {
        Harmonic { omega, dim: 1 }
    }

    pub fn with_dim(omega: f64, dim: usize) -> Self {
        Harmonic { omega, dim }
    }

    fn spring(&self) -> f64 {
        self.omega * self.omega
    }
}

impl Potential for Harmonic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        0.5 * self.spring() * q.norm_squared()
    }

    fn contract(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> f64 {
        match dirs {
            [] => self.value(q),
            [u] => (q * self.spring()).dot(u),
            [u, v] => self.spring() * u.dot(v),
            _ => 0.0,
        }
    }

    fn contract_free(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> DVector<f64> {
        match dirs {
            [] => q * self.spring(),
            [u] => *u * self.spring(),
            _ => DVector::zeros(self.dim),
        }
    }

    fn derivatives_1d(&self, q: f64, out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = match k {
                0 => 0.5 * self.spring() * q * q,
                1 => self.spring() * q,
                2 => self.spring(),
                _ => 0.0,
            };
        }
    }

    fn stiffness(&self) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.dim, self.dim) * self.spring())
    }

    fn name(&self) -> String {
        format!("harmonic(omega={})", self.omega)
    }
}

/// The anharmonic well `V = q⁴/4` (one degree of freedom).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quartic;

impl Quartic {
    fn derivative(q: f64, k: usize) -> f64 {
        match k {
            0 => 0.25 * q * q * q * q,
            1 => q * q * q,
            2 => 3.0 * q * q,
            3 => 6.0 * q,
            4 => 6.0,
            _ => 0.0,
        }
    }
}

impl Potential for Quartic {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        Self::derivative(q[0], 0)
    }

    fn contract(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> f64 {
        Self::derivative(q[0], dirs.len()) * dir_product(dirs)
    }

    fn contract_free(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> DVector<f64> {
        DVector::from_element(1, Self::derivative(q[0], dirs.len() + 1) * dir_product(dirs))
    }

    fn derivatives_1d(&self, q: f64, out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = Self::derivative(q, k);
        }
    }

    fn name(&self) -> String {
        "quartic".into()
    }
}

/// `V = ½ qᵀKq` with symmetric `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    k: DMatrix<f64>,
}

impl Quadratic {
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        if !k.is_square() || k.nrows() == 0 {
            return Err(Error::InvalidInput("stiffness must be a non-empty square matrix".into()));
        }
        let asym = (&k - k.transpose()).amax();
        if asym > 1e-12 * k.amax().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "stiffness matrix is not symmetric (asymmetry {asym:e})"
            )));
        }
        Ok(Quadratic { k })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }
}

impl Potential for Quadratic {
    fn dim(&self) -> usize {
        self.k.nrows()
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        0.5 * q.dot(&(&self.k * q))
    }

    fn contract(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> f64 {
        match dirs {
            [] => self.value(q),
            [u] => u.dot(&(&self.k * q)),
            [u, v] => 0.5 * (u.dot(&(&self.k * *v)) + v.dot(&(&self.k * *u))),
            _ => 0.0,
        }
    }

    fn contract_free(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> DVector<f64> {
        match dirs {
            [] => &self.k * q,
            [u] => &self.k * *u,
            _ => DVector::zeros(self.dim()),
        }
    }

    fn stiffness(&self) -> Option<DMatrix<f64>> {
        Some(self.k.clone())
    }

    fn name(&self) -> String {
        format!("quadratic(n={})", self.dim())
    }
}

/// One-dimensional polynomial `V = Σ c_i qⁱ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial1D {
    coeffs: Vec<f64>,
}

impl Polynomial1D {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial1D { coeffs }
    }

    fn derivative(&self, q: f64, k: usize) -> f64 {
        // Horner on the k-th derivative's coefficients c_i · i!/(i-k)!.
        let mut acc = 0.0;
        for i in (k..self.coeffs.len()).rev() {
            let falling: f64 = ((i - k + 1)..=i).map(|j| j as f64).product();
            acc = acc * q + self.coeffs[i] * falling;
        }
        acc
    }
}

impl Potential for Polynomial1D {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        self.derivative(q[0], 0)
    }

    fn contract(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> f64 {
        self.derivative(q[0], dirs.len()) * dir_product(dirs)
    }

    fn contract_free(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> DVector<f64> {
        DVector::from_element(1, self.derivative(q[0], dirs.len() + 1) * dir_product(dirs))
    }

    fn derivatives_1d(&self, q: f64, out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.derivative(q, k);
        }
    }

    fn stiffness(&self) -> Option<DMatrix<f64>> {
        let quadratic_only = self
            .coeffs
            .iter()
            .enumerate()
            .all(|(i, c)| i == 2 || *c == 0.0);
        quadratic_only.then(|| DMatrix::from_element(1, 1, 2.0 * self.coeffs.get(2).copied().unwrap_or(0.0)))
    }

    fn name(&self) -> String {
        format!("polynomial({:?})", self.coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn s(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    fn shipped() -> Vec<Box<dyn Potential>> {
        vec![
            Box::new(Quartic),
            Box::new(Harmonic::new(1.3)),
            Box::new(Polynomial1D::new(vec![0.1, -0.4, 0.7, 0.2, -0.3, 0.05, 0.01, -0.002, 0.0003, 1e-4])),
        ]
    }

    #[test]
    fn dir_deriv_examples() {
        let one = s(1.0);
        assert_eq!(dir_deriv(&Quartic, &s(1.0), &[&one]).unwrap(), 1.0);
        assert_eq!(dir_deriv(&Quartic, &s(1.0), &[&one; 5]).unwrap(), 0.0);
        assert_eq!(dir_deriv(&Harmonic::new(1.0), &s(5.0), &[&one, &one]).unwrap(), 1.0);
    }

    #[test]
    fn dir_deriv_order_limits() {
        let one = s(1.0);
        assert_eq!(
            dir_deriv(&Quartic, &s(1.0), &[]),
            Err(Error::UnsupportedDerivativeOrder(0))
        );
        assert_eq!(
            dir_deriv(&Quartic, &s(1.0), &[&one; 9]),
            Err(Error::UnsupportedDerivativeOrder(9))
        );
        let two = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            dir_deriv(&Quartic, &s(1.0), &[&two]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn vanishing_high_derivatives() {
        let q = s(0.7);
        let u = s(1.9);
        for k in 5..=8 {
            assert_eq!(dir_deriv(&Quartic, &q, &vec![&u; k]).unwrap(), 0.0);
        }
        let quad = Quadratic::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        let q = DVector::from_vec(vec![0.3, -1.0]);
        let u = DVector::from_vec(vec![1.0, 2.0]);
        for k in 3..=8 {
            assert_eq!(dir_deriv(&quad, &q, &vec![&u; k]).unwrap(), 0.0);
        }
    }

    #[test]
    fn polynomial_derivatives() {
        // V = 1 + 2q + 3q^2 + 4q^3
        let v = Polynomial1D::new(vec![1.0, 2.0, 3.0, 4.0]);
        let mut d = [0.0; 5];
        v.derivatives_1d(2.0, &mut d);
        assert_eq!(d, [49.0, 62.0, 54.0, 24.0, 0.0]);
        assert!(Polynomial1D::new(vec![0.0, 0.0, 1.5]).stiffness().is_some());
        assert!(v.stiffness().is_none());
    }

    #[test]
    fn default_contract_free_matches_override() {
        #[derive(Debug)]
        struct Plain(Quadratic);
        impl Potential for Plain {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn value(&self, q: &DVector<f64>) -> f64 {
                self.0.value(q)
            }
            fn contract(&self, q: &DVector<f64>, dirs: &[&DVector<f64>]) -> f64 {
                self.0.contract(q, dirs)
            }
            fn name(&self) -> String {
                "plain".into()
            }
        }
        let quad = Quadratic::new(dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        let plain = Plain(quad.clone());
        let q = DVector::from_vec(vec![0.3, -1.0]);
        let u = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(plain.gradient(&q), quad.gradient(&q));
        assert_eq!(plain.contract_free(&q, &[&u]), quad.contract_free(&q, &[&u]));
    }

    /// Central difference of the order-(k-1) contraction along `u` (the value
    /// itself for k = 1).
    fn central_difference(v: &dyn Potential, q: f64, k: usize, h: f64) -> f64 {
        let one = s(1.0);
        let lower = vec![&one; k - 1];
        (v.contract(&s(q + h), &lower) - v.contract(&s(q - h), &lower)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn contraction_is_symmetric(q in -2.0f64..2.0, dirs in prop::collection::vec(-2.0f64..2.0, 1..=8)) {
            for v in shipped() {
                let vecs: Vec<DVector<f64>> = dirs.iter().map(|d| s(*d)).collect();
                let refs: Vec<&DVector<f64>> = vecs.iter().collect();
                let base = dir_deriv(v.as_ref(), &s(q), &refs).unwrap();
                let mut rev = refs.clone();
                rev.reverse();
                prop_assert_eq!(dir_deriv(v.as_ref(), &s(q), &rev).unwrap(), base);
                let mut rot = refs.clone();
                rot.rotate_left(1);
                prop_assert_eq!(dir_deriv(v.as_ref(), &s(q), &rot).unwrap(), base);
            }
        }

        #[test]
        fn quadratic_contraction_symmetric(q in prop::collection::vec(-2.0f64..2.0, 3),
                                           a in prop::collection::vec(-2.0f64..2.0, 3),
                                           b in prop::collection::vec(-2.0f64..2.0, 3)) {
            let k = dmatrix![2.0, 0.5, -0.1; 0.5, 1.0, 0.3; -0.1, 0.3, 3.0];
            let quad = Quadratic::new(k).unwrap();
            let q = DVector::from_vec(q);
            let a = DVector::from_vec(a);
            let b = DVector::from_vec(b);
            prop_assert_eq!(quad.contract(&q, &[&a, &b]), quad.contract(&q, &[&b, &a]));
            prop_assert_eq!(quad.contract(&q, &[&a]), quad.gradient(&q).dot(&a));
        }

        #[test]
        fn first_order_is_gradient(q in -2.0f64..2.0, u in -2.0f64..2.0) {
            for v in shipped() {
                let lhs = dir_deriv(v.as_ref(), &s(q), &[&s(u)]).unwrap();
                prop_assert_eq!(lhs, v.gradient(&s(q))[0] * u);
            }
        }

        #[test]
        fn matches_finite_differences(q in -2.0f64..2.0) {
            let h = 1e-4;
            for v in shipped() {
                let one = s(1.0);
                for k in 1..=3 {
                    let exact = dir_deriv(v.as_ref(), &s(q), &vec![&one; k]).unwrap();
                    let fd = central_difference(v.as_ref(), q, k, h);
                    let scale = exact.abs().max(1.0);
                    prop_assert!((exact - fd).abs() <= 1e-6 * scale, "k={} exact={} fd={}", k, exact, fd);
                }
            }
        }
    }
}
