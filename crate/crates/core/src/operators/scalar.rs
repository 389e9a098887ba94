//! One-dimensional collapse of contraction trees.
//!
//! With a single degree of freedom every tree is a plain monomial
//! `c · m^a · mom^U · Π_k (V^{(k)})^{n_k}`, where `m` is the 1x1 metric. Sums
//! of such monomials can be differentiated symbolically, and for fixed `q`
//! they collapse to an ordinary polynomial in the momentum argument, which
//! makes the implicit move step very cheap.

use std::collections::BTreeMap;

use num_rational::Rational64;
use num_traits::Zero;

use super::tree::{to_f64, TreeSum};

/// Number of derivative slots `V, V', …, V^{(9)}`.
pub const DERIV_SLOTS: usize = 10;

/// Highest momentum power any supported generator or derivative produces.
pub const MAX_MOM_POWER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct MonomialKey {
    derivs: [u8; DERIV_SLOTS],
    mom_pow: u8,
    metric_pow: u8,
}

/// Exact symbolic sum of monomials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RationalPoly {
    terms: BTreeMap<MonomialKey, Rational64>,
}

impl RationalPoly {
    pub fn from_trees(sum: &TreeSum) -> Self {
        let mut poly = RationalPoly::default();
        for (coeff, tree) in sum.terms() {
            let mut derivs = [0u8; DERIV_SLOTS];
            for node in tree.nodes() {
                derivs[node.order()] += 1;
            }
            let mom = tree.momentum_degree();
            let edges = tree.nodes().len() - 1;
            poly.add(
                MonomialKey {
                    derivs,
                    mom_pow: mom as u8,
                    metric_pow: (mom + edges) as u8,
                },
                coeff,
            );
        }
        poly
    }

    fn add(&mut self, key: MonomialKey, coeff: Rational64) {
        let slot = self.terms.entry(key).or_insert_with(Rational64::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    /// `∂/∂q`: each derivative factor `V^{(k)}` becomes `V^{(k+1)}`.
    pub fn d_q(&self) -> Self {
        let mut out = RationalPoly::default();
        for (key, coeff) in &self.terms {
            for k in 0..DERIV_SLOTS {
                let n = key.derivs[k];
                if n == 0 {
                    continue;
                }
                assert!(k + 1 < DERIV_SLOTS, "derivative order exceeds collapse slots");
                let mut next = *key;
                next.derivs[k] -= 1;
                next.derivs[k + 1] += 1;
                out.add(next, coeff * Rational64::from_integer(n as i64));
            }
        }
        out
    }

    /// `∂/∂mom`.
    pub fn d_mom(&self) -> Self {
        let mut out = RationalPoly::default();
        for (key, coeff) in &self.terms {
            if key.mom_pow == 0 {
                continue;
            }
            let mut next = *key;
            next.mom_pow -= 1;
            out.add(next, coeff * Rational64::from_integer(key.mom_pow as i64));
        }
        out
    }

    pub fn to_scalar(&self) -> ScalarPoly {
        ScalarPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| Monomial {
                    coeff: to_f64(*c),
                    derivs: k.derivs,
                    mom_pow: k.mom_pow,
                    metric_pow: k.metric_pow,
                })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Monomial {
    coeff: f64,
    derivs: [u8; DERIV_SLOTS],
    mom_pow: u8,
    metric_pow: u8,
}

impl Monomial {
    /// Everything except the momentum power.
    fn position_factor(&self, d: &[f64; DERIV_SLOTS], metric_powers: &[f64]) -> f64 {
        let mut f = self.coeff * metric_powers[self.metric_pow as usize];
        for (k, &n) in self.derivs.iter().enumerate() {
            if n > 0 {
                f *= d[k].powi(n as i32);
            }
        }
        f
    }
}

/// Floating-point monomial sum, evaluated against cached derivatives
/// `d[k] = V^{(k)}(q)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalarPoly {
    terms: Vec<Monomial>,
}

/// Derivatives of a 1-D potential at one point together with powers of the
/// metric.
#[derive(Debug, Clone)]
pub struct ScalarPoint {
    pub d: [f64; DERIV_SLOTS],
    metric_powers: [f64; 2 * DERIV_SLOTS],
}

impl ScalarPoint {
    pub fn new(d: [f64; DERIV_SLOTS], metric: f64) -> Self {
        let mut metric_powers = [1.0; 2 * DERIV_SLOTS];
        for k in 1..metric_powers.len() {
            metric_powers[k] = metric_powers[k - 1] * metric;
        }
        ScalarPoint { d, metric_powers }
    }
}

impl ScalarPoly {
    pub fn eval(&self, at: &ScalarPoint, mom: f64) -> f64 {
        self.terms
            .iter()
            .map(|m| m.position_factor(&at.d, &at.metric_powers) * mom.powi(m.mom_pow as i32))
            .sum()
    }

    /// Adds `weight ×` this sum, viewed as a polynomial in the momentum
    /// argument, into `coeffs` (indexed by power).
    pub fn accumulate(&self, at: &ScalarPoint, weight: f64, coeffs: &mut [f64; MAX_MOM_POWER + 1]) {
        for m in &self.terms {
            coeffs[m.mom_pow as usize] += weight * m.position_factor(&at.d, &at.metric_powers);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Horner evaluation of `Σ c_j x^j` and its derivative.
pub fn horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for &c in coeffs.iter().rev() {
        slope = slope * x + value;
        value = value * x + c;
    }
    (value, slope)
}
