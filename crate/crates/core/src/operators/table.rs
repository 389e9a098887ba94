//! Coefficient tables for the correction generators and the generating
//! function, stored as exact rationals.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_rational::Rational64;

use super::scalar::{RationalPoly, ScalarPoly};
use super::tree::TreeSum;
use super::word::OperatorWord;
use crate::error::{Error, Result};

/// Which family a generator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// `T_n`, added to the kinetic (move) piece.
    Kinetic,
    /// `V_n`, added to the potential (kick) piece.
    Potential,
    /// `G_n`, the τⁿ coefficient of the move-step generating function
    /// (momentum atoms stand for `𝒟 = P_a ∂^a`).
    Gfun,
}

/// Precompiled 1-D forms of one generator: value and the derivatives the
/// integrators need.
#[derive(Debug, Clone)]
pub struct ScalarForms {
    pub value: ScalarPoly,
    pub d_q: ScalarPoly,
    pub d_mom: ScalarPoly,
}

/// One generator: `Σ coeff · word V` (without its τ power).
#[derive(Debug, Clone)]
pub struct Generator {
    pub family: Family,
    pub order: usize,
    terms: Vec<(Rational64, OperatorWord)>,
    expanded: TreeSum,
    scalar: ScalarForms,
}

impl Generator {
    fn new(family: Family, order: usize, prefactor: (i64, i64), words: &[(i64, &str)]) -> Self {
        let prefactor = Rational64::new(prefactor.0, prefactor.1);
        let terms: Vec<(Rational64, OperatorWord)> = words
            .iter()
            .map(|(c, w)| {
                let word = OperatorWord::parse(w).expect("table words are well formed");
                (prefactor * Rational64::from_integer(*c), word)
            })
            .collect();
        let mut expanded = TreeSum::default();
        for (c, w) in &terms {
            expanded.add_scaled(*c, &TreeSum::from_word(w));
        }
        let exact = RationalPoly::from_trees(&expanded);
        let d_q = exact.d_q();
        let scalar = ScalarForms {
            value: exact.to_scalar(),
            d_mom: exact.d_mom().to_scalar(),
            d_q: d_q.to_scalar(),
        };
        Generator {
            family,
            order,
            terms,
            expanded,
            scalar,
        }
    }

    /// The `(coefficient, word)` pairs as tabulated.
    pub fn terms(&self) -> &[(Rational64, OperatorWord)] {
        &self.terms
    }

    /// The product-rule expansion of the whole generator.
    pub fn expanded(&self) -> &TreeSum {
        &self.expanded
    }

    pub fn scalar(&self) -> &ScalarForms {
        &self.scalar
    }
}

#[derive(Debug)]
pub struct GeneratorTable {
    kinetic: BTreeMap<usize, Generator>,
    potential: BTreeMap<usize, Generator>,
    gfun: BTreeMap<usize, Generator>,
}

impl GeneratorTable {
    /// The shared table, built on first use.
    pub fn standard() -> &'static GeneratorTable {
        static TABLE: OnceLock<GeneratorTable> = OnceLock::new();
        TABLE.get_or_init(GeneratorTable::build)
    }

    fn build() -> Self {
        use Family::*;
        let mut kinetic = BTreeMap::new();
        let mut potential = BTreeMap::new();
        let mut gfun = BTreeMap::new();

        kinetic.insert(2, Generator::new(Kinetic, 2, (-1, 12), &[(1, "DD")]));
        kinetic.insert(
            4,
            Generator::new(Kinetic, 4, (1, 720), &[(1, "DDDD"), (-9, "BDD"), (3, "DBD")]),
        );
        kinetic.insert(
            6,
            Generator::new(
                Kinetic,
                6,
                (-1, 60480),
                &[
                    (2, "DDDDDD"),
                    (-40, "BDDDD"),
                    (46, "DBDDD"),
                    (-15, "DDBDD"),
                    (54, "BBDD"),
                    (-9, "BDBD"),
                    (-42, "DBBD"),
                    (12, "DDBB"),
                ],
            ),
        );

        potential.insert(2, Generator::new(Potential, 2, (1, 24), &[(1, "B")]));
        potential.insert(4, Generator::new(Potential, 4, (1, 480), &[(1, "BB")]));
        potential.insert(
            6,
            Generator::new(Potential, 6, (1, 161280), &[(17, "BBB"), (-10, "D3")]),
        );

        gfun.insert(3, Generator::new(Gfun, 3, (-1, 12), &[(1, "DD")]));
        gfun.insert(4, Generator::new(Gfun, 4, (-1, 24), &[(1, "DDD")]));
        gfun.insert(
            5,
            Generator::new(Gfun, 5, (-1, 240), &[(3, "DDDD"), (3, "BDD"), (-1, "DBD")]),
        );
        gfun.insert(
            6,
            Generator::new(Gfun, 6, (-1, 720), &[(2, "DDDDD"), (8, "BDDD"), (-5, "DBDD")]),
        );
        gfun.insert(
            7,
            Generator::new(
                Gfun,
                7,
                (-1, 20160),
                &[
                    (10, "DDDDDD"),
                    (10, "BDDDD"),
                    (90, "DBDDD"),
                    (-75, "DDBDD"),
                    (18, "BBDD"),
                    (-3, "BDBD"),
                    (-14, "DBBD"),
                    (4, "DDBB"),
                ],
            ),
        );
        gfun.insert(
            8,
            Generator::new(
                Gfun,
                8,
                (-1, 40320),
                &[
                    (3, "DDDDDDD"),
                    (-87, "BDDDDD"),
                    (231, "DBDDDD"),
                    (-133, "DDBDDD"),
                    (63, "BBDDD"),
                    (-3, "DBBDD"),
                    (-21, "DDBBD"),
                    (4, "DDDBB"),
                    (-63, "BDBDD"),
                    (25, "DBDBD"),
                ],
            ),
        );

        GeneratorTable {
            kinetic,
            potential,
            gfun,
        }
    }

    /// `T_n` for `n ∈ {2, 4, 6}`.
    pub fn kinetic(&self, n: usize) -> Result<&Generator> {
        self.kinetic.get(&n).ok_or(Error::UnsupportedOrder(n))
    }

    /// `V_n` for `n ∈ {2, 4, 6}`.
    pub fn potential(&self, n: usize) -> Result<&Generator> {
        self.potential.get(&n).ok_or(Error::UnsupportedOrder(n))
    }

    /// `G_n` for `n ∈ {3, …, 8}`. `G_0 = qᵃP_a`, `G_1 = ½PᵃP_a` and `G_2 = 0`
    /// are not operator words and are handled by the callers.
    pub fn gfun(&self, n: usize) -> Result<&Generator> {
        self.gfun.get(&n).ok_or(Error::UnsupportedOrder(n))
    }

    /// Correction orders `2, 4, …, scheme_order − 2` used by a scheme.
    pub fn correction_orders(scheme_order: usize) -> Result<impl Iterator<Item = usize>> {
        check_scheme_order(scheme_order)?;
        Ok((2..scheme_order).step_by(2))
    }

    /// Generating-function terms `G_3 … G_{scheme_order}` used by a scheme.
    pub fn gfun_orders(scheme_order: usize) -> Result<impl Iterator<Item = usize>> {
        check_scheme_order(scheme_order)?;
        let top = if scheme_order == 2 { 2 } else { scheme_order };
        Ok(3..=top)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Generator> {
        self.kinetic
            .values()
            .chain(self.potential.values())
            .chain(self.gfun.values())
    }
}

pub fn check_scheme_order(order: usize) -> Result<()> {
    match order {
        2 | 4 | 6 | 8 => Ok(()),
        other => Err(Error::UnsupportedOrder(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> Rational64 {
        Rational64::new(a, b)
    }

    #[test]
    fn exact_coefficients() {
        let t = GeneratorTable::standard();
        assert_eq!(t.kinetic(2).unwrap().terms()[0].0, r(-1, 12));
        assert_eq!(t.potential(2).unwrap().terms()[0].0, r(1, 24));
        assert_eq!(t.kinetic(4).unwrap().terms()[1].0, r(-9, 720));
        assert_eq!(t.potential(4).unwrap().terms()[0].0, r(1, 480));
        let v6 = t.potential(6).unwrap().terms();
        assert_eq!(v6[0].0, r(17, 161280));
        assert_eq!(v6[1].0, r(-10, 161280));
        assert!(v6[1].1.is_d3bar());
        assert_eq!(t.kinetic(6).unwrap().terms()[4].0, r(-54, 60480));
        assert_eq!(t.gfun(8).unwrap().terms()[9].0, r(-25, 40320));
        assert_eq!(t.gfun(7).unwrap().terms().len(), 8);
    }

    #[test]
    fn unsupported_orders() {
        let t = GeneratorTable::standard();
        assert_eq!(t.kinetic(3).unwrap_err(), Error::UnsupportedOrder(3));
        assert_eq!(t.potential(8).unwrap_err(), Error::UnsupportedOrder(8));
        assert_eq!(t.gfun(2).unwrap_err(), Error::UnsupportedOrder(2));
        assert!(GeneratorTable::correction_orders(5).is_err());
    }

    #[test]
    fn truncation_mapping() {
        let c: Vec<usize> = GeneratorTable::correction_orders(8).unwrap().collect();
        assert_eq!(c, vec![2, 4, 6]);
        assert_eq!(GeneratorTable::correction_orders(2).unwrap().count(), 0);
        let g: Vec<usize> = GeneratorTable::gfun_orders(6).unwrap().collect();
        assert_eq!(g, vec![3, 4, 5, 6]);
        assert_eq!(GeneratorTable::gfun_orders(2).unwrap().count(), 0);
    }

    #[test]
    fn momentum_degrees_have_generator_parity() {
        // T_n and V_n are even in the momentum; G_n has degree parity n + 1.
        let t = GeneratorTable::standard();
        for g in t.iter() {
            for (_, w) in g.terms() {
                let deg = w.momentum_degree();
                match g.family {
                    Family::Kinetic | Family::Potential => assert_eq!(deg % 2, 0),
                    Family::Gfun => assert_eq!(deg % 2, (g.order + 1) % 2),
                }
            }
        }
    }

    #[test]
    fn engine_depth_covers_table() {
        // Gradients add one more derivative, which must stay within reach.
        for g in GeneratorTable::standard().iter() {
            assert!(g.expanded().max_order() < crate::MAX_DERIVATIVE_ORDER);
        }
    }
}
