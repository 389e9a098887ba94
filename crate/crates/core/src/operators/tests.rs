use approx::assert_relative_eq;
use nalgebra::{dmatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scalar::{ScalarPoint, DERIV_SLOTS};
use super::*;
use crate::hamiltonian::{Harmonic, Polynomial1D, Quadratic, Quartic};

fn s(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}

fn w(text: &str) -> OperatorWord {
    OperatorWord::parse(text).unwrap()
}

fn unit() -> MassMatrix {
    MassMatrix::identity(1)
}

#[test]
fn apply_word_examples() {
    let m = unit();
    assert_eq!(apply_word(&w("DD"), &Quartic, &m, &s(1.0), &s(2.0)).unwrap(), 12.0);
    assert_eq!(apply_word(&w("B"), &Quartic, &m, &s(1.0), &s(0.0)).unwrap(), 1.0);
    for q in [-3.0, 0.0, 0.4, 7.0] {
        assert_eq!(
            apply_word(&OperatorWord::d3bar(), &Harmonic::new(1.0), &m, &s(q), &s(1.0)).unwrap(),
            0.0
        );
    }
    assert_eq!(apply_word(&w("BBB"), &Quartic, &m, &s(1.0), &s(0.0)).unwrap(), 48.0);
}

#[test]
fn apply_word_checks_dimensions() {
    let two = DVector::from_vec(vec![1.0, 2.0]);
    assert!(matches!(
        apply_word(&w("D"), &Quartic, &unit(), &s(1.0), &two),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn word_gradient_examples() {
    let m = unit();
    let gq = grad_word_q(&w("B"), &Quartic, &m, &s(1.0), &s(0.0)).unwrap();
    assert_eq!(gq[0], 6.0);
    let gm = grad_word_mom(&w("DD"), &Quartic, &m, &s(1.0), &s(2.0)).unwrap();
    assert_eq!(gm[0], 12.0);
    for word in ["B", "BB", "BBB", "D3"] {
        let gm = grad_word_mom(&w(word), &Quartic, &m, &s(0.8), &s(1.7)).unwrap();
        assert_eq!(gm[0], 0.0);
    }
}

#[test]
fn kinetic_correction_examples() {
    let m = unit();
    let h = Harmonic::new(1.0);
    let tau: f64 = 0.3;
    for q in [-1.0, 0.5, 2.0] {
        let t2 = kinetic_correction(2, &h, &m, &s(q), &s(1.0), tau).unwrap();
        assert_relative_eq!(t2, -tau.powi(2) / 12.0, max_relative = 1e-14);
        let t4 = kinetic_correction(4, &h, &m, &s(q), &s(1.0), tau).unwrap();
        assert_relative_eq!(t4, tau.powi(4) / 240.0, max_relative = 1e-14);
        let t6 = kinetic_correction(6, &h, &m, &s(q), &s(1.0), tau).unwrap();
        assert_relative_eq!(t6, -tau.powi(6) / 10080.0, max_relative = 1e-14);
    }
    let t2 = kinetic_correction(2, &Quartic, &m, &s(1.0), &s(2.0), 0.1).unwrap();
    assert_relative_eq!(t2, -0.01, max_relative = 1e-14);
    assert_eq!(
        kinetic_correction(3, &Quartic, &m, &s(1.0), &s(2.0), 0.1),
        Err(Error::UnsupportedOrder(3))
    );
}

#[test]
fn potential_correction_examples() {
    let m = unit();
    let h = Harmonic::new(1.0);
    let tau: f64 = 0.25;
    let q: f64 = 1.7;
    let v2 = potential_correction(2, &h, &m, &s(q), tau).unwrap();
    assert_relative_eq!(v2, q * q * tau.powi(2) / 24.0, max_relative = 1e-14);
    let v6 = potential_correction(6, &h, &m, &s(q), tau).unwrap();
    assert_relative_eq!(v6, 17.0 / 40320.0 * q * q * tau.powi(6), max_relative = 1e-14);
    let v2 = potential_correction(2, &Quartic, &m, &s(1.0), 0.1).unwrap();
    assert_relative_eq!(v2, 0.01 / 24.0, max_relative = 1e-14);
    let v6 = potential_correction(6, &Quartic, &m, &s(1.0), 1.0).unwrap();
    assert_relative_eq!(v6, 0.0046875, max_relative = 1e-14);
    assert!(potential_correction(2, &Quartic, &m, &s(1.0), -0.1).is_err());
}

#[test]
fn v_eff_examples() {
    let m = unit();
    let q = s(0.9);
    assert_eq!(v_eff(&Quartic, &m, &q, 0.3, 2).unwrap(), Quartic.value(&q));
    let tau: f64 = 0.2;
    let series = 1.0 + tau.powi(2) / 12.0 + tau.powi(4) / 120.0 + 17.0 * tau.powi(6) / 20160.0;
    let v = v_eff(&Harmonic::new(1.0), &m, &q, tau, 8).unwrap();
    assert_relative_eq!(v, 0.5 * 0.81 * series, max_relative = 1e-14);
    let v = v_eff(&Quartic, &m, &s(1.0), 0.1, 4).unwrap();
    assert_relative_eq!(v, 0.25 + 0.01 / 24.0, max_relative = 1e-14);
    assert_eq!(v_eff(&Quartic, &m, &q, 0.1, 5), Err(Error::UnsupportedOrder(5)));
}

#[test]
fn generating_function_examples() {
    let m = MassMatrix::diagonal(&[2.0, 0.5]).unwrap();
    let quad = Quadratic::new(dmatrix![1.0, 0.3; 0.3, 2.0]).unwrap();
    let q = DVector::from_vec(vec![0.4, -0.2]);
    let big_p = DVector::from_vec(vec![1.1, 0.7]);
    for order in [2, 4, 6, 8] {
        let g = generating_function(&quad, &m, &q, &big_p, 0.0, order).unwrap();
        assert_eq!(g, q.dot(&big_p));
        let (gq, gp) = grad_generating_function(&quad, &m, &q, &big_p, 0.0, order).unwrap();
        assert_eq!(gq, big_p);
        assert_eq!(gp, q);
    }
    let tau = 0.3;
    let (gq, gp) = grad_generating_function(&quad, &m, &q, &big_p, tau, 2).unwrap();
    assert_eq!(gq, big_p);
    assert_eq!(gp, &q + m.matrix() * &big_p * tau);

    // Harmonic, order 4: G = qP + ½P²τ − P²τ³/12 because 𝒟³V vanishes.
    let h = Harmonic::new(1.0);
    let (q, big_p, tau) = (0.6, -1.3, 0.2);
    let g = generating_function(&h, &unit(), &s(q), &s(big_p), tau, 4).unwrap();
    let expected = q * big_p + 0.5 * big_p * big_p * tau - big_p * big_p * tau.powi(3) / 12.0;
    assert_relative_eq!(g, expected, max_relative = 1e-15);
}

/// Harmonic reduction of the correction generators to the modified
/// coefficients `sin τ/τ` and `(2/τ) tan(τ/2)`.
#[test]
fn harmonic_series_reduction() {
    let m = unit();
    let h = Harmonic::new(1.0);
    let (q, p, tau) = (0.8, 1.3, 1.0);
    let kinetic = [(2, -1.0 / 6.0), (4, 1.0 / 120.0), (6, -1.0 / 5040.0)];
    let potential = [(2, 1.0 / 12.0), (4, 1.0 / 120.0), (6, 17.0 / 20160.0)];
    for (n, c) in kinetic {
        let t = kinetic_correction(n, &h, &m, &s(q), &s(p), tau).unwrap() / (0.5 * p * p);
        assert_relative_eq!(t, c, max_relative = 1e-12);
    }
    for (n, c) in potential {
        let v = potential_correction(n, &h, &m, &s(q), tau).unwrap() / (0.5 * q * q);
        assert_relative_eq!(v, c, max_relative = 1e-12);
    }
}

fn random_potentials() -> Vec<Box<dyn Potential>> {
    vec![
        Box::new(Quartic),
        Box::new(Harmonic::new(1.4)),
        Box::new(Polynomial1D::new(vec![0.0, 0.1, 0.5, -0.2, 0.3, 0.05, -0.01, 0.002, 1e-3])),
    ]
}

fn all_words() -> Vec<OperatorWord> {
    GeneratorTable::standard()
        .iter()
        .flat_map(|g| g.terms().iter().map(|(_, w)| w.clone()))
        .collect()
}

/// Fourth-order central difference of `f` at `x` along `dir`.
fn fd(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, dir: &DVector<f64>, h: f64) -> f64 {
    let at = |t: f64| f(&(x + dir * t));
    (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
}

/// Componentwise agreement relative to the larger of the gradient and the
/// function value (words that nearly cancel have tiny gradients).
fn check_gradient(exact: &DVector<f64>, f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) {
    let n = x.len();
    let scale = exact.amax().max(f(x).abs()).max(1e-8);
    for i in 0..n {
        let e = DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
        let approx = fd(f, x, &e, 1e-3 * x[i].abs().clamp(1e-2, 1.0));
        assert!(
            (exact[i] - approx).abs() <= 1e-6 * scale,
            "component {i}: exact {} vs fd {approx} at x={x:?} f={}",
            exact[i],
            f(x)
        );
    }
}

#[test]
fn word_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = MassMatrix::scalar(0.8).unwrap();
    for v in random_potentials() {
        for word in all_words() {
            for _ in 0..5 {
                let q = s(rng.gen_range(-1.5..1.5));
                let mom = s(rng.gen_range(-1.5..1.5));
                let gq = grad_word_q(&word, v.as_ref(), &m, &q, &mom).unwrap();
                let gm = grad_word_mom(&word, v.as_ref(), &m, &q, &mom).unwrap();
                check_gradient(&gq, &|x| apply_word(&word, v.as_ref(), &m, x, &mom).unwrap(), &q);
                check_gradient(&gm, &|x| apply_word(&word, v.as_ref(), &m, &q, x).unwrap(), &mom);
            }
        }
    }
}

#[test]
fn word_gradients_match_finite_differences_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = MassMatrix::new(dmatrix![1.2, 0.3; 0.3, 0.7]).unwrap();
    let quad = Quadratic::new(dmatrix![2.0, -0.4; -0.4, 1.0]).unwrap();
    for word in all_words() {
        let q = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let mom = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let gq = grad_word_q(&word, &quad, &m, &q, &mom).unwrap();
        let gm = grad_word_mom(&word, &quad, &m, &q, &mom).unwrap();
        check_gradient(&gq, &|x| apply_word(&word, &quad, &m, x, &mom).unwrap(), &q);
        check_gradient(&gm, &|x| apply_word(&word, &quad, &m, &q, x).unwrap(), &mom);
    }
}

#[test]
fn words_are_homogeneous_in_momentum() {
    let m = unit();
    let lambda: f64 = -1.7;
    for word in all_words() {
        let base = apply_word(&word, &Quartic, &m, &s(0.9), &s(0.6)).unwrap();
        let scaled = apply_word(&word, &Quartic, &m, &s(0.9), &s(0.6 * lambda)).unwrap();
        let k = word.momentum_degree() as i32;
        assert_relative_eq!(scaled, lambda.powi(k) * base, max_relative = 1e-13, epsilon = 1e-14);
    }
}

/// The 1-D monomial collapse and the tree evaluation are independent routes
/// to the same numbers.
#[test]
fn scalar_forms_agree_with_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let metric = 1.3;
    let m = MassMatrix::scalar(metric).unwrap();
    for v in random_potentials() {
        for g in GeneratorTable::standard().iter() {
            for _ in 0..5 {
                let q = rng.gen_range(-1.5..1.5);
                let mom = rng.gen_range(-1.5..1.5);
                let mut d = [0.0; DERIV_SLOTS];
                v.derivatives_1d(q, &mut d);
                let at = ScalarPoint::new(d, metric);
                let (qv, mv) = (s(q), s(mom));
                let ctx = EvalContext::new(v.as_ref(), &m, &qv, &mv);
                let tree_value = g.expanded().value(&ctx);
                let (tq, tm) = g.expanded().gradients(&ctx);
                let sf = g.scalar();
                assert_relative_eq!(sf.value.eval(&at, mom), tree_value, max_relative = 1e-12, epsilon = 1e-13);
                assert_relative_eq!(sf.d_q.eval(&at, mom), tq[0], max_relative = 1e-12, epsilon = 1e-13);
                assert_relative_eq!(sf.d_mom.eval(&at, mom), tm[0], max_relative = 1e-12, epsilon = 1e-13);
            }
        }
    }
}

#[test]
fn generating_function_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = unit();
    for order in [4, 6, 8] {
        for _ in 0..10 {
            let q = s(rng.gen_range(-1.5..1.5));
            let big_p = s(rng.gen_range(-1.5..1.5));
            let tau = 0.2;
            let (gq, gp) = grad_generating_function(&Quartic, &m, &q, &big_p, tau, order).unwrap();
            check_gradient(&gq, &|x| generating_function(&Quartic, &m, x, &big_p, tau, order).unwrap(), &q);
            check_gradient(&gp, &|x| generating_function(&Quartic, &m, &q, x, tau, order).unwrap(), &big_p);
        }
    }
}
