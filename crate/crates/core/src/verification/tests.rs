use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::hamiltonian::{Harmonic, Quartic};

fn unit() -> MassMatrix {
    MassMatrix::identity(1)
}

/// `4·2^{1/4}∫₀^{π/2} dθ/√(1+sin²θ)` by composite Simpson; the integrand
/// is smooth, so this converges quickly.
fn period_by_quadrature() -> f64 {
    let n = 4000;
    let h = 0.5 * PI / n as f64;
    let f = |t: f64| 1.0 / (1.0 + t.sin().powi(2)).sqrt();
    let mut sum = f(0.0) + f(0.5 * PI);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    4.0 * 2.0_f64.powf(0.25) * sum * h / 3.0
}

/// The period integral in its original form, `4∫₀^{2^{1/4}} √2 dq/√(2−q⁴)`.
/// With `q = 2^{1/4}(1 − s²)` and `u = s²` the integrand becomes
/// `2·2^{1/4}/√(4 − 6u + 4u² − u³)`, which is smooth on `[0, 1]`.
fn period_by_direct_integral() -> f64 {
    let a = 2.0_f64.powf(0.25);
    let n = 2000;
    let h = 1.0 / n as f64;
    let f = |s: f64| {
        let u = s * s;
        2.0 * a / (4.0 - 6.0 * u + 4.0 * u * u - u * u * u).sqrt()
    };
    let mut sum = f(0.0) + f(1.0);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    4.0 * sum * h / 3.0
}

#[test]
fn quartic_period_value() {
    let t = quartic_period();
    assert!((t - 6.236339).abs() < 5e-7, "{t}");
    assert!((t - period_by_quadrature()).abs() < 1e-12);
    assert!((t - period_by_direct_integral()).abs() < 1e-8);
}

#[test]
fn reference_examples() {
    let x = PhasePoint::scalar(0.3, 0.2);
    assert_eq!(reference_solution(&x, &Quartic, &unit(), 0.0).unwrap(), x);

    let y = reference_solution(&PhasePoint::scalar(1.0, 0.0), &Harmonic::new(1.0), &unit(), PI).unwrap();
    assert!(y.max_distance(&PhasePoint::scalar(-1.0, 0.0)) < 1e-12);

    let start = PhasePoint::scalar(0.0, 1.0);
    let y = reference_solution(&start, &Quartic, &unit(), 6.236339).unwrap();
    assert!(y.max_distance(&start) < 1e-5);
    let y = reference_solution(&start, &Quartic, &unit(), quartic_period()).unwrap();
    assert!(y.max_distance(&start) < 1e-12);
}

#[test]
fn reference_is_scheme_independent() {
    let start = PhasePoint::scalar(0.0, 1.0);
    let a = reference_solution_with_order(&start, &Quartic, &unit(), 5.0, 6).unwrap();
    let b = reference_solution_with_order(&start, &Quartic, &unit(), 5.0, 8).unwrap();
    assert!(a.max_distance(&b) < 1e-11, "{}", a.max_distance(&b));
}

#[test]
fn convergence_orders_on_quartic() {
    let start = PhasePoint::scalar(0.0, 1.0);
    let bands = [(Variant::BaselineKmk, 1.6, 2.4), (Variant::CorrectedKmk(4), 3.5, 4.5), (Variant::CorrectedKmk(6), 5.2, 6.8), (Variant::CorrectedKmk(8), 7.2, 8.8)];
    for (variant, lo, hi) in bands {
        let r = measure_convergence_order(variant, &Quartic, &unit(), &start, 5.0, (0.2, 0.1)).unwrap();
        assert!(r.measured_order > lo && r.measured_order < hi, "{variant}: {r:?}");
        assert!(r.tau_coarse > r.tau_fine);
    }
}

#[test]
fn order_measurement_rejects_bad_input() {
    let start = PhasePoint::scalar(0.0, 1.0);
    for pair in [(0.1, 0.2), (0.1, 0.0)] {
        assert!(measure_convergence_order(Variant::BaselineKmk, &Quartic, &unit(), &start, 5.0, pair).is_err());
    }
    let err = measure_convergence_order(Variant::ExactQuadratic, &Harmonic::new(1.0), &unit(), &PhasePoint::scalar(1.0, 0.0), 1.0, (0.2, 0.1))
        .unwrap_err();
    assert!(matches!(err, Error::OrderUnmeasurable(_)), "{err}");
}

#[test]
fn shear_map_is_symplectic() {
    // Free particle: one step is the exact shear (q, p) ↦ (q + τp, p).
    let free = crate::hamiltonian::Polynomial1D::new(vec![0.0]);
    let cfg = SchemeConfig::baseline(0.3).unwrap();
    let d = symplecticity_defect(&cfg, &free, &unit(), &PhasePoint::scalar(0.4, -1.3)).unwrap();
    assert!(d <= 1e-10, "{d}");
}

#[test]
fn corrected_order6_is_symplectic() {
    let cfg = SchemeConfig::corrected(6, 0.1).unwrap();
    let d = symplecticity_defect(&cfg, &Quartic, &unit(), &PhasePoint::scalar(0.5, 0.5)).unwrap();
    assert!(d <= 1e-7, "{d}");
}

#[test]
fn loose_newton_tolerance_breaks_symplecticity() {
    let cfg = SchemeConfig::corrected(6, 0.1).unwrap().with_newton(1e-3, 25);
    let d = symplecticity_defect(&cfg, &Quartic, &unit(), &PhasePoint::scalar(0.5, 0.5)).unwrap();
    assert!(d > 1e-6, "{d}");
}

#[test]
fn every_scheme_is_symplectic_at_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let harmonic = Harmonic::new(1.0);
    let potentials: [&dyn Potential; 2] = [&Quartic, &harmonic];
    for tau in [0.05, 0.1, 0.2] {
        for variant in Variant::ladder() {
            let cfg = SchemeConfig::new(variant, tau).unwrap();
            for pot in potentials {
                for _ in 0..5 {
                    let x = PhasePoint::scalar(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
                    let d = symplecticity_defect(&cfg, pot, &unit(), &x).unwrap();
                    assert!(d <= 1e-7, "{variant} τ={tau}: {d}");
                }
            }
        }
    }
}

fn harmonic_samples(n: usize, dt: f64, phase: f64) -> (Vec<f64>, Vec<f64>) {
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let q = times.iter().map(|t| (t + phase).sin()).collect();
    (q, times)
}

#[test]
fn period_of_sampled_sine() {
    let (q, t) = harmonic_samples(4000, 0.01, 0.3);
    let period = period_estimate(&q, &t).unwrap();
    assert!((period - 2.0 * PI).abs() < 1e-8, "{}", period - 2.0 * PI);
}

#[test]
fn too_few_crossings() {
    let (q, t) = harmonic_samples(700, 0.01, 0.3);
    assert_eq!(period_estimate(&q, &t).unwrap_err(), Error::TooFewCrossings(1));
    assert!(period_estimate(&q[..10], &t[..9]).is_err());
}

#[test]
fn crossings_alternate_and_include_start() {
    let (q, t) = harmonic_samples(1000, 0.01, 0.0);
    let c = crossings(&q, &t).unwrap();
    assert_eq!(c.len(), 4);
    assert!(c[0].upward && c[0].time.abs() < 1e-15);
    for (k, x) in c.iter().enumerate() {
        assert_eq!(x.upward, k % 2 == 0);
        assert!((x.time - k as f64 * PI).abs() < 1e-8);
    }
}

fn quartic_trajectory(cfg: SchemeConfig, periods: f64) -> (Vec<f64>, Vec<f64>) {
    let n = (periods * quartic_period() / cfg.tau).ceil() as usize;
    let (mut q, mut t) = (Vec::new(), Vec::new());
    Integrator::new(cfg, &Quartic, &unit())
        .unwrap()
        .integrate(&PhasePoint::scalar(0.0, 1.0), n, |r| {
            q.push(r.state.q[0]);
            t.push(r.time);
        })
        .unwrap();
    (q, t)
}

#[test]
fn quartic_periods() {
    let (q, t) = quartic_trajectory(SchemeConfig::corrected(8, 0.01).unwrap(), 4.2);
    assert!((period_estimate(&q, &t).unwrap() - 6.236339).abs() < 1e-6);
    let (q, t) = quartic_trajectory(SchemeConfig::corrected(8, 0.05).unwrap(), 16.2);
    assert!((period_estimate(&q, &t).unwrap() - quartic_period()).abs() < 1e-5);
    let (q, t) = quartic_trajectory(SchemeConfig::baseline(0.2).unwrap(), 16.2);
    assert!((period_estimate(&q, &t).unwrap() - quartic_period()).abs() > 1e-3);
}

#[test]
fn exact_scheme_conserves_energy() {
    let cfg = SchemeConfig::new(Variant::ExactQuadratic, 0.3).unwrap();
    let trace = energy_error_trace(&PhasePoint::scalar(1.0, 0.5), &cfg, &Harmonic::new(1.0), &unit(), (0.0, 100.0), 2).unwrap();
    assert_eq!(trace.len(), 334);
    assert!(trace.energies.iter().all(|h| (h - 0.625).abs() < 1e-13));
}

#[test]
fn energy_trace_window_bounds() {
    let cfg = SchemeConfig::baseline(0.1).unwrap();
    let trace = energy_error_trace(&PhasePoint::scalar(0.0, 1.0), &cfg, &Quartic, &unit(), (1.0, 2.0), 2).unwrap();
    assert_eq!(trace.len(), 11);
    assert!((trace.times[0] - 1.0).abs() < 1e-12 && (trace.times[10] - 2.0).abs() < 1e-12);
    assert!(trace.times.windows(2).all(|w| w[1] > w[0]));
    assert!(energy_error_trace(&PhasePoint::scalar(0.0, 1.0), &cfg, &Quartic, &unit(), (2.0, 1.0), 2).is_err());
}

#[test]
fn half_period_windows() {
    assert_eq!(HalfPeriodWindow::last_half_of(16).unwrap(), HalfPeriodWindow::new(31, 1).unwrap());
    assert_eq!(HalfPeriodWindow::first_half_of(257).unwrap().first_crossing, 512);
    assert_eq!(HalfPeriodWindow::whole(3).unwrap().last_crossing(), 6);
    assert!(HalfPeriodWindow::last_half_of(0).is_err());
}

fn window16(cfg: SchemeConfig, m: u32) -> WindowTrace {
    window_trace(&PhasePoint::scalar(0.0, 1.0), &cfg, &Quartic, &unit(), HalfPeriodWindow::last_half_of(16).unwrap(), m).unwrap()
}

#[test]
fn window_trace_covers_requested_half_period() {
    let trace = window16(SchemeConfig::corrected(8, 0.05).unwrap(), 8);
    let period = quartic_period();
    assert!((trace.t_start - 15.5 * period).abs() < 1e-6);
    assert!((trace.t_end - 16.0 * period).abs() < 1e-6);
    assert!(trace.phases[0] >= 0.0 && *trace.phases.last().unwrap() <= 1.0);
    assert!(trace.states.iter().all(|s| s.q[0] <= 1e-12));
    assert!(trace.energies.iter().all(|h| (h - 0.5).abs() < 1e-9));
}

#[test]
fn baseline_trace_collapses() {
    let a = window16(SchemeConfig::baseline(0.1).unwrap(), 2);
    let b = window16(SchemeConfig::baseline(0.05).unwrap(), 2);
    assert!(a.peak() > 1e-2 && a.peak() < 1e-1 * 5.0, "{}", a.peak());
    let r = collapse_ratio(&a, &b);
    assert!(r.within(2.0), "{r:?}");
}

#[test]
fn energy_does_not_drift() {
    let t = quartic_period();
    let cfg = SchemeConfig::corrected(4, 0.1).unwrap();
    let m = energy_window_maxima(&PhasePoint::scalar(0.0, 1.0), &cfg, &Quartic, &unit(), &[(0.0, 10.0 * t), (40.0 * t, 47.0 * t)]).unwrap();
    assert!(m[1] <= 2.0 * m[0], "{m:?}");
}

#[test]
fn fit_recovers_power_law() {
    let taus = [0.2, 0.1, 0.05];
    let errors: Vec<f64> = taus.iter().map(|t: &f64| 3.0 * t.powi(5)).collect();
    assert!((fit_order(&taus, &errors).unwrap() - 5.0).abs() < 1e-12);
    assert!(fit_order(&taus[..1], &errors[..1]).is_err());
    assert!(fit_order(&taus, &[1.0, 0.0, 1.0]).is_err());
}

#[test]
fn t_eff_flow_of_plain_kinetic_is_drift() {
    let x = PhasePoint::scalar(0.3, -0.7);
    let y = t_eff_flow(&x, &Quartic, &unit(), 0.2, 2).unwrap();
    assert!((y.q[0] - (0.3 - 0.14)).abs() < 1e-15 && y.p[0] == -0.7);
}

#[test]
fn implicit_move_local_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let taus = [0.2, 0.1, 0.05];
    for order in [4, 6, 8] {
        for _ in 0..4 {
            // States on the H = 1/2 shell with |p| not small; the leading
            // error coefficient vanishes with p.
            let q: f64 = rng.gen_range(-0.9..0.9);
            let x = PhasePoint::scalar(q, (1.0 - 0.5 * q.powi(4)).sqrt());
            let errors: Vec<f64> = taus.iter().map(|&t| move_local_error(&x, &Quartic, &unit(), t, order).unwrap()).collect();
            let fitted = fit_order(&taus, &errors).unwrap();
            assert!(fitted > order as f64 + 0.5, "order {order} at {x:?}: {fitted}");
        }
    }
}
