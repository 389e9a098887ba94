//! Time-stepping schemes.
//!
//! All kick–move–kick variants share one shape: a half kick with the
//! corrected potential `V_eff`, a full move with the corrected kinetic term
//! `T_eff`, and a second half kick. The correction polynomials always use the
//! full step `τ`, even inside the half kicks. The move step for orders above
//! two is the canonical transformation generated by `G(q, P; τ)`:
//! `p = ∂G/∂q` is solved for `P` by Newton iteration and `Q = ∂G/∂P`.

mod config;
pub mod harmonic;

pub use config::{NewtonSettings, SchemeConfig, StepReport, Variant};
pub use harmonic::{exact_quadratic_step, harmonic_modified_coeffs, Convention, NormalModes};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::{check_dim, MassMatrix, PhasePoint, Potential};
use crate::operators::scalar::{horner, ScalarPoint, ScalarPoly, DERIV_SLOTS, MAX_MOM_POWER};
use crate::operators::table::{GeneratorTable, ScalarForms};
use crate::operators::{grad_generating_function, grad_v_eff};

/// Evaluation strategy for the corrected kick and move of one scheme order
/// and step size.
enum Kernel {
    /// One degree of freedom: collapsed monomial sums.
    Scalar {
        metric: f64,
        kick: Vec<(&'static ScalarPoly, f64)>,
        gfun: Vec<(&'static ScalarForms, f64)>,
    },
    /// General dimension: contraction trees.
    Trees,
}

impl Kernel {
    fn new(potential: &dyn Potential, mass: &MassMatrix, order: usize, tau: f64, fast_1d: bool) -> Result<Self> {
        let table = GeneratorTable::standard();
        let metric = match mass.as_scalar() {
            Some(m) if fast_1d && potential.dim() == 1 => m,
            _ => return Ok(Kernel::Trees),
        };
        let kick = GeneratorTable::correction_orders(order)?
            .map(|n| Ok((&table.potential(n)?.scalar().d_q, tau.powi(n as i32))))
            .collect::<Result<Vec<_>>>()?;
        let gfun = GeneratorTable::gfun_orders(order)?
            .map(|n| Ok((table.gfun(n)?.scalar(), tau.powi(n as i32))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Kernel::Scalar { metric, kick, gfun })
    }

    fn derivatives(potential: &dyn Potential, q: f64) -> [f64; DERIV_SLOTS] {
        let mut d = [0.0; DERIV_SLOTS];
        potential.derivatives_1d(q, &mut d);
        d
    }

    fn grad_v_eff(
        &self,
        potential: &dyn Potential,
        mass: &MassMatrix,
        q: &DVector<f64>,
        tau: f64,
        order: usize,
    ) -> Result<DVector<f64>> {
        match self {
            Kernel::Scalar { metric, kick, .. } => {
                let d = Self::derivatives(potential, q[0]);
                let at = ScalarPoint::new(d, *metric);
                let g = kick.iter().fold(d[1], |acc, (poly, w)| acc + w * poly.eval(&at, 0.0));
                Ok(DVector::from_element(1, g))
            }
            Kernel::Trees => grad_v_eff(potential, mass, q, tau, order),
        }
    }

    /// Increments `(ΔQ, ΔP)` of the move step from `(q, p)`.
    fn move_increment(
        &self,
        x: &PhasePoint,
        tau: f64,
        potential: &dyn Potential,
        mass: &MassMatrix,
        order: usize,
        newton: &NewtonSettings,
    ) -> Result<(DVector<f64>, DVector<f64>, StepReport)> {
        match self {
            Kernel::Scalar { metric, gfun, .. } => {
                let (q, p) = (x.q[0], x.p[0]);
                let at = ScalarPoint::new(Self::derivatives(potential, q), *metric);
                // p = ∂G/∂q = P + s(P), solved for ΔP = P − p so that the
                // increment never passes through a rounded absolute value.
                let mut s = [0.0; MAX_MOM_POWER + 1];
                for (forms, w) in gfun {
                    forms.d_q.accumulate(&at, *w, &mut s);
                }
                let mut dp = 0.0;
                let mut iterations = 0;
                // Same stopping rule as `newton_trees`.
                let mut polished = false;
                let res = loop {
                    let (v, slope) = horner(&s, p + dp);
                    let r = dp + v;
                    if !r.is_finite() {
                        return Err(Error::NewtonDiverged { iterations, residual: r.abs() });
                    }
                    if r.abs() <= newton.tol && (iterations == 0 || polished) {
                        break r.abs();
                    }
                    if r.abs() <= newton.tol {
                        polished = true;
                    }
                    if iterations == newton.max_iter {
                        return Err(Error::NewtonDiverged { iterations, residual: r.abs() });
                    }
                    dp -= r / (1.0 + slope);
                    iterations += 1;
                };
                let mut position = [0.0; MAX_MOM_POWER + 1];
                for (forms, w) in gfun {
                    forms.d_mom.accumulate(&at, *w, &mut position);
                }
                let big_p = p + dp;
                let dq = tau * metric * big_p + horner(&position, big_p).0;
                Ok((
                    DVector::from_element(1, dq),
                    DVector::from_element(1, dp),
                    StepReport {
                        newton_iterations: iterations,
                        newton_residual: res,
                    },
                ))
            }
            Kernel::Trees => {
                let (y, report) = newton_trees(x, tau, potential, mass, order, newton)?;
                Ok((y.q - &x.q, y.p - &x.p, report))
            }
        }
    }

    fn solve_move(
        &self,
        x: &PhasePoint,
        tau: f64,
        potential: &dyn Potential,
        mass: &MassMatrix,
        order: usize,
        newton: &NewtonSettings,
    ) -> Result<(PhasePoint, StepReport)> {
        let (dq, dp, report) = self.move_increment(x, tau, potential, mass, order, newton)?;
        Ok((
            PhasePoint {
                q: &x.q + dq,
                p: &x.p + dp,
            },
            report,
        ))
    }
}

/// Newton iteration for `p = ∂G/∂q(q, P)` with a central-difference Jacobian.
///
/// Once the residual is within tolerance one more update is taken (unless
/// the initial guess was already accepted). A residual left just under the
/// tolerance has a consistent sign from step to step and shows up as a
/// linear energy drift over long runs; the extra update brings it to
/// roundoff.
fn newton_trees(
    x: &PhasePoint,
    tau: f64,
    potential: &dyn Potential,
    mass: &MassMatrix,
    order: usize,
    newton: &NewtonSettings,
) -> Result<(PhasePoint, StepReport)> {
    let n = x.dim();
    let residual = |big_p: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(grad_generating_function(potential, mass, &x.q, big_p, tau, order)?.0 - &x.p)
    };
    let mut big_p = x.p.clone();
    let mut iterations = 0;
    let mut polished = false;
    let res = loop {
        let r = residual(&big_p)?;
        let norm = r.amax();
        if !norm.is_finite() {
            return Err(Error::NewtonDiverged { iterations, residual: norm });
        }
        if norm <= newton.tol && (iterations == 0 || polished) {
            break norm;
        }
        if norm <= newton.tol {
            polished = true;
        }
        if iterations == newton.max_iter {
            return Err(Error::NewtonDiverged { iterations, residual: norm });
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * big_p[j].abs().max(1.0);
            let mut plus = big_p.clone();
            plus[j] += h;
            let mut minus = big_p.clone();
            minus[j] -= h;
            let col = (residual(&plus)? - residual(&minus)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let delta = jac
            .lu()
            .solve(&r)
            .ok_or(Error::NewtonDiverged { iterations, residual: norm })?;
        big_p -= delta;
        iterations += 1;
    };
    let big_q = grad_generating_function(potential, mass, &x.q, &big_p, tau, order)?.1;
    Ok((
        PhasePoint { q: big_q, p: big_p },
        StepReport {
            newton_iterations: iterations,
            newton_residual: res,
        },
    ))
}

fn check_state(x: &PhasePoint, potential: &dyn Potential, mass: &MassMatrix) -> Result<()> {
    check_dim(potential.dim(), x.dim())?;
    check_dim(mass.dim(), x.dim())
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidTimestep(tau))
    }
}

/// Kick by `h` with the corrected potential of a scheme with full step
/// `tau_full`: `p ← p − h ∇V_eff(q)`.
pub fn kick(
    x: &PhasePoint,
    h: f64,
    potential: &dyn Potential,
    mass: &MassMatrix,
    tau_full: f64,
    scheme_order: usize,
) -> Result<PhasePoint> {
    check_state(x, potential, mass)?;
    check_tau(h)?;
    check_tau(tau_full)?;
    let g = grad_v_eff(potential, mass, &x.q, tau_full, scheme_order)?;
    Ok(PhasePoint {
        q: x.q.clone(),
        p: &x.p - g * h,
    })
}

/// Free streaming `q ← q + τ M p`.
pub fn move_explicit(x: &PhasePoint, tau: f64, mass: &MassMatrix) -> Result<PhasePoint> {
    check_dim(mass.dim(), x.dim())?;
    Ok(drift(x, tau, mass))
}

fn drift(x: &PhasePoint, tau: f64, mass: &MassMatrix) -> PhasePoint {
    PhasePoint {
        q: &x.q + mass.raise(&x.p) * tau,
        p: x.p.clone(),
    }
}

/// Symplectic move step of the corrected kinetic term, through the
/// generating function. Order 2 reduces to [`move_explicit`].
pub fn move_generating(
    x: &PhasePoint,
    tau: f64,
    potential: &dyn Potential,
    mass: &MassMatrix,
    scheme_order: usize,
    newton: &NewtonSettings,
) -> Result<(PhasePoint, StepReport)> {
    check_state(x, potential, mass)?;
    check_tau(tau)?;
    crate::operators::table::check_scheme_order(scheme_order)?;
    if scheme_order == 2 {
        return Ok((drift(x, tau, mass), StepReport::default()));
    }
    Kernel::new(potential, mass, scheme_order, tau, newton.fast_1d)?.solve_move(x, tau, potential, mass, scheme_order, newton)
}

/// One step of `cfg` from `x`.
pub fn step(x: &PhasePoint, cfg: &SchemeConfig, potential: &dyn Potential, mass: &MassMatrix) -> Result<(PhasePoint, StepReport)> {
    Integrator::new(*cfg, potential, mass)?.step(x)
}

/// Runs `n_steps` of `cfg` from `x0`, calling `observer` for the initial
/// state (step 0) and after every step.
pub fn integrate<F>(
    x0: &PhasePoint,
    cfg: &SchemeConfig,
    potential: &dyn Potential,
    mass: &MassMatrix,
    n_steps: usize,
    observer: F,
) -> Result<PhasePoint>
where
    F: FnMut(&StepRecord<'_>),
{
    Integrator::new(*cfg, potential, mass)?.integrate(x0, n_steps, observer)
}

/// What an observer sees after each step.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<'a> {
    pub step: usize,
    pub time: f64,
    pub state: &'a PhasePoint,
    pub report: StepReport,
}

enum Plan {
    Split { order: usize, kernel: Kernel },
    MoveKickMove,
    Exact { modes: NormalModes, coeffs: Vec<(f64, f64)> },
}

/// A configured scheme bound to a potential and metric, with all per-step
/// tables precomputed.
pub struct Integrator<'a> {
    cfg: SchemeConfig,
    potential: &'a dyn Potential,
    mass: &'a MassMatrix,
    plan: Plan,
}

impl<'a> Integrator<'a> {
    pub fn new(cfg: SchemeConfig, potential: &'a dyn Potential, mass: &'a MassMatrix) -> Result<Self> {
        cfg.validate()?;
        check_dim(potential.dim(), mass.dim())?;
        let plan = match cfg.variant {
            Variant::BaselineKmk => Plan::Split {
                order: 2,
                kernel: Kernel::new(potential, mass, 2, cfg.tau, cfg.fast_1d)?,
            },
            Variant::CorrectedKmk(order) => Plan::Split {
                order,
                kernel: Kernel::new(potential, mass, order, cfg.tau, cfg.fast_1d)?,
            },
            Variant::BaselineMkm => Plan::MoveKickMove,
            Variant::ExactQuadratic => {
                let k = potential.stiffness().ok_or(Error::NotQuadratic)?;
                let modes = NormalModes::new(mass, &k)?;
                let coeffs = modes.coefficients(cfg.tau)?;
                Plan::Exact { modes, coeffs }
            }
        };
        Ok(Integrator {
            cfg,
            potential,
            mass,
            plan,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential
    }

    pub fn mass(&self) -> &MassMatrix {
        self.mass
    }

    fn kick_increment(&self, q: &DVector<f64>, h: f64, order: usize, kernel: &Kernel) -> Result<DVector<f64>> {
        Ok(kernel.grad_v_eff(self.potential, self.mass, q, self.cfg.tau, order)? * -h)
    }

    fn plain_kick_increment(&self, q: &DVector<f64>, h: f64) -> DVector<f64> {
        self.potential.gradient(q) * -h
    }

    fn move_increment(&self, acc: &Accumulator, order: usize, kernel: &Kernel) -> Result<(DVector<f64>, DVector<f64>, StepReport)> {
        if order == 2 {
            let dq = self.mass.raise(&acc.x.p) * self.cfg.tau;
            Ok((dq, DVector::zeros(acc.x.dim()), StepReport::default()))
        } else {
            kernel.move_increment(&acc.x, self.cfg.tau, self.potential, self.mass, order, &self.cfg.newton())
        }
    }

    /// Advances `acc` by one full step.
    fn advance(&self, acc: &mut Accumulator) -> Result<StepReport> {
        let tau = self.cfg.tau;
        match &self.plan {
            Plan::Split { order, kernel } => {
                acc.add_p(&self.kick_increment(&acc.x.q, 0.5 * tau, *order, kernel)?);
                let (dq, dp, report) = self.move_increment(acc, *order, kernel)?;
                acc.add_q(&dq);
                acc.add_p(&dp);
                acc.add_p(&self.kick_increment(&acc.x.q, 0.5 * tau, *order, kernel)?);
                Ok(report)
            }
            Plan::MoveKickMove => {
                acc.add_q(&(self.mass.raise(&acc.x.p) * (0.5 * tau)));
                acc.add_p(&self.plain_kick_increment(&acc.x.q, tau));
                acc.add_q(&(self.mass.raise(&acc.x.p) * (0.5 * tau)));
                Ok(StepReport::default())
            }
            Plan::Exact { modes, coeffs } => {
                let y = modes.step_with(&acc.x, tau, coeffs);
                acc.add_q(&(y.q - &acc.x.q));
                acc.add_p(&(y.p - &acc.x.p));
                Ok(StepReport::default())
            }
        }
    }

    pub fn step(&self, x: &PhasePoint) -> Result<(PhasePoint, StepReport)> {
        check_state(x, self.potential, self.mass)?;
        let mut acc = Accumulator::new(x);
        let report = self.advance(&mut acc)?;
        Ok((acc.x, report))
    }

    /// Runs `n_steps` steps, reporting step 0 (the initial state) and every
    /// step after it to `observer`. Errors carry the failing step index.
    ///
    /// Updates are applied with compensated summation carried across steps,
    /// so roundoff in long runs grows like a random walk rather than
    /// linearly.
    pub fn integrate<F>(&self, x0: &PhasePoint, n_steps: usize, mut observer: F) -> Result<PhasePoint>
    where
        F: FnMut(&StepRecord<'_>),
    {
        check_state(x0, self.potential, self.mass)?;
        let mut acc = Accumulator::new(x0);
        observer(&StepRecord {
            step: 0,
            time: 0.0,
            state: &acc.x,
            report: StepReport::default(),
        });
        for i in 1..=n_steps {
            let report = self.advance(&mut acc).map_err(|e| Error::StepFailed {
                step: i,
                source: Box::new(e),
            })?;
            observer(&StepRecord {
                step: i,
                time: i as f64 * self.cfg.tau,
                state: &acc.x,
                report,
            });
        }
        Ok(acc.x)
    }

    /// Like [`Integrator::integrate`] without an observer: the trailing half
    /// kick of each step is merged with the leading half kick of the next
    /// (and likewise the half moves of move–kick–move).
    pub fn integrate_fused(&self, x0: &PhasePoint, n_steps: usize) -> Result<PhasePoint> {
        check_state(x0, self.potential, self.mass)?;
        if n_steps == 0 {
            return Ok(x0.clone());
        }
        let tau = self.cfg.tau;
        let wrap = |i: usize| move |e: Error| Error::StepFailed { step: i, source: Box::new(e) };
        let mut acc = Accumulator::new(x0);
        match &self.plan {
            Plan::Split { order, kernel } => {
                acc.add_p(&self.kick_increment(&acc.x.q, 0.5 * tau, *order, kernel).map_err(wrap(1))?);
                for i in 1..=n_steps {
                    let (dq, dp, _) = self.move_increment(&acc, *order, kernel).map_err(wrap(i))?;
                    acc.add_q(&dq);
                    acc.add_p(&dp);
                    let h = if i == n_steps { 0.5 * tau } else { tau };
                    acc.add_p(&self.kick_increment(&acc.x.q, h, *order, kernel).map_err(wrap(i))?);
                }
            }
            Plan::MoveKickMove => {
                acc.add_q(&(self.mass.raise(&acc.x.p) * (0.5 * tau)));
                for i in 1..=n_steps {
                    acc.add_p(&self.plain_kick_increment(&acc.x.q, tau));
                    let h = if i == n_steps { 0.5 * tau } else { tau };
                    acc.add_q(&(self.mass.raise(&acc.x.p) * h));
                }
            }
            Plan::Exact { .. } => {
                for i in 1..=n_steps {
                    self.advance(&mut acc).map_err(wrap(i))?;
                }
            }
        }
        Ok(acc.x)
    }
}

/// A phase point plus Kahan compensation terms for each coordinate.
struct Accumulator {
    x: PhasePoint,
    carry_q: DVector<f64>,
    carry_p: DVector<f64>,
}

impl Accumulator {
    fn new(x: &PhasePoint) -> Self {
        let n = x.dim();
        Accumulator {
            x: x.clone(),
            carry_q: DVector::zeros(n),
            carry_p: DVector::zeros(n),
        }
    }

    fn add_q(&mut self, d: &DVector<f64>) {
        kahan_add(&mut self.x.q, &mut self.carry_q, d);
    }

    fn add_p(&mut self, d: &DVector<f64>) {
        kahan_add(&mut self.x.p, &mut self.carry_p, d);
    }
}

fn kahan_add(x: &mut DVector<f64>, carry: &mut DVector<f64>, d: &DVector<f64>) {
    for i in 0..x.len() {
        let y = d[i] - carry[i];
        let t = x[i] + y;
        carry[i] = (t - x[i]) - y;
        x[i] = t;
    }
}
