use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which stepping scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Störmer–Verlet, kick–move–kick.
    BaselineKmk,
    /// Störmer–Verlet, move–kick–move.
    BaselineMkm,
    /// Kick–move–kick with correction generators; global order 2, 4, 6 or 8.
    CorrectedKmk(usize),
    /// Normal-mode integrator, exact for quadratic potentials.
    ExactQuadratic,
}

impl Variant {
    /// Global accuracy order; `None` for the exact integrator.
    pub fn order(&self) -> Option<usize> {
        match self {
            Variant::BaselineKmk | Variant::BaselineMkm => Some(2),
            Variant::CorrectedKmk(n) => Some(*n),
            Variant::ExactQuadratic => None,
        }
    }

    /// The four kick–move–kick schemes of increasing order.
    pub fn ladder() -> [Variant; 4] {
        [
            Variant::BaselineKmk,
            Variant::CorrectedKmk(4),
            Variant::CorrectedKmk(6),
            Variant::CorrectedKmk(8),
        ]
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::BaselineKmk => write!(f, "baseline_kmk"),
            Variant::BaselineMkm => write!(f, "baseline_mkm"),
            Variant::CorrectedKmk(n) => write!(f, "corrected_kmk{n}"),
            Variant::ExactQuadratic => write!(f, "exact_quadratic"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// Accepts the display names plus the short forms `baseline`, `kmk`,
    /// `mkm`, `exact`, `correctedN` and `orderN`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let v = match lower.as_str() {
            "baseline_kmk" | "baseline" | "kmk" | "verlet" => Variant::BaselineKmk,
            "baseline_mkm" | "mkm" => Variant::BaselineMkm,
            "exact_quadratic" | "exact" => Variant::ExactQuadratic,
            other => {
                let digits = other
                    .strip_prefix("corrected_kmk")
                    .or_else(|| other.strip_prefix("corrected"))
                    .or_else(|| other.strip_prefix("order"))
                    .ok_or_else(|| Error::InvalidInput(format!("unknown scheme '{s}'")))?;
                let n: usize = digits
                    .trim_start_matches(['_', '-'])
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("unknown scheme '{s}'")))?;
                crate::operators::table::check_scheme_order(n)?;
                Variant::CorrectedKmk(n)
            }
        };
        Ok(v)
    }
}

/// Scheme, timestep and implicit-solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub tau: f64,
    /// Max-norm residual accepted for the implicit move equation.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Use the collapsed polynomial form (with an exact Newton derivative)
    /// for one-dimensional systems. When off, every system goes through the
    /// tree evaluator with a finite-difference Jacobian.
    pub fast_1d: bool,
}

impl SchemeConfig {
    pub const DEFAULT_NEWTON_TOL: f64 = 1e-13;
    pub const DEFAULT_NEWTON_MAX_ITER: usize = 25;

    pub fn new(variant: Variant, tau: f64) -> Result<Self> {
        let cfg = SchemeConfig {
            variant,
            tau,
            newton_tol: Self::DEFAULT_NEWTON_TOL,
            newton_max_iter: Self::DEFAULT_NEWTON_MAX_ITER,
            fast_1d: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn corrected(order: usize, tau: f64) -> Result<Self> {
        Self::new(Variant::CorrectedKmk(order), tau)
    }

    pub fn baseline(tau: f64) -> Result<Self> {
        Self::new(Variant::BaselineKmk, tau)
    }

    pub fn with_newton(mut self, tol: f64, max_iter: usize) -> Self {
        self.newton_tol = tol;
        self.newton_max_iter = max_iter;
        self
    }

    pub fn with_fast_1d(mut self, on: bool) -> Self {
        self.fast_1d = on;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidTimestep(self.tau));
        }
        if let Variant::CorrectedKmk(n) = self.variant {
            crate::operators::table::check_scheme_order(n)?;
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidInput("newton tolerance must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
            fast_1d: self.fast_1d,
        }
    }
}

/// Solver settings for the implicit move step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub fast_1d: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: SchemeConfig::DEFAULT_NEWTON_TOL,
            max_iter: SchemeConfig::DEFAULT_NEWTON_MAX_ITER,
            fast_1d: true,
        }
    }
}

/// Diagnostics from one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub newton_iterations: usize,
    /// Final max-norm residual of the implicit move equation (0 for
    /// explicit steps).
    pub newton_residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!("baseline".parse::<Variant>().unwrap(), Variant::BaselineKmk);
        assert_eq!("mkm".parse::<Variant>().unwrap(), Variant::BaselineMkm);
        assert_eq!("corrected_kmk6".parse::<Variant>().unwrap(), Variant::CorrectedKmk(6));
        assert_eq!("order8".parse::<Variant>().unwrap(), Variant::CorrectedKmk(8));
        assert_eq!("exact".parse::<Variant>().unwrap(), Variant::ExactQuadratic);
        assert!("corrected5".parse::<Variant>().is_err());
        assert!("rk4".parse::<Variant>().is_err());
        for v in Variant::ladder() {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn config_validation() {
        assert_eq!(SchemeConfig::baseline(0.0).unwrap_err(), Error::InvalidTimestep(0.0));
        assert!(SchemeConfig::baseline(-0.1).is_err());
        assert!(SchemeConfig::corrected(3, 0.1).is_err());
        let cfg = SchemeConfig::corrected(8, 0.1).unwrap();
        assert_eq!(cfg.newton_tol, 1e-13);
        assert_eq!(cfg.newton_max_iter, 25);
    }
}
