//! Experiment configuration: command-line flags merged over an optional
//! TOML file, then resolved into a concrete problem.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use symsplit::hamiltonian::{Harmonic, Quadratic, Quartic};
use symsplit::integrators::NormalModes;
use symsplit::verification::quartic_period;
use symsplit::{hamiltonian, MassMatrix, PhasePoint, Potential, SchemeConfig, Variant};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SYMSPLIT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Harmonic,
    Quartic,
    Quadratic,
}

/// Flags shared by every subcommand. Each one can also be set in the
/// `--config` file (same names, `-` or `_` separators); flags win.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// Potential: harmonic, quartic or quadratic (needs --stiffness).
    #[arg(long, value_enum)]
    pub potential: Option<PotentialKind>,
    /// Frequency of the harmonic potential.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Timestep; a comma-separated list for figure and sweep.
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
    /// Corrected scheme order (2, 4, 6 or 8); shorthand for --scheme.
    #[arg(long)]
    pub order: Option<usize>,
    /// Scheme name(s): baseline_kmk, baseline_mkm, corrected_kmkN, exact_quadratic.
    #[arg(long, value_delimiter = ',')]
    pub scheme: Option<Vec<String>>,
    /// Run length in periods of the unperturbed oscillation.
    #[arg(long)]
    pub periods: Option<f64>,
    /// Run length in time units.
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Time window `START:END` of the rows written by run and sweep.
    #[arg(long)]
    pub window: Option<String>,
    /// Output directory (default: $SYMSPLIT_OUT, else the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Parallel jobs for figure, order and sweep.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Allow the full-length figure 5 run.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub long: bool,
    /// Initial positions, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub q0: Option<Vec<f64>>,
    /// Initial momenta, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p0: Option<Vec<f64>>,
    /// Stiffness matrix file for the quadratic potential.
    #[arg(long)]
    pub stiffness: Option<PathBuf>,
    /// Mass (metric) matrix file; identity when absent.
    #[arg(long)]
    pub mass: Option<PathBuf>,
    /// Timestep pair(s) `COARSE:FINE` for the order command.
    #[arg(long, value_delimiter = ',')]
    pub pair: Option<Vec<String>>,
    /// Newton residual tolerance for the implicit move.
    #[arg(long = "newton-tol")]
    pub newton_tol: Option<f64>,
    /// Newton iteration cap.
    #[arg(long = "newton-max-iter")]
    pub newton_max_iter: Option<usize>,
    /// TOML file with any of the options above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Options {
    /// Loads `--config` (if any) and fills every unset flag from it.
    pub fn resolve(self) -> Result<Options, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let normalized = normalize_keys(&text);
        let file: Options = toml::from_str(&normalized).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(self.merge(file))
    }

    fn merge(self, file: Options) -> Options {
        Options {
            potential: self.potential.or(file.potential),
            omega: self.omega.or(file.omega),
            tau: self.tau.or(file.tau),
            order: self.order.or(file.order),
            scheme: self.scheme.or(file.scheme),
            periods: self.periods.or(file.periods),
            t_final: self.t_final.or(file.t_final),
            window: self.window.or(file.window),
            out: self.out.or(file.out),
            jobs: self.jobs.or(file.jobs),
            long: self.long || file.long,
            q0: self.q0.or(file.q0),
            p0: self.p0.or(file.p0),
            stiffness: self.stiffness.or(file.stiffness),
            mass: self.mass.or(file.mass),
            pair: self.pair.or(file.pair),
            newton_tol: self.newton_tol.or(file.newton_tol),
            newton_max_iter: self.newton_max_iter.or(file.newton_max_iter),
            config: self.config,
        }
    }

    /// SHA-256 over the settings that affect results (not output location
    /// or parallelism), tagged with the subcommand.
    pub fn hash(&self, command: &str) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        canonical.jobs = None;
        canonical.config = None;
        let text = toml::to_string(&canonical).unwrap_or_default();
        hex::encode(Sha256::digest(format!("{command}\n{text}").as_bytes()))
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    pub fn jobs(&self) -> Result<usize, CliError> {
        match self.jobs {
            Some(0) => Err(CliError::Config("jobs must be at least 1".into())),
            Some(j) => Ok(j),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    /// Timesteps, validated positive. `default` applies when none is given.
    pub fn taus(&self, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let taus = self.tau.clone().unwrap_or_else(|| default.to_vec());
        if taus.is_empty() {
            return Err(CliError::Config("no timestep given".into()));
        }
        for &t in &taus {
            check_tau(t)?;
        }
        Ok(taus)
    }

    /// Exactly one timestep.
    pub fn single_tau(&self, default: f64) -> Result<f64, CliError> {
        match self.taus(&[default])?.as_slice() {
            [t] => Ok(*t),
            _ => Err(CliError::Config("this command takes a single --tau".into())),
        }
    }

    /// Schemes from `--scheme`, or from `--order`, or `default`.
    pub fn schemes(&self, default: &[Variant]) -> Result<Vec<Variant>, CliError> {
        let from_order = self.order.map(order_variant).transpose()?;
        match (&self.scheme, from_order) {
            (Some(names), order) => {
                let parsed = names
                    .iter()
                    .map(|n| n.parse::<Variant>().map_err(|e| CliError::Usage(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(v) = order {
                    if parsed != [v] {
                        return Err(CliError::Config(format!("--order {} contradicts --scheme", self.order.unwrap_or(0))));
                    }
                }
                Ok(parsed)
            }
            (None, Some(v)) => Ok(vec![v]),
            (None, None) => Ok(default.to_vec()),
        }
    }

    pub fn scheme_config(&self, variant: Variant, tau: f64) -> Result<SchemeConfig, CliError> {
        check_tau(tau)?;
        let mut cfg = SchemeConfig::new(variant, tau)?;
        if self.newton_tol.is_some() || self.newton_max_iter.is_some() {
            cfg = cfg.with_newton(self.newton_tol.unwrap_or(cfg.newton_tol), self.newton_max_iter.unwrap_or(cfg.newton_max_iter));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parsed `--window START:END`, if given.
    pub fn time_window(&self) -> Result<Option<(f64, f64)>, CliError> {
        self.window
            .as_deref()
            .map(|w| {
                let (a, b) = parse_pair(w).ok_or_else(|| CliError::Config(format!("window must be START:END, got {w:?}")))?;
                if !(0.0 <= a && a <= b) {
                    return Err(CliError::Config(format!("window start must be ≥ 0 and ≤ end, got {w:?}")));
                }
                Ok((a, b))
            })
            .transpose()
    }

    /// Parsed `--pair` list; `(0.2, 0.1)` by default.
    pub fn pairs(&self) -> Result<Vec<(f64, f64)>, CliError> {
        let Some(list) = &self.pair else {
            return Ok(vec![(0.2, 0.1)]);
        };
        list.iter()
            .map(|p| {
                let (a, b) = parse_pair(p).ok_or_else(|| CliError::Config(format!("pair must be COARSE:FINE, got {p:?}")))?;
                check_tau(a)?;
                check_tau(b)?;
                if a <= b {
                    return Err(CliError::Config(format!("coarse timestep must exceed fine timestep in {p:?}")));
                }
                Ok((a, b))
            })
            .collect()
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        Problem::from_options(self)
    }
}

/// Accepts `kebab-case` or `snake_case` keys in config files.
fn normalize_keys(text: &str) -> String {
    text.lines()
        .map(|line| match line.split_once('=') {
            Some((key, rest)) if !key.trim_start().starts_with('#') => format!("{}={rest}", key.replace('_', "-")),
            _ => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(':')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

pub fn check_tau(tau: f64) -> Result<(), CliError> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("tau must be positive, got {tau}")))
    }
}

fn order_variant(order: usize) -> Result<Variant, CliError> {
    match order {
        2 => Ok(Variant::BaselineKmk),
        4 | 6 | 8 => Ok(Variant::CorrectedKmk(order)),
        _ => Err(CliError::Config(format!("order must be 2, 4, 6 or 8, got {order}"))),
    }
}

/// Reads a dense matrix: first line `N`, then `N` rows of `N` numbers.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let n: usize = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .parse()
        .map_err(|_| bad("first line must be the dimension N".into()))?;
    if n == 0 {
        return Err(bad("dimension must be positive".into()));
    }
    let mut values = Vec::with_capacity(n * n);
    for (row, line) in lines.enumerate() {
        let parsed: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| bad(format!("bad number {x:?} in row {}", row + 1))))
            .collect::<Result<_, _>>()?;
        if parsed.len() != n {
            return Err(bad(format!("row {} has {} entries, expected {n}", row + 1, parsed.len())));
        }
        values.extend(parsed);
    }
    if values.len() != n * n {
        return Err(bad(format!("expected {n} rows, found {}", values.len() / n)));
    }
    Ok(DMatrix::from_row_slice(n, n, &values))
}

/// A potential, metric and initial state ready to integrate.
#[derive(Debug)]
pub struct Problem {
    pub potential: Box<dyn Potential>,
    pub mass: MassMatrix,
    pub x0: PhasePoint,
    /// Short description for metadata, e.g. `harmonic(omega=2)`.
    pub label: String,
    /// Oscillation period used to convert `--periods` to time, if defined.
    pub period: Option<f64>,
}

impl Problem {
    fn from_options(opts: &Options) -> Result<Problem, CliError> {
        let kind = opts.potential.unwrap_or(if opts.stiffness.is_some() {
            PotentialKind::Quadratic
        } else {
            PotentialKind::Quartic
        });
        let stiffness = match (&opts.stiffness, kind) {
            (Some(path), PotentialKind::Quadratic) => Some(read_matrix(path)?),
            (None, PotentialKind::Quadratic) => return Err(CliError::Config("the quadratic potential needs --stiffness".into())),
            (Some(_), _) => return Err(CliError::Config("--stiffness only applies to the quadratic potential".into())),
            (None, _) => None,
        };
        let dim = match (&stiffness, &opts.q0) {
            (Some(k), _) => k.nrows(),
            (None, Some(q)) if kind == PotentialKind::Harmonic => q.len(),
            _ => 1,
        };
        let mass = match &opts.mass {
            Some(path) => MassMatrix::new(read_matrix(path)?)?,
            None => MassMatrix::identity(dim),
        };
        if mass.dim() != dim {
            return Err(CliError::Config(format!("mass matrix is {}×{0}, problem dimension is {dim}", mass.dim())));
        }
        let q0 = opts.q0.clone().unwrap_or_else(|| vec![0.0; dim]);
        let p0 = opts.p0.clone().unwrap_or_else(|| vec![1.0; dim]);
        if q0.len() != dim || p0.len() != dim {
            return Err(CliError::Config(format!("initial state must have {dim} components")));
        }
        let x0 = PhasePoint::from_slices(&q0, &p0)?;
        let (potential, label): (Box<dyn Potential>, String) = match kind {
            PotentialKind::Quartic => {
                if opts.omega.is_some() {
                    return Err(CliError::Config("--omega only applies to the harmonic potential".into()));
                }
                (Box::new(Quartic), "quartic".into())
            }
            PotentialKind::Harmonic => {
                let omega = opts.omega.unwrap_or(1.0);
                if !(omega.is_finite() && omega > 0.0) {
                    return Err(CliError::Config(format!("omega must be positive, got {omega}")));
                }
                (Box::new(Harmonic::with_dim(omega, dim)), format!("harmonic(omega={omega})"))
            }
            PotentialKind::Quadratic => {
                let k = stiffness.expect("checked above");
                let path = opts.stiffness.as_ref().expect("checked above");
                (Box::new(Quadratic::new(k)?), format!("quadratic({})", path.display()))
            }
        };
        let period = match kind {
            PotentialKind::Quartic => {
                // T scales as E^{-1/4}; the reference value is for E = 1/2.
                let e = hamiltonian(&x0, potential.as_ref(), &mass)?;
                (e > 0.0).then(|| quartic_period() * (2.0 * e).powf(-0.25))
            }
            PotentialKind::Harmonic | PotentialKind::Quadratic => {
                let k = potential.stiffness().expect("quadratic potentials expose stiffness");
                let modes = NormalModes::new(&mass, &k)?;
                let slowest = modes.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
                (slowest > 0.0).then(|| 2.0 * std::f64::consts::PI / slowest.sqrt())
            }
        };
        Ok(Problem {
            potential,
            mass,
            x0,
            label,
            period,
        })
    }

    /// Run length in time units from `--periods` or `--t-final`
    /// (16 periods when neither is given).
    pub fn horizon(&self, opts: &Options) -> Result<f64, CliError> {
        match (opts.periods, opts.t_final) {
            (Some(_), Some(_)) => Err(CliError::Config("give either --periods or --t-final, not both".into())),
            (None, Some(t)) if t.is_finite() && t >= 0.0 => Ok(t),
            (None, Some(t)) => Err(CliError::Config(format!("t-final must be non-negative, got {t}"))),
            (periods, None) => {
                let n = periods.unwrap_or(16.0);
                if !(n.is_finite() && n >= 0.0) {
                    return Err(CliError::Config(format!("periods must be non-negative, got {n}")));
                }
                let period = self
                    .period
                    .ok_or_else(|| CliError::Config("this problem has no oscillation period; use --t-final".into()))?;
                Ok(n * period)
            }
        }
    }
}
