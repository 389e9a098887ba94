use std::collections::VecDeque;

use super::crossings::CrossingTracker;
use crate::hamiltonian::{hamiltonian, MassMatrix, PhasePoint, Potential};
use crate::integrators::{Integrator, SchemeConfig, StepReport};
use crate::{Error, Result};

/// Energy samples over a time window, with `(H − H₀)/τᵐ` alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub scaled: Vec<f64>,
    pub exponent: u32,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs_scaled(&self) -> f64 {
        self.scaled.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

fn scale(h: f64, h0: f64, tau: f64, m: u32) -> f64 {
    (h - h0) / tau.powi(m as i32)
}

/// Records `H` at every step whose time lies in `window`.
pub fn energy_error_trace(
    x0: &PhasePoint,
    cfg: &SchemeConfig,
    potential: &dyn Potential,
    mass: &MassMatrix,
    window: (f64, f64),
    m: u32,
) -> Result<EnergyTrace> {
    let (start, end) = window;
    if !(0.0 <= start && start <= end && end.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid window ({start}, {end})")));
    }
    let tau = cfg.tau;
    let slack = 1e-9 * tau;
    let n = ((end + slack) / tau).floor() as usize;
    let h0 = hamiltonian(x0, potential, mass)?;
    let mut trace = EnergyTrace {
        times: Vec::new(),
        energies: Vec::new(),
        scaled: Vec::new(),
        exponent: m,
    };
    let mut failed = None;
    Integrator::new(*cfg, potential, mass)?.integrate(x0, n, |r| {
        if r.time + slack < start {
            return;
        }
        match hamiltonian(r.state, potential, mass) {
            Ok(h) => {
                trace.times.push(r.time);
                trace.energies.push(h);
                trace.scaled.push(scale(h, h0, tau, m));
            }
            Err(e) => failed = Some(e),
        }
    })?;
    match failed {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

/// Max `|H − H₀|` over each time window, from a single run.
pub fn energy_window_maxima(
    x0: &PhasePoint,
    cfg: &SchemeConfig,
    potential: &dyn Potential,
    mass: &MassMatrix,
    windows: &[(f64, f64)],
) -> Result<Vec<f64>> {
    let end = windows.iter().fold(0.0_f64, |e, w| e.max(w.1));
    let tau = cfg.tau;
    let n = (end / tau).ceil() as usize;
    let h0 = hamiltonian(x0, potential, mass)?;
    let mut maxima = vec![0.0_f64; windows.len()];
    Integrator::new(*cfg, potential, mass)?.integrate(x0, n, |r| {
        let dev = hamiltonian(r.state, potential, mass).map_or(f64::NAN, |h| (h - h0).abs());
        for (m, &(a, b)) in maxima.iter_mut().zip(windows) {
            if r.time >= a && r.time <= b {
                *m = if dev.is_nan() { f64::NAN } else { m.max(dev) };
            }
        }
    })?;
    Ok(maxima)
}

/// A run of consecutive half periods, delimited by zero crossings of the
/// first coordinate. Crossing 0 is the first one seen (at `t = 0` when the
/// run starts from `q = 0`), so half period `j` (1-based) lies between
/// crossings `j − 1` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfPeriodWindow {
    pub first_crossing: usize,
    pub half_periods: usize,
}

impl HalfPeriodWindow {
    pub fn new(first_crossing: usize, half_periods: usize) -> Result<Self> {
        if half_periods == 0 {
            return Err(Error::InvalidInput("window must span at least one half period".into()));
        }
        Ok(HalfPeriodWindow {
            first_crossing,
            half_periods,
        })
    }

    /// First half of period `k` (1-based).
    pub fn first_half_of(k: usize) -> Result<Self> {
        Self::check_period(k)?;
        Self::new(2 * (k - 1), 1)
    }

    /// Last half of period `k` (1-based).
    pub fn last_half_of(k: usize) -> Result<Self> {
        Self::check_period(k)?;
        Self::new(2 * k - 1, 1)
    }

    /// All of period `k` (1-based).
    pub fn whole(k: usize) -> Result<Self> {
        Self::check_period(k)?;
        Self::new(2 * (k - 1), 2)
    }

    fn check_period(k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidInput("periods are numbered from 1".into()));
        }
        Ok(())
    }

    pub fn last_crossing(&self) -> usize {
        self.first_crossing + self.half_periods
    }
}

/// Samples inside a [`HalfPeriodWindow`], tagged with their phase in the
/// window (0 at the opening crossing, 1 at the closing one).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTrace {
    pub window: HalfPeriodWindow,
    pub tau: f64,
    pub exponent: u32,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub phases: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub energies: Vec<f64>,
    pub scaled: Vec<f64>,
    pub newton_iterations: Vec<usize>,
    pub newton_residuals: Vec<f64>,
}

impl WindowTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.scaled.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// `scaled` linearly interpolated at `phase`.
    pub fn scaled_at(&self, phase: f64) -> Option<f64> {
        let i = self.phases.partition_point(|&p| p < phase);
        if i == 0 || i == self.phases.len() {
            return self.phases.iter().position(|&p| p == phase).map(|j| self.scaled[j]);
        }
        let (p0, p1) = (self.phases[i - 1], self.phases[i]);
        let w = (phase - p0) / (p1 - p0);
        Some(self.scaled[i - 1] + w * (self.scaled[i] - self.scaled[i - 1]))
    }
}

/// Steps without any zero crossing before a windowed run gives up.
const MAX_STEPS_WITHOUT_CROSSING: usize = 10_000_000;

struct Sample {
    step: usize,
    time: f64,
    state: PhasePoint,
    energy: f64,
    iterations: usize,
    residual: f64,
}

/// Integrates from `x0` until the window's closing crossing has been
/// located and records every step inside the window.
pub fn window_trace(
    x0: &PhasePoint,
    cfg: &SchemeConfig,
    potential: &dyn Potential,
    mass: &MassMatrix,
    window: HalfPeriodWindow,
    m: u32,
) -> Result<WindowTrace> {
    let integ = Integrator::new(*cfg, potential, mass)?;
    let tau = cfg.tau;
    let h0 = hamiltonian(x0, potential, mass)?;
    let mut tracker = CrossingTracker::new();
    let mut recent: VecDeque<Sample> = VecDeque::with_capacity(4);
    let mut kept: Vec<Sample> = Vec::new();
    let mut seen = 0usize;
    let mut start: Option<f64> = None;
    let mut x = x0.clone();
    let mut since_crossing = 0usize;
    let mut report = StepReport::default();
    let mut step = 0usize;
    let end = loop {
        let time = step as f64 * tau;
        let sample = Sample {
            step,
            time,
            state: x.clone(),
            energy: hamiltonian(&x, potential, mass)?,
            iterations: report.newton_iterations,
            residual: report.newton_residual,
        };
        let found = tracker.push(time, x.q[0]);
        if start.is_some() {
            kept.push(sample);
        } else {
            if recent.len() == 4 {
                recent.pop_front();
            }
            recent.push_back(sample);
        }
        let mut end = None;
        for c in found {
            since_crossing = 0;
            if seen == window.first_crossing {
                start = Some(c.time);
                kept.extend(recent.drain(..).filter(|s| s.time >= c.time));
            }
            if seen == window.last_crossing() {
                end = Some(c.time);
            }
            seen += 1;
        }
        if let Some(e) = end {
            break e;
        }
        since_crossing += 1;
        if since_crossing > MAX_STEPS_WITHOUT_CROSSING {
            return Err(Error::TooFewCrossings(seen));
        }
        step += 1;
        let (next, r) = integ.step(&x).map_err(|e| Error::StepFailed {
            step,
            source: Box::new(e),
        })?;
        x = next;
        report = r;
    };
    let t_start = start.expect("window opens before it closes");
    kept.retain(|s| s.time <= end);
    let span = end - t_start;
    let mut trace = WindowTrace {
        window,
        tau,
        exponent: m,
        t_start,
        t_end: end,
        steps: Vec::with_capacity(kept.len()),
        times: Vec::with_capacity(kept.len()),
        phases: Vec::with_capacity(kept.len()),
        states: Vec::with_capacity(kept.len()),
        energies: Vec::with_capacity(kept.len()),
        scaled: Vec::with_capacity(kept.len()),
        newton_iterations: Vec::with_capacity(kept.len()),
        newton_residuals: Vec::with_capacity(kept.len()),
    };
    for s in kept {
        trace.steps.push(s.step);
        trace.times.push(s.time);
        trace.phases.push((s.time - t_start) / span);
        trace.energies.push(s.energy);
        trace.scaled.push(scale(s.energy, h0, tau, m));
        trace.states.push(s.state);
        trace.newton_iterations.push(s.iterations);
        trace.newton_residuals.push(s.residual);
    }
    Ok(trace)
}

/// How closely two scaled traces collapse onto each other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseReport {
    /// Ratio of the two peaks, other over reference.
    pub peak_ratio: f64,
    /// Extremes of the pointwise ratio at reference phases where the
    /// reference is at least a tenth of its peak.
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub points: usize,
}

impl CollapseReport {
    /// All ratios within `[1/factor, factor]`.
    pub fn within(&self, factor: f64) -> bool {
        let ok = |r: f64| r >= 1.0 / factor && r <= factor;
        self.points > 0 && ok(self.peak_ratio) && ok(self.min_ratio) && ok(self.max_ratio)
    }
}

const COLLAPSE_FLOOR: f64 = 0.1;

/// Compares `other` against `reference` at the reference's phases.
/// Near zeros of the reference a ratio says nothing, so only points above
/// a tenth of its peak are compared; the peak ratio covers the overall
/// scale.
pub fn collapse_ratio(reference: &WindowTrace, other: &WindowTrace) -> CollapseReport {
    let peak = reference.peak();
    let mut report = CollapseReport {
        peak_ratio: other.peak() / peak,
        min_ratio: f64::INFINITY,
        max_ratio: f64::NEG_INFINITY,
        points: 0,
    };
    for (&phase, &value) in reference.phases.iter().zip(&reference.scaled) {
        if value.abs() < COLLAPSE_FLOOR * peak {
            continue;
        }
        if let Some(v) = other.scaled_at(phase) {
            let r = v / value;
            report.min_ratio = report.min_ratio.min(r);
            report.max_ratio = report.max_ratio.max(r);
            report.points += 1;
        }
    }
    report
}
