use std::collections::VecDeque;

use crate::{Error, Result};

/// A zero crossing of the first coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub time: f64,
    pub upward: bool,
}

/// Root of the cubic through four samples, bracketed by samples `i` and
/// `i + 1` of the window. Times are shifted to the left bracket to keep
/// precision late in long runs.
fn cubic_root(window: &[(f64, f64)], i: usize) -> f64 {
    let origin = window[i].0;
    let ts: Vec<f64> = window.iter().map(|(t, _)| t - origin).collect();
    let eval = |s: f64| -> f64 {
        let mut sum = 0.0;
        for (j, &(_, qj)) in window.iter().enumerate() {
            let mut w = qj;
            for (k, &tk) in ts.iter().enumerate() {
                if k != j {
                    w *= (s - tk) / (ts[j] - tk);
                }
            }
            sum += w;
        }
        sum
    };
    let (mut lo, mut hi) = (0.0, ts[i + 1]);
    let rising = window[i + 1].1 > window[i].1;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (eval(mid) > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    origin + 0.5 * (lo + hi)
}

fn crossing_between(a: f64, b: f64) -> Option<bool> {
    match (a > 0.0, b > 0.0) {
        (false, true) => Some(true),
        (true, false) => Some(false),
        _ => None,
    }
}

/// Streaming zero-crossing detector. Each crossing is located by a cubic
/// through the four nearest samples, so it is reported two samples late.
#[derive(Debug, Clone, Default)]
pub struct CrossingTracker {
    window: VecDeque<(f64, f64)>,
    pushed: usize,
}

impl CrossingTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sample; returns any crossings that became locatable.
    pub fn push(&mut self, t: f64, q: f64) -> Vec<Crossing> {
        self.window.push_back((t, q));
        self.pushed += 1;
        if self.window.len() > 4 {
            self.window.pop_front();
        }
        if self.window.len() < 4 {
            return Vec::new();
        }
        let w: Vec<(f64, f64)> = self.window.iter().copied().collect();
        let pairs: &[usize] = if self.pushed == 4 { &[0, 1] } else { &[1] };
        pairs
            .iter()
            .filter_map(|&i| {
                crossing_between(w[i].1, w[i + 1].1).map(|upward| Crossing {
                    time: cubic_root(&w, i),
                    upward,
                })
            })
            .collect()
    }

    /// Crossings in the last interval, which `push` holds back.
    pub fn finish(&self) -> Vec<Crossing> {
        let w: Vec<(f64, f64)> = self.window.iter().copied().collect();
        let n = w.len();
        if n < 2 {
            return Vec::new();
        }
        let start = if n == 4 { 2 } else { 0 };
        (start..n - 1)
            .filter_map(|i| {
                crossing_between(w[i].1, w[i + 1].1).map(|upward| Crossing {
                    time: if n == 4 { cubic_root(&w, i) } else { linear_root(w[i], w[i + 1]) },
                    upward,
                })
            })
            .collect()
    }
}

fn linear_root(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 - a.1 * (b.0 - a.0) / (b.1 - a.1)
}

/// All zero crossings of a sampled signal.
pub fn crossings(q: &[f64], times: &[f64]) -> Result<Vec<Crossing>> {
    if q.len() != times.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: q.len(),
        });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("times must be strictly increasing".into()));
    }
    let mut tracker = CrossingTracker::new();
    let mut out = Vec::new();
    for (&t, &x) in times.iter().zip(q) {
        out.extend(tracker.push(t, x));
    }
    out.extend(tracker.finish());
    Ok(out)
}

/// Mean interval between successive upward zero crossings.
pub fn period_estimate(q: &[f64], times: &[f64]) -> Result<f64> {
    let up: Vec<f64> = crossings(q, times)?.into_iter().filter(|c| c.upward).map(|c| c.time).collect();
    if up.len() < 2 {
        return Err(Error::TooFewCrossings(up.len()));
    }
    Ok((up[up.len() - 1] - up[0]) / (up.len() - 1) as f64)
}
