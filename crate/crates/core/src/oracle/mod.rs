//! Brute-force grid oracles for the nested value functions of the DS-GDA
//! analysis. Restricted to problems with scalar `x` and `y`.
//!
//! Every one-dimensional search is a uniform lattice followed by zoom
//! levels; each zoom scans 21 points at a tenth of the current spacing
//! around the incumbent. On a convex (or concave) objective the true optimum
//! stays inside the zoom window, so the positional error is
//! `width / ((resolution - 1) 10^levels)`. Ties go to the smallest
//! coordinate, which makes results independent of evaluation order.

mod lyapunov;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lyapunov::{
    prox_max_argmin, AuxPoints, DescentCertificate, DualBreakdown, DualDescentCertificate,
    ErrorBoundCheck, LyapunovBreakdown, Oracle, OracleConfig, Saddle,
};

/// Lattice resolution and number of zoom levels of a one-dimensional search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub resolution: usize,
    pub levels: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 2001,
            levels: 2,
        }
    }
}

impl GridSpec {
    pub fn new(resolution: usize, levels: usize) -> Result<Self> {
        let g = Self { resolution, levels };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 3 {
            return Err(Error::InvalidParam(format!(
                "grid resolution must be at least 3, got {}",
                self.resolution
            )));
        }
        Ok(())
    }

    /// Positional accuracy on an interval of the given width.
    pub fn accuracy(&self, width: f64) -> f64 {
        width / ((self.resolution - 1) as f64 * 10f64.powi(self.levels as i32))
    }

    /// Same spec with twice the lattice spacing count, for self-consistency
    /// checks.
    pub fn doubled(&self) -> Self {
        Self {
            resolution: 2 * self.resolution - 1,
            levels: self.levels,
        }
    }

    /// `n` evenly spaced points from `lo` to `hi` inclusive.
    pub fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| {
                    if i + 1 == n {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

#[inline]
fn improves(t: f64, v: f64, best: (f64, f64)) -> bool {
    // NaN never improves; a NaN incumbent is always replaced
    !v.is_nan() && (best.1.is_nan() || v < best.1 || (v == best.1 && t < best.0))
}

/// Minimize `f` over `[lo, hi]`; returns `(argmin, min)`.
pub fn grid_argmin(lo: f64, hi: f64, spec: &GridSpec, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let n = spec.resolution.max(3);
    let mut h = (hi - lo) / (n - 1) as f64;
    let mut best = (lo, f(lo));
    for i in 1..n {
        let t = if i + 1 == n { hi } else { lo + h * i as f64 };
        let v = f(t);
        if improves(t, v, best) {
            best = (t, v);
        }
    }
    for _ in 0..spec.levels {
        let centre = best.0;
        let step = h / 10.0;
        for k in -10i32..=10 {
            if k == 0 {
                continue;
            }
            let t = centre + step * k as f64;
            if t < lo || t > hi {
                continue;
            }
            let v = f(t);
            if improves(t, v, best) {
                best = (t, v);
            }
        }
        h = step;
    }
    best
}

/// Maximize `f` over `[lo, hi]`; returns `(argmax, max)`.
pub fn grid_argmax(lo: f64, hi: f64, spec: &GridSpec, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let (t, v) = grid_argmin(lo, hi, spec, |t| -f(t));
    (t, -v)
}
