//! Partitions of a compact interval and the affine contractions attached to
//! each subinterval.
//!
//! A partition with knots `x_1 < x_2 < … < x_N` carries, for every
//! subinterval `[x_i, x_{i+1}]`, the affine map that sends the whole
//! interval `[x_1, x_N]` onto that subinterval. The slopes
//! `a_i = (x_{i+1} - x_i) / (x_N - x_1)` are positive, smaller than one and
//! sum to one.

use crate::error::{FractalError, Result};

/// Affine contraction `x ↦ a·x + d` mapping the full interval onto one
/// subinterval. Also remembers its domain and image so the inverse can be
/// range-checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    /// Slope; `|a| < 1` for a genuine subinterval.
    pub a: f64,
    /// Intercept.
    pub d: f64,
    dom_lo: f64,
    dom_hi: f64,
    img_lo: f64,
    img_hi: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.a * x + self.d
    }

    /// Image interval `[L(x_1), L(x_N)]`, taken from the defining knots so
    /// adjacent maps tile the interval without rounding gaps.
    pub fn image(&self) -> (f64, f64) {
        (self.img_lo, self.img_hi)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.dom_lo, self.dom_hi)
    }

    /// Inverse map `x ↦ (x - d)/a`, defined on the image subinterval.
    ///
    /// Points more than a relative tolerance outside the image are rejected;
    /// floating-point dust just inside the tolerance is clamped back onto
    /// the domain.
    pub fn inverse(&self, x: f64) -> Result<f64> {
        let tol = 1e-9 * (self.dom_hi - self.dom_lo).abs();
        if x < self.img_lo - tol || x > self.img_hi + tol {
            return Err(FractalError::OutOfRange {
                x,
                lo: self.img_lo,
                hi: self.img_hi,
            });
        }
        let y = (x - self.d) / self.a;
        Ok(y.clamp(self.dom_lo, self.dom_hi))
    }
}

/// Strictly increasing knots plus the derived per-subinterval affine maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    knots: Vec<f64>,
    maps: Vec<AffineMap>,
}

impl Partition {
    /// Builds a partition from raw knots.
    ///
    /// Fails with [`FractalError::TooFewKnots`] for fewer than three knots
    /// and [`FractalError::NonMonotoneKnots`] on duplicates or decreasing
    /// entries.
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 3 {
            return Err(FractalError::TooFewKnots { count: knots.len() });
        }
        for (i, w) in knots.windows(2).enumerate() {
            if !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(FractalError::NonMonotoneKnots { index: i + 1 });
            }
        }
        let lo = knots[0];
        let hi = knots[knots.len() - 1];
        let span = hi - lo;
        let maps = knots
            .windows(2)
            .map(|w| {
                let a = (w[1] - w[0]) / span;
                AffineMap {
                    a,
                    d: w[0] - a * lo,
                    dom_lo: lo,
                    dom_hi: hi,
                    img_lo: w[0],
                    img_hi: w[1],
                }
            })
            .collect();
        Ok(Partition { knots, maps })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of subintervals, `N - 1`.
    pub fn interval_count(&self) -> usize {
        self.maps.len()
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.hi() - self.lo()
    }

    pub fn map(&self, i: usize) -> &AffineMap {
        &self.maps[i]
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.maps.iter().map(|m| m.a)
    }

    /// Index of the subinterval containing `x`.
    ///
    /// Interior knots belong to the subinterval starting at them; the final
    /// knot belongs to the last subinterval. Both one-sided readings of the
    /// self-referential equation agree at knots, so this convention is a
    /// pure bookkeeping choice.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.knots.partition_point(|&k| k <= x);
        n.saturating_sub(1).min(self.maps.len() - 1)
    }
}
