//! Dense uniform samples of a real function on a compact interval.
//!
//! A `GridFunction` stores `M = 2^m + 1` samples (default `m = 12`) and
//! reads off-grid points by piecewise-linear interpolation, which is
//! non-expansive in the sup norm — the property the fixed-point convergence
//! estimates lean on. Derivative samples may be attached analytically; when
//! absent, derivatives fall back to finite differences.

use std::io::{self, Write};

use crate::error::{FractalError, Result};
use crate::partition::AffineMap;

/// Default dyadic refinement level: 2^12 + 1 = 4097 nodes.
pub const DEFAULT_GRID_LEVEL: u32 = 12;

/// Maximum derivative order handled by the finite-difference operator.
pub const MAX_FD_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
    /// Optional analytic derivative stacks; `derivs[r-1]` holds the r-th
    /// derivative sampled at the nodes.
    derivs: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn from_samples(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if !(lo < hi) || values.len() < 2 {
            return Err(FractalError::SpecInvalid {
                reason: format!(
                    "grid needs lo < hi and at least 2 samples (lo={lo}, hi={hi}, M={})",
                    values.len()
                ),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(FractalError::SpecInvalid {
                reason: format!("non-finite sample {bad} in grid function"),
            });
        }
        Ok(GridFunction {
            lo,
            hi,
            values,
            derivs: Vec::new(),
        })
    }

    /// Samples `f` at `2^m + 1` uniform nodes on `[lo, hi]`.
    pub fn sample(lo: f64, hi: f64, m: u32, f: impl Fn(f64) -> f64) -> Self {
        let n = (1usize << m) + 1;
        let values = (0..n)
            .map(|j| f(node_at(lo, hi, j, n)))
            .collect();
        GridFunction {
            lo,
            hi,
            values,
            derivs: Vec::new(),
        }
    }

    /// Samples a function together with analytic derivatives.
    /// `fns[0]` is the function itself, `fns[r]` its r-th derivative.
    pub fn sample_with_derivs(lo: f64, hi: f64, m: u32, fns: &[&dyn Fn(f64) -> f64]) -> Self {
        assert!(!fns.is_empty(), "need at least the function itself");
        let mut gf = Self::sample(lo, hi, m, fns[0]);
        let n = gf.len();
        gf.derivs = fns[1..]
            .iter()
            .map(|f| (0..n).map(|j| f(node_at(lo, hi, j, n))).collect())
            .collect();
        gf
    }

    pub fn constant(lo: f64, hi: f64, m: u32, c: f64) -> Self {
        Self::sample(lo, hi, m, |_| c)
    }

    /// Attaches analytic derivative stacks; `stacks[r-1]` must hold the
    /// r-th derivative at every node.
    pub fn with_derivs(mut self, stacks: Vec<Vec<f64>>) -> Result<Self> {
        for s in &stacks {
            if s.len() != self.values.len() {
                return Err(FractalError::SpecInvalid {
                    reason: "derivative stack length must match the sample count".into(),
                });
            }
        }
        self.derivs = stacks;
        Ok(self)
    }

    pub fn zeros_like(&self) -> Self {
        GridFunction {
            lo: self.lo,
            hi: self.hi,
            values: vec![0.0; self.values.len()],
            derivs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        node_at(self.lo, self.hi, j, self.values.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.derivs.clear();
        &mut self.values
    }

    /// Number of attached analytic derivative stacks.
    pub fn deriv_stack_depth(&self) -> usize {
        self.derivs.len()
    }

    /// Nearest node index to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let t = (x - self.lo) / self.spacing();
        (t.round() as isize).clamp(0, self.values.len() as isize - 1) as usize
    }

    /// Piecewise-linear interpolation; exact at the nodes.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let tol = 1e-9 * (self.hi - self.lo);
        if x < self.lo - tol || x > self.hi + tol {
            return Err(FractalError::OutOfDomain {
                x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self.eval_clamped(x))
    }

    /// Interpolation with silent clamping onto the domain. Used by the
    /// iteration engine where inverse-map arithmetic can leave dust of
    /// order 1e-16 outside the interval.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = self.spacing();
        let t = (x - self.lo) / h;
        let j = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
        let frac = (t - j as f64).clamp(0.0, 1.0);
        self.values[j] + frac * (self.values[j + 1] - self.values[j])
    }

    /// Reads `self ∘ L⁻¹` at the grid nodes with indices in `targets`.
    /// The target nodes must lie in the image subinterval of `map`.
    pub fn compose_affine_inverse(
        &self,
        map: &AffineMap,
        targets: std::ops::Range<usize>,
    ) -> Result<Vec<f64>> {
        targets
            .map(|j| {
                let y = map.inverse(self.node(j))?;
                self.eval(y)
            })
            .collect()
    }

    /// Composite-trapezoid approximation of `∫ |g|^p` (the integral itself,
    /// before any root).
    pub fn quadrature_p_power(&self, p: f64) -> f64 {
        assert!(p > 0.0, "p must be positive");
        let h = self.spacing();
        let mut acc = 0.0;
        for w in self.values.windows(2) {
            acc += 0.5 * h * (w[0].abs().powf(p) + w[1].abs().powf(p));
        }
        acc
    }

    /// Trapezoid integral of the raw samples.
    pub fn integral(&self) -> f64 {
        let h = self.spacing();
        let mut acc = 0.0;
        for w in self.values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
        }
        acc
    }

    /// Iterated finite differences: central second-order stencils at
    /// interior nodes, one-sided second-order stencils at the boundary.
    pub fn finite_difference(&self, order: usize) -> Result<GridFunction> {
        if order > MAX_FD_ORDER {
            return Err(FractalError::OrderTooHigh {
                order,
                max: MAX_FD_ORDER,
            });
        }
        if self.values.len() < 2 * order + 1 {
            return Err(FractalError::SpecInvalid {
                reason: format!(
                    "grid too coarse for order-{order} differences (M = {})",
                    self.values.len()
                ),
            });
        }
        let mut v = self.values.clone();
        let h = self.spacing();
        for _ in 0..order {
            v = fd_once(&v, h);
        }
        GridFunction::from_samples(self.lo, self.hi, v)
    }

    /// The r-th derivative: analytic samples when a stack is attached,
    /// finite differences otherwise.
    pub fn derivative(&self, order: usize) -> Result<GridFunction> {
        if order == 0 {
            return Ok(self.clone());
        }
        if order <= self.derivs.len() {
            let mut gf = GridFunction::from_samples(self.lo, self.hi, self.derivs[order - 1].clone())?;
            gf.derivs = self.derivs[order..].to_vec();
            return Ok(gf);
        }
        // Differentiate the deepest analytic stack the rest of the way.
        let have = self.derivs.len();
        let base = if have == 0 {
            self.clone()
        } else {
            GridFunction::from_samples(self.lo, self.hi, self.derivs[have - 1].clone())?
        };
        base.finite_difference(order - have)
    }

    pub fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.values.len(), other.values.len(), "grid size mismatch");
        assert!(
            (self.lo - other.lo).abs() < 1e-12 && (self.hi - other.hi).abs() < 1e-12,
            "grid domain mismatch"
        );
        GridFunction {
            lo: self.lo,
            hi: self.hi,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            derivs: Vec::new(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            lo: self.lo,
            hi: self.hi,
            values: self.values.iter().map(|&v| f(v)).collect(),
            derivs: Vec::new(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// CSV dump: header `x,value[,d1,…,dk]`, one row per node, full
    /// round-trip double precision.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(w, "x,value")?;
        for r in 1..=self.derivs.len() {
            write!(w, ",d{r}")?;
        }
        writeln!(w)?;
        for j in 0..self.values.len() {
            write!(w, "{},{}", fmt_full(self.node(j)), fmt_full(self.values[j]))?;
            for stack in &self.derivs {
                write!(w, ",{}", fmt_full(stack[j]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// 17-significant-digit scientific formatting, enough to round-trip f64.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

fn node_at(lo: f64, hi: f64, j: usize, n: usize) -> f64 {
    if j == n - 1 {
        hi
    } else {
        lo + (hi - lo) * j as f64 / (n - 1) as f64
    }
}

fn fd_once(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    // One-sided boundary stencils in difference form (constants map to
    // exact zeros). Third-order stencils keep the truncation-error profile
    // smooth across the boundary, so iterated application stays within
    // second-order accuracy there; the 3-point variant covers tiny grids.
    if n >= 4 {
        out[0] = (18.0 * (v[1] - v[0]) - 9.0 * (v[2] - v[0]) + 2.0 * (v[3] - v[0])) / (6.0 * h);
        out[n - 1] = -(18.0 * (v[n - 2] - v[n - 1]) - 9.0 * (v[n - 3] - v[n - 1])
            + 2.0 * (v[n - 4] - v[n - 1]))
            / (6.0 * h);
    } else {
        out[0] = (4.0 * (v[1] - v[0]) - (v[2] - v[0])) / (2.0 * h);
        out[n - 1] = -(4.0 * (v[n - 2] - v[n - 1]) - (v[n - 3] - v[n - 1])) / (2.0 * h);
    }
    for j in 1..n - 1 {
        out[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;

    const M: u32 = 12;

    #[test]
    fn eval_reproduces_linear_functions() {
        let g = GridFunction::sample(0.0, 1.0, M, |x| x);
        assert!((g.eval(0.3).unwrap() - 0.3).abs() < 1e-15);
        let c = GridFunction::constant(0.0, 1.0, 4, 5.0);
        assert_eq!(c.eval(0.7321).unwrap(), 5.0);
    }

    #[test]
    fn eval_rejects_out_of_domain() {
        let g = GridFunction::sample(0.0, 1.0, 4, |x| x);
        assert!(matches!(
            g.eval(1.5),
            Err(FractalError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn eval_is_linear_in_the_function() {
        let g1 = GridFunction::sample(0.0, 1.0, 8, |x| (3.1 * x).sin());
        let g2 = GridFunction::sample(0.0, 1.0, 8, |x| x * x - 0.3);
        let combo = g1.scale(2.5).add(&g2.scale(-1.75));
        for &x in &[0.0, 0.123, 0.5, 0.77, 1.0] {
            let lhs = combo.eval(x).unwrap();
            let rhs = 2.5 * g1.eval(x).unwrap() - 1.75 * g2.eval(x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn compose_affine_inverse_examples() {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let id = GridFunction::sample(0.0, 1.0, M, |x| x);
        let j = id.nearest_node(0.25);
        let vals = id.compose_affine_inverse(p.map(0), j..j + 1).unwrap();
        assert!((vals[0] - 0.5).abs() < 1e-13);

        let sq = GridFunction::sample(0.0, 1.0, M, |x| x * x);
        let j = sq.nearest_node(0.75);
        let vals = sq.compose_affine_inverse(p.map(1), j..j + 1).unwrap();
        assert!((vals[0] - 0.25).abs() < 1e-13);

        let c = GridFunction::constant(0.0, 1.0, M, 2.5);
        let vals = c.compose_affine_inverse(p.map(0), 0..c.len() / 2).unwrap();
        assert!(vals.iter().all(|v| (*v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn compose_rejects_nodes_outside_image() {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let g = GridFunction::sample(0.0, 1.0, 4, |x| x);
        let last = g.len() - 1;
        assert!(g
            .compose_affine_inverse(p.map(0), last..last + 1)
            .is_err());
    }

    #[test]
    fn quadrature_examples() {
        let one = GridFunction::constant(0.0, 1.0, M, 1.0);
        assert!((one.quadrature_p_power(2.0) - 1.0).abs() < 1e-12);

        let id = GridFunction::sample(0.0, 1.0, M, |x| x);
        assert!((id.quadrature_p_power(1.0) - 0.5).abs() < 1e-10);
        assert!((id.quadrature_p_power(2.0) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn trapezoid_exact_on_signed_affine() {
        // a·x + c with no sign change on [0,1]
        let g = GridFunction::sample(0.0, 1.0, 10, |x| -2.0 * x - 0.5);
        let exact = 1.5; // ∫ |−2x−0.5| = ∫ (2x+0.5) = 1 + 0.5
        assert!((g.quadrature_p_power(1.0) - exact).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_examples() {
        let sq = GridFunction::sample(0.0, 1.0, M, |x| x * x);
        let d = sq.finite_difference(1).unwrap();
        let exact = GridFunction::sample(0.0, 1.0, M, |x| 2.0 * x);
        assert!(d.max_abs_diff(&exact) < 1e-6);

        let c = GridFunction::constant(0.0, 1.0, M, 3.3);
        assert!(c.finite_difference(1).unwrap().sup_norm() < 1e-12);

        let s = GridFunction::sample(0.0, 1.0, M, |x| x.sin());
        let d2 = s.finite_difference(2).unwrap();
        let exact2 = GridFunction::sample(0.0, 1.0, M, |x| -x.sin());
        assert!(d2.max_abs_diff(&exact2) < 1e-4);
    }

    #[test]
    fn finite_difference_exact_on_linear_everywhere() {
        let g = GridFunction::sample(-1.0, 2.0, 6, |x| 4.0 * x - 7.0);
        let d = g.finite_difference(1).unwrap();
        for &v in d.values() {
            assert!((v - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn order_too_high_rejected() {
        let g = GridFunction::sample(0.0, 1.0, 6, |x| x);
        assert!(matches!(
            g.finite_difference(5),
            Err(FractalError::OrderTooHigh { order: 5, max: 4 })
        ));
    }

    #[test]
    fn derivative_prefers_analytic_stack() {
        let g = GridFunction::sample_with_derivs(0.0, 1.0, 6, &[&|x| x * x * x, &|x| 3.0 * x * x]);
        let d = g.derivative(1).unwrap();
        let exact = GridFunction::sample(0.0, 1.0, 6, |x| 3.0 * x * x);
        assert!(d.max_abs_diff(&exact) < 1e-15);
        // second derivative falls back to differencing the stack
        let d2 = g.derivative(2).unwrap();
        let exact2 = GridFunction::sample(0.0, 1.0, 6, |x| 6.0 * x);
        assert!(d2.max_abs_diff(&exact2) < 1e-9);
    }

    #[test]
    fn non_finite_samples_rejected() {
        assert!(GridFunction::from_samples(0.0, 1.0, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn csv_round_trips_values() {
        let g = GridFunction::sample(0.0, 1.0, 3, |x| x * x - 0.123456789012345);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,value");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        let back: f64 = row[1].parse().unwrap();
        assert_eq!(back, g.values()[0]);
    }
}
