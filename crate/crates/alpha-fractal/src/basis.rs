//! Schauder bases of self-referential functions on `[0, 1]`.
//!
//! The ladder starts from the L²-normalized Haar system and climbs one
//! smoothness level at a time: each lift prepends the constant function and
//! integrates every lower element from 0, while the coefficient functionals
//! compose a derivative with the lower level's functionals. Applying the
//! perturbation operator to every element turns the ladder into a basis of
//! self-referential functions, and reconstruction runs the Neumann inverse
//! followed by a plain basis expansion.
//!
//! Basis elements carry an exact piecewise-polynomial description alongside
//! their grid samples. Haar elements jump exactly at grid nodes, where node
//! sampling cannot represent the two one-sided values; inner products and
//! ladder integrals therefore run on the exact descriptions (and on exact
//! per-cell slopes of sampled inputs), which keeps biorthogonality and
//! coefficient recovery at round-off accuracy instead of O(h).

use crate::error::{FractalError, Result};
use crate::grid::GridFunction;
use crate::operator::{self, FractalTemplate};
use crate::spaces;

/// Piecewise polynomial on `[0, 1]` in local coordinates: piece `i` on
/// `[breaks[i], breaks[i+1]]` evaluates `Σ_k coeffs[k]·(x − breaks[i])^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    pub fn constant(c: f64) -> Self {
        PiecewisePoly {
            breaks: vec![0.0, 1.0],
            pieces: vec![vec![c]],
        }
    }

    /// Right-continuous step function from interleaved breaks and values.
    pub fn step(breaks: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(breaks.len(), values.len() + 1);
        PiecewisePoly {
            breaks,
            pieces: values.into_iter().map(|v| vec![v]).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| p.len().saturating_sub(1)).max().unwrap_or(0)
    }

    fn piece_index(&self, x: f64) -> usize {
        let n = self.pieces.len();
        self.breaks.partition_point(|&b| b <= x).saturating_sub(1).min(n - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.piece_index(x);
        let t = x - self.breaks[i];
        // Horner
        self.pieces[i].iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Exact running integral from 0, with continuity constants accumulated
    /// across pieces.
    pub fn antiderivative(&self) -> PiecewisePoly {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut running = 0.0;
        for (i, piece) in self.pieces.iter().enumerate() {
            let mut coeffs = Vec::with_capacity(piece.len() + 1);
            coeffs.push(running);
            for (k, &c) in piece.iter().enumerate() {
                coeffs.push(c / (k + 1) as f64);
            }
            let len = self.breaks[i + 1] - self.breaks[i];
            running = coeffs.iter().rev().fold(0.0, |acc, &c| acc * len + c);
            pieces.push(coeffs);
        }
        PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces,
        }
    }

    /// Samples onto a dyadic grid; exact at every node.
    pub fn sample(&self, m: u32) -> GridFunction {
        GridFunction::sample(0.0, 1.0, m, |x| self.eval(x))
    }

    /// Exact `∫ self·other` for two step functions (degree 0).
    pub fn step_product_integral(&self, other: &PiecewisePoly) -> f64 {
        assert!(self.degree() == 0 && other.degree() == 0, "steps only");
        let cuts = merge_breaks(&self.breaks, &other.breaks);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            acc += self.eval(mid) * other.eval(mid) * (w[1] - w[0]);
        }
        acc
    }

    /// Exact `∫ self·g` of a step function against the piecewise-linear
    /// interpolant of a grid function.
    pub fn step_against_grid(&self, g: &GridFunction) -> f64 {
        assert!(self.degree() == 0, "steps only");
        let nodes: Vec<f64> = (0..g.len()).map(|j| g.node(j)).collect();
        let cuts = merge_breaks(&self.breaks, &nodes);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let avg = 0.5 * (g.eval_clamped(w[0]) + g.eval_clamped(w[1]));
            acc += self.eval(mid) * avg * (w[1] - w[0]);
        }
        acc
    }

    /// Exact `∫ self·s` of a step function against a cell-constant function
    /// given by one value per grid cell.
    pub fn step_against_cells(&self, cells: &[f64], lo: f64, hi: f64) -> f64 {
        assert!(self.degree() == 0, "steps only");
        let n = cells.len();
        let nodes: Vec<f64> = (0..=n)
            .map(|j| lo + (hi - lo) * j as f64 / n as f64)
            .collect();
        let cuts = merge_breaks(&self.breaks, &nodes);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let cell = (((mid - lo) / h).floor() as isize).clamp(0, n as isize - 1) as usize;
            acc += self.eval(mid) * cells[cell] * (w[1] - w[0]);
        }
        acc
    }
}

fn merge_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    all
}

/// Exact description of the n-th element (1-based) of the L²-normalized
/// Haar system in natural order: the constant function, then wavelets by
/// level and offset.
fn haar_step(idx: usize) -> PiecewisePoly {
    assert!(idx >= 1);
    if idx == 1 {
        return PiecewisePoly::constant(1.0);
    }
    let w = idx - 2;
    let j = usize::BITS - 1 - (w + 1).leading_zeros(); // floor(log2(w+1))
    let l = (w + 1) - (1usize << j);
    let scale = 1.0 / (1u64 << j) as f64;
    let lo = l as f64 * scale;
    let mid = lo + 0.5 * scale;
    let hi = lo + scale;
    let v = 2f64.powf(j as f64 / 2.0);
    let mut breaks = vec![0.0];
    let mut values = Vec::new();
    if lo > 0.0 {
        breaks.push(lo);
        values.push(0.0);
    }
    breaks.push(mid);
    values.push(v);
    breaks.push(hi);
    values.push(-v);
    if hi < 1.0 {
        breaks.push(1.0);
        values.push(0.0);
    }
    PiecewisePoly::step(breaks, values)
}

/// A level of the integration ladder: basis elements as grid functions with
/// exact descriptions, plus the data the coefficient functionals need.
#[derive(Debug, Clone)]
pub struct BasisLadder {
    level: usize,
    elements: Vec<GridFunction>,
    exact: Vec<PiecewisePoly>,
    /// The level-0 Haar steps the coefficient rule bottoms out in.
    haar: Vec<PiecewisePoly>,
    grid_m: u32,
}

/// The L²-normalized Haar system as the level-0 ladder on `[0, 1]`.
pub fn haar_system(count: usize, grid_m: u32) -> BasisLadder {
    assert!(count >= 1);
    let exact: Vec<PiecewisePoly> = (1..=count).map(haar_step).collect();
    let elements = exact.iter().map(|p| p.sample(grid_m)).collect();
    BasisLadder {
        level: 0,
        elements,
        haar: exact.clone(),
        exact,
        grid_m,
    }
}

/// Lifts a ladder one level: prepends the constant function and integrates
/// every element of the lower level from 0. `count` is the size of the new
/// ladder, at most one more than the lower level's.
pub fn lift_ladder(ladder: &BasisLadder, count: usize) -> Result<BasisLadder> {
    if count == 0 || count > ladder.exact.len() + 1 {
        return Err(FractalError::SpecInvalid {
            reason: format!(
                "lift of a {}-element ladder supports counts 1..={}, got {count}",
                ladder.exact.len(),
                ladder.exact.len() + 1
            ),
        });
    }
    let mut exact = Vec::with_capacity(count);
    exact.push(PiecewisePoly::constant(1.0));
    for lower in &ladder.exact[..count - 1] {
        exact.push(lower.antiderivative());
    }
    let elements = exact.iter().map(|p| p.sample(ladder.grid_m)).collect();
    Ok(BasisLadder {
        level: ladder.level + 1,
        elements,
        exact,
        haar: ladder.haar.clone(),
        grid_m: ladder.grid_m,
    })
}

impl BasisLadder {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, n: usize) -> &GridFunction {
        &self.elements[n - 1]
    }

    pub fn elements(&self) -> &[GridFunction] {
        &self.elements
    }

    pub fn exact(&self, n: usize) -> &PiecewisePoly {
        &self.exact[n - 1]
    }

    pub fn grid_m(&self) -> u32 {
        self.grid_m
    }

    /// Coefficient functional `β_n` applied to a grid function.
    ///
    /// Unrolling the ladder recursion, `β_n(f) = f^{(n−1)}(0)` for the
    /// first `level` slots, and `∫ f^{(level)}·h_{n−level}` beyond them.
    /// The innermost derivative is taken as exact per-cell slopes, so the
    /// functional reproduces coefficients of piecewise-linear inputs
    /// exactly at level 1.
    pub fn coefficient(&self, n: usize, f: &GridFunction) -> Result<f64> {
        if n == 0 || n > self.elements.len() {
            return Err(FractalError::SpecInvalid {
                reason: format!("coefficient index {n} outside 1..={}", self.elements.len()),
            });
        }
        let k = self.level;
        if n <= k {
            let order = n - 1;
            return Ok(f.derivative(order)?.values()[0]);
        }
        let haar = &self.haar[n - k - 1];
        if k == 0 {
            Ok(haar.step_against_grid(f))
        } else {
            let u = f.derivative(k - 1)?;
            let cells = cell_slopes(&u);
            Ok(haar.step_against_cells(&cells, u.lo(), u.hi()))
        }
    }

    /// Exact pairwise integral `∫ f_i·f_j` at level 0 (step functions).
    /// The L²-normalized Haar system returns the Kronecker delta up to
    /// rounding.
    pub fn gram_exact(&self, i: usize, j: usize) -> f64 {
        assert_eq!(self.level, 0, "exact gram is a level-0 operation");
        self.exact[i - 1].step_product_integral(&self.exact[j - 1])
    }

    /// Condition number estimate (λ_max/λ_min) of the Gram matrix of the
    /// first `count` elements under grid quadrature.
    pub fn gram_condition(&self, count: usize) -> f64 {
        let n = count.min(self.elements.len());
        let mut gram = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let prod = self.elements[i].zip(&self.elements[j], |a, b| a * b);
                let v = prod.integral();
                gram[i][j] = v;
                gram[j][i] = v;
            }
        }
        let eigs = jacobi_eigenvalues(gram);
        let max = eigs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let min = eigs.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
        max / min
    }
}

/// Per-cell slopes of a grid function: the exact derivative of its
/// piecewise-linear interpolant on each open cell.
fn cell_slopes(g: &GridFunction) -> Vec<f64> {
    let h = g.spacing();
    g.values().windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-12 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// A ladder pushed through the perturbation operator: every element is
/// replaced by its self-referential image under the template.
#[derive(Debug, Clone)]
pub struct FractalBasis {
    pub ladder: BasisLadder,
    pub template: FractalTemplate,
    elements: Vec<GridFunction>,
}

/// Applies the perturbation operator to every ladder element.
///
/// Requires the automorphism condition `K(1 + ‖I−L‖) < 1` — the same gate
/// as the Neumann inverse — so expansions in the new elements exist and
/// are unique.
pub fn fractalize_basis(ladder: &BasisLadder, template: &FractalTemplate) -> Result<FractalBasis> {
    if (template.partition.lo() - 0.0).abs() > 1e-12 || (template.partition.hi() - 1.0).abs() > 1e-12
    {
        return Err(FractalError::HypothesisViolated {
            reason: "the basis ladder lives on [0, 1]; the template must too".into(),
        });
    }
    let factor = template.factor()?;
    let deviation = template
        .base
        .deviation_bound(&template.space, template.partition.span())
        .ok_or_else(|| FractalError::HypothesisViolated {
            reason: format!(
                "no ‖I−L‖ bound for {} in the {} norm",
                template.base.name(),
                template.space
            ),
        })?;
    if factor * (1.0 + deviation) >= 1.0 {
        return Err(FractalError::HypothesisViolated {
            reason: format!(
                "automorphism condition K(1+‖I−L‖) < 1 fails: {factor} · (1 + {deviation}) ≥ 1"
            ),
        });
    }
    let elements = ladder
        .elements
        .iter()
        .map(|e| operator::falpha_operator(template, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(FractalBasis {
        ladder: ladder.clone(),
        template: template.clone(),
        elements,
    })
}

impl FractalBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, n: usize) -> &GridFunction {
        &self.elements[n - 1]
    }

    pub fn elements(&self) -> &[GridFunction] {
        &self.elements
    }

    /// Expansion coefficients of `f`: the ladder functionals applied to the
    /// Neumann pre-image of `f`.
    pub fn coefficients(&self, f: &GridFunction, n_terms: usize, tol: f64) -> Result<Vec<f64>> {
        let h = operator::neumann_inverse(&self.template, f, tol, 500)?;
        (1..=n_terms.min(self.len()))
            .map(|n| self.ladder.coefficient(n, &h))
            .collect()
    }

    /// Partial-sum reconstruction `Σ_{n ≤ n_terms} β_n(h)·f_n^α` together
    /// with the space-norm error after each term.
    pub fn reconstruct(
        &self,
        f: &GridFunction,
        n_terms: usize,
        tol: f64,
    ) -> Result<(GridFunction, Vec<f64>)> {
        let coeffs = self.coefficients(f, n_terms, tol)?;
        let mut partial = f.zeros_like();
        let mut errors = Vec::with_capacity(coeffs.len());
        for (idx, &c) in coeffs.iter().enumerate() {
            partial = partial.add(&self.elements[idx].scale(c));
            errors.push(spaces::norm(&self.template.space, &f.sub(&partial))?);
        }
        Ok((partial, errors))
    }
}
