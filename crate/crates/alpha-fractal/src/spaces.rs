//! The five ambient function spaces, their norms on grid functions, and the
//! closed-form contraction factor of the perturbation operator in each.
//!
//! Factors by space, with `a_i` the subinterval slopes and `s_i = ‖α_i‖_∞`:
//!
//! * bounded functions:        `max_i s_i`
//! * `L^p`, `1 ≤ p < ∞`:       `[Σ_i a_i s_i^p]^{1/p}`
//! * `L^∞`:                    `max_i s_i`
//! * `L^p`, `0 < p < 1`:       `Σ_i a_i s_i^p` (quasi-norm branch)
//! * `C^k`:                    `max_i (2/a_i)^k ‖α_i‖_{C^k}`, with the
//!   sufficient per-interval condition `‖α_i‖_{C^k} ≤ (a_i/2)^k` reported
//!   alongside
//! * `W^{k,p}`, `1 ≤ p < ∞`:   `[Σ_i |α_i|^p / a_i^{kp−1}]^{1/p}` (constant
//!   scaling only)
//! * `W^{k,∞}`:                `max_i |α_i| / a_i^k`
//! * `C^{k,σ}`:                `max_i |α_i| / a_i^{k+σ}` (constant scaling
//!   only)

use std::fmt;

use crate::error::{FractalError, Result};
use crate::grid::GridFunction;
use crate::partition::Partition;
use crate::scaling::ScalingProfile;

/// Highest derivative order the norm evaluator computes.
pub const MAX_NORM_ORDER: usize = 4;

/// Node count for the pairwise Hölder-seminorm scan.
pub const DEFAULT_HOELDER_SUBSAMPLE: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceSpec {
    /// Bounded functions with the uniform norm.
    Bounded,
    /// Lebesgue space; `p = ∞` means essential sup, `0 < p < 1` the
    /// quasi-norm branch.
    Lp { p: f64 },
    /// k-times continuously differentiable functions with the max norm over
    /// derivative orders.
    Ck { k: usize },
    /// Sobolev space `W^{k,p}`, `k ≥ 1`, `1 ≤ p ≤ ∞`.
    Sobolev { k: usize, p: f64 },
    /// Hölder space `C^{k,σ}`, `0 < σ ≤ 1`.
    Hoelder { k: usize, sigma: f64 },
}

impl SpaceSpec {
    pub fn lp(p: f64) -> Result<Self> {
        if !(p > 0.0) {
            return Err(FractalError::SpecInvalid {
                reason: format!("Lp exponent must be positive, got {p}"),
            });
        }
        Ok(SpaceSpec::Lp { p })
    }

    pub fn sobolev(k: usize, p: f64) -> Result<Self> {
        if k < 1 || !(p >= 1.0) {
            return Err(FractalError::SpecInvalid {
                reason: format!("Sobolev space needs k ≥ 1 and p in [1, ∞], got k={k}, p={p}"),
            });
        }
        Ok(SpaceSpec::Sobolev { k, p })
    }

    pub fn hoelder(k: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(FractalError::SpecInvalid {
                reason: format!("Hölder exponent must lie in (0, 1], got {sigma}"),
            });
        }
        Ok(SpaceSpec::Hoelder { k, sigma })
    }

    /// Highest derivative order the space's norm touches.
    pub fn derivative_order(&self) -> usize {
        match self {
            SpaceSpec::Bounded | SpaceSpec::Lp { .. } => 0,
            SpaceSpec::Ck { k } | SpaceSpec::Sobolev { k, .. } | SpaceSpec::Hoelder { k, .. } => *k,
        }
    }

    /// Sobolev and Hölder contraction factors are stated for constant
    /// scaling only.
    pub fn requires_constant_scaling(&self) -> bool {
        matches!(self, SpaceSpec::Sobolev { .. } | SpaceSpec::Hoelder { .. })
    }

    /// True when membership forces the base function to match the seed's
    /// derivatives at the interval endpoints (orders 1..k).
    pub fn requires_derivative_matching(&self) -> bool {
        match self {
            SpaceSpec::Ck { k } | SpaceSpec::Hoelder { k, .. } => *k >= 1,
            _ => false,
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::Bounded => write!(f, "B"),
            SpaceSpec::Lp { p } if p.is_infinite() => write!(f, "L^inf"),
            SpaceSpec::Lp { p } => write!(f, "L^{p}"),
            SpaceSpec::Ck { k } => write!(f, "C^{k}"),
            SpaceSpec::Sobolev { k, p } if p.is_infinite() => write!(f, "W^{{{k},inf}}"),
            SpaceSpec::Sobolev { k, p } => write!(f, "W^{{{k},{p}}}"),
            SpaceSpec::Hoelder { k, sigma } => write!(f, "C^{{{k},{sigma}}}"),
        }
    }
}

/// Norm of a grid function in the given space.
///
/// Derivatives come from analytic stacks when attached and finite
/// differences otherwise; the Hölder seminorm is the pairwise subsample
/// estimate, a lower bound of the true seminorm.
pub fn norm(space: &SpaceSpec, g: &GridFunction) -> Result<f64> {
    let k = space.derivative_order();
    if k > MAX_NORM_ORDER {
        return Err(FractalError::UnsupportedOrder {
            k,
            max: MAX_NORM_ORDER,
        });
    }
    match space {
        SpaceSpec::Bounded => Ok(g.sup_norm()),
        SpaceSpec::Lp { p } => {
            if p.is_infinite() {
                Ok(g.sup_norm())
            } else {
                Ok(g.quadrature_p_power(*p).powf(1.0 / p))
            }
        }
        SpaceSpec::Ck { k } => {
            let mut worst: f64 = 0.0;
            for r in 0..=*k {
                worst = worst.max(g.derivative(r)?.sup_norm());
            }
            Ok(worst)
        }
        SpaceSpec::Sobolev { k, p } => {
            if p.is_infinite() {
                let mut acc = 0.0;
                for j in 0..=*k {
                    acc += g.derivative(j)?.sup_norm();
                }
                Ok(acc)
            } else {
                let mut acc = 0.0;
                for j in 0..=*k {
                    acc += g.derivative(j)?.quadrature_p_power(*p);
                }
                Ok(acc.powf(1.0 / p))
            }
        }
        SpaceSpec::Hoelder { k, sigma } => {
            let mut acc = 0.0;
            for j in 0..=*k {
                acc += g.derivative(j)?.sup_norm();
            }
            let top = g.derivative(*k)?;
            Ok(acc + hoelder_seminorm(&top, *sigma, DEFAULT_HOELDER_SUBSAMPLE))
        }
    }
}

/// Pairwise difference-quotient scan over an evenly spaced node subsample.
/// Returns a lower bound of `sup |u(x)−u(y)| / |x−y|^σ`.
pub fn hoelder_seminorm(g: &GridFunction, sigma: f64, subsample: usize) -> f64 {
    assert!(sigma > 0.0 && sigma <= 1.0, "sigma must lie in (0, 1]");
    let n = g.len();
    let count = subsample.clamp(2, n);
    let idx: Vec<usize> = (0..count)
        .map(|j| ((j as f64) * (n - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    let mut best: f64 = 0.0;
    for (pos, &ja) in idx.iter().enumerate() {
        let xa = g.node(ja);
        let va = g.values()[ja];
        for &jb in &idx[pos + 1..] {
            let dx = (g.node(jb) - xa).abs();
            if dx == 0.0 {
                continue;
            }
            let q = (g.values()[jb] - va).abs() / dx.powf(sigma);
            best = best.max(q);
        }
    }
    best
}

/// Outcome of evaluating a space's contraction condition for a given
/// partition and scaling profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub space: SpaceSpec,
    /// Closed-form factor for the space.
    pub factor: f64,
    /// Rendered inequality with the numbers substituted.
    pub condition: String,
    /// Whether the space's contraction condition holds. For `C^k` this also
    /// requires the per-interval bound `‖α_i‖_{C^k} ≤ (a_i/2)^k`.
    pub satisfied: bool,
    /// The `C^k` per-interval sufficient condition, when applicable.
    pub ck_hypothesis: Option<bool>,
}

impl ContractionReport {
    /// Whether fixed-point iteration is admissible: the operative factor is
    /// below one. For `C^k` the sufficient per-interval condition may fail
    /// while the factor still contracts.
    pub fn iteration_admissible(&self) -> bool {
        self.factor < 1.0
    }
}

/// Evaluates the closed-form contraction factor of the perturbation
/// operator for `space`, given the partition slopes and scaling profile.
pub fn contraction_factor(
    partition: &Partition,
    scaling: &ScalingProfile,
    space: &SpaceSpec,
) -> Result<ContractionReport> {
    if space.requires_constant_scaling() && !scaling.is_constant() {
        return Err(FractalError::IncompatibleScalingKind {
            space: space.to_string(),
        });
    }
    let a: Vec<f64> = partition.slopes().collect();
    let sups: Vec<f64> = (0..scaling.len())
        .map(|i| scaling.entry(i).sup_magnitude())
        .collect();
    let (factor, condition, ck_hypothesis) = match space {
        SpaceSpec::Bounded => {
            let f = sups.iter().cloned().fold(0.0, f64::max);
            (f, format!("max_i ‖α_i‖∞ = {f} < 1"), None)
        }
        SpaceSpec::Lp { p } => {
            if p.is_infinite() {
                let f = sups.iter().cloned().fold(0.0, f64::max);
                (f, format!("max_i ‖α_i‖∞ = {f} < 1"), None)
            } else if *p >= 1.0 {
                let sum: f64 = a.iter().zip(&sups).map(|(ai, si)| ai * si.powf(*p)).sum();
                let f = sum.powf(1.0 / p);
                (
                    f,
                    format!("[Σ_i a_i ‖α_i‖∞^{p}]^(1/{p}) = {f} < 1"),
                    None,
                )
            } else {
                let f: f64 = a.iter().zip(&sups).map(|(ai, si)| ai * si.powf(*p)).sum();
                (f, format!("Σ_i a_i ‖α_i‖∞^{p} = {f} < 1"), None)
            }
        }
        SpaceSpec::Ck { k } => {
            let mut factor: f64 = 0.0;
            let mut hypothesis = true;
            for (ai, entry) in a.iter().zip(scaling.entries()) {
                let ck = entry.ck_norm(*k)?;
                factor = factor.max((2.0 / ai).powi(*k as i32) * ck);
                if ck > (ai / 2.0).powi(*k as i32) {
                    hypothesis = false;
                }
            }
            (
                factor,
                format!("max_i (2/a_i)^{k} ‖α_i‖_C{k} = {factor} < 1"),
                Some(hypothesis),
            )
        }
        SpaceSpec::Sobolev { k, p } => {
            let alphas = scaling.constants().expect("checked constant above");
            if p.is_infinite() {
                let f = a
                    .iter()
                    .zip(&alphas)
                    .map(|(ai, al)| al.abs() / ai.powi(*k as i32))
                    .fold(0.0, f64::max);
                (f, format!("max_i |α_i|/a_i^{k} = {f} < 1"), None)
            } else {
                let sum: f64 = a
                    .iter()
                    .zip(&alphas)
                    .map(|(ai, al)| al.abs().powf(*p) / ai.powf(k_p_minus_one(*k, *p)))
                    .sum();
                let f = sum.powf(1.0 / p);
                (
                    f,
                    format!("[Σ_i |α_i|^{p} / a_i^({k}·{p}−1)]^(1/{p}) = {f} < 1"),
                    None,
                )
            }
        }
        SpaceSpec::Hoelder { k, sigma } => {
            let alphas = scaling.constants().expect("checked constant above");
            let f = a
                .iter()
                .zip(&alphas)
                .map(|(ai, al)| al.abs() / ai.powf(*k as f64 + sigma))
                .fold(0.0, f64::max);
            (
                f,
                format!("max_i |α_i|/a_i^({k}+{sigma}) = {f} < 1"),
                None,
            )
        }
    };
    let satisfied = factor < 1.0 && ck_hypothesis.unwrap_or(true);
    Ok(ContractionReport {
        space: *space,
        factor,
        condition,
        satisfied,
        ck_hypothesis,
    })
}

fn k_p_minus_one(k: usize, p: f64) -> f64 {
    k as f64 * p - 1.0
}
