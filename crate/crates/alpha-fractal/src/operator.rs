//! The perturbation map `f ↦ f^α` as a bounded linear operator: base rules
//! of the form `b = Lf`, norm and perturbation bounds, empirical operator
//! norms, and Neumann-series inversion.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FractalError, Result};
use crate::grid::GridFunction;
use crate::ifs::{BaseRule, IfsSpec};
use crate::partition::Partition;
use crate::rb;
use crate::scaling::ScalingProfile;
use crate::spaces::{self, SpaceSpec};

/// Default fixed-point tolerance used by operator applications.
pub const DEFAULT_FP_TOL: f64 = 1e-12;
/// Default iteration cap; geometric convergence makes this ample for any
/// factor up to 0.99.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Absolute slack allowed when checking the perturbation inequalities.
pub const PERTURB_SLACK: f64 = 1e-6;

type ApplyFn = Arc<dyn Fn(&GridFunction) -> GridFunction + Send + Sync>;

/// A bounded linear operator `L` producing the base function `b = Lf`.
///
/// Every kind fixes the seed's endpoint values, which makes `b = Lf`
/// admissible as a base rule. Operator-norm bounds are analytic constants;
/// empirical estimates must stay below them.
#[derive(Clone)]
pub enum LinearBaseOperator {
    /// The chord through the endpoint values:
    /// `(Lf)(x) = f(x_1) + (f(x_N) − f(x_1)) (x − x_1)/(x_N − x_1)`.
    EndpointLine,
    /// `λ·f + (1−λ)·EndpointLine(f)`; the identity at `λ = 1`.
    ScaledIdentityBlend { lambda: f64 },
    /// User-supplied linear procedure with user-supplied norm bounds
    /// (assumed valid in every space the table is used with).
    UserTable {
        name: String,
        apply: ApplyFn,
        norm_bound: f64,
        deviation_bound: f64,
    },
}

impl std::fmt::Debug for LinearBaseOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinearBaseOperator::EndpointLine => write!(f, "EndpointLine"),
            LinearBaseOperator::ScaledIdentityBlend { lambda } => {
                write!(f, "ScaledIdentityBlend(λ={lambda})")
            }
            LinearBaseOperator::UserTable {
                name,
                norm_bound,
                deviation_bound,
                ..
            } => write!(
                f,
                "UserTable({name}, ‖L‖≤{norm_bound}, ‖I−L‖≤{deviation_bound})"
            ),
        }
    }
}

impl LinearBaseOperator {
    pub fn name(&self) -> String {
        match self {
            LinearBaseOperator::EndpointLine => "endpoint-line".into(),
            LinearBaseOperator::ScaledIdentityBlend { lambda } => format!("blend({lambda})"),
            LinearBaseOperator::UserTable { name, .. } => name.clone(),
        }
    }

    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        match self {
            LinearBaseOperator::EndpointLine => endpoint_line(f),
            LinearBaseOperator::ScaledIdentityBlend { lambda } => {
                let line = endpoint_line(f);
                f.scale(*lambda).add(&line.scale(1.0 - *lambda))
            }
            LinearBaseOperator::UserTable { apply, .. } => apply(f),
        }
    }

    /// Analytic bound on `‖L‖` in the given space, for an interval of
    /// length `span`. `None` when no bound is available (point evaluation
    /// is unbounded on `L^p` with finite `p`).
    ///
    /// Endpoint-line derivations, with `ℓ` the interval length:
    /// * uniform-type norms (bounded, `L^∞`, `C^k`, `W^{k,∞}`, `C^{k,σ}`):
    ///   `‖Lf‖_∞ = max(|f(x_1)|, |f(x_N)|) ≤ ‖f‖_∞` and
    ///   `(Lf)' ≡ (f(x_N) − f(x_1))/ℓ`, the mean of `f'`, so every
    ///   derivative sup and the top-order Hölder seminorm are dominated
    ///   termwise; `‖L‖ ≤ 1`.
    /// * `W^{k,p}`, `p < ∞`: `‖f‖_∞ ≤ ℓ^{−1/p}‖f‖_p + ℓ^{1−1/p}‖f'‖_p`
    ///   gives `‖Lf‖_p ≤ ‖f‖_p + ℓ‖f'‖_p` and `‖(Lf)'‖_p ≤ ‖f'‖_p`, hence
    ///   `‖L‖ ≤ (2^{p−1} max(1,ℓ)^p + 1)^{1/p}`.
    pub fn norm_bound(&self, space: &SpaceSpec, span: f64) -> Option<f64> {
        match self {
            LinearBaseOperator::EndpointLine => endpoint_line_norm_bound(space, span),
            LinearBaseOperator::ScaledIdentityBlend { lambda } => {
                let e = endpoint_line_norm_bound(space, span)?;
                Some(lambda.abs() + (1.0 - lambda).abs() * e)
            }
            LinearBaseOperator::UserTable { norm_bound, .. } => Some(*norm_bound),
        }
    }

    /// Analytic bound on `‖I − L‖`; `1 + ‖L‖` by the triangle inequality
    /// except where a sharper constant is available.
    pub fn deviation_bound(&self, space: &SpaceSpec, span: f64) -> Option<f64> {
        match self {
            LinearBaseOperator::EndpointLine => {
                // ‖f − Lf‖ ≤ ‖f‖ + ‖Lf‖ with the termwise bounds above.
                Some(1.0 + endpoint_line_norm_bound(space, span)?)
            }
            LinearBaseOperator::ScaledIdentityBlend { lambda } => {
                // I − L = (1−λ)(I − E)
                let e = endpoint_line_norm_bound(space, span)?;
                Some((1.0 - lambda).abs() * (1.0 + e))
            }
            LinearBaseOperator::UserTable {
                deviation_bound, ..
            } => Some(*deviation_bound),
        }
    }
}

fn endpoint_line(f: &GridFunction) -> GridFunction {
    let (lo, hi) = (f.lo(), f.hi());
    let v0 = f.values()[0];
    let v1 = f.values()[f.len() - 1];
    let slope = (v1 - v0) / (hi - lo);
    let n = f.len();
    let samples: Vec<f64> = (0..n)
        .map(|j| {
            let x = lo + (hi - lo) * j as f64 / (n - 1) as f64;
            v0 + slope * (x - lo)
        })
        .collect();
    let line = GridFunction::from_samples(lo, hi, samples).expect("finite by construction");
    // The chord's derivative is exactly the constant slope; attach it so
    // smooth-space norms and endpoint checks see it analytically.
    line.with_derivs(vec![vec![slope; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]])
        .expect("stack lengths match")
}

fn endpoint_line_norm_bound(space: &SpaceSpec, span: f64) -> Option<f64> {
    match space {
        SpaceSpec::Bounded | SpaceSpec::Ck { .. } | SpaceSpec::Hoelder { .. } => Some(1.0),
        SpaceSpec::Lp { p } if p.is_infinite() => Some(1.0),
        SpaceSpec::Lp { .. } => None,
        SpaceSpec::Sobolev { p, .. } if p.is_infinite() => Some(1.0),
        SpaceSpec::Sobolev { p, .. } => {
            Some((2.0f64.powf(p - 1.0) * span.max(1.0).powf(*p) + 1.0).powf(1.0 / p))
        }
    }
}

/// Everything needed to realize `f ↦ f^α` on a space: a partition, a scale
/// profile, a linear base rule and the ambient space.
#[derive(Debug, Clone)]
pub struct FractalTemplate {
    pub partition: Partition,
    pub scaling: ScalingProfile,
    pub base: LinearBaseOperator,
    pub space: SpaceSpec,
}

impl FractalTemplate {
    pub fn to_spec(&self, f: &GridFunction) -> Result<IfsSpec> {
        IfsSpec::new(
            self.partition.clone(),
            self.scaling.clone(),
            f.clone(),
            BaseRule::Operator(self.base.clone()),
            self.space,
        )
    }

    /// Contraction factor of the ambient space.
    pub fn factor(&self) -> Result<f64> {
        let report = spaces::contraction_factor(&self.partition, &self.scaling, &self.space)?;
        if !report.iteration_admissible() {
            return Err(FractalError::NotContractive {
                factor: report.factor,
            });
        }
        Ok(report.factor)
    }

    /// Contraction factor in the sup norm, `max_i ‖α_i‖_∞`.
    pub fn sup_factor(&self) -> f64 {
        self.scaling.sup_magnitude()
    }
}

/// Applies the perturbation operator: solves for the fixed point `f^α`
/// with `b = Lf`. Linear in `f`; the identity when the scaling vanishes.
pub fn falpha_operator(template: &FractalTemplate, f: &GridFunction) -> Result<GridFunction> {
    template.factor()?;
    let spec = template.to_spec(f)?;
    let result = rb::fixed_point(&spec, DEFAULT_FP_TOL, DEFAULT_MAX_ITER)?;
    Ok(result.falpha)
}

/// One norm's worth of perturbation inequalities.
#[derive(Debug, Clone)]
pub struct PerturbationBranch {
    pub norm_label: String,
    /// Contraction factor `K` in this norm.
    pub factor: f64,
    /// `‖f^α − f‖`.
    pub lhs: f64,
    /// `K · ‖f^α − b‖`.
    pub prop_bound: f64,
    /// `K/(1−K) · ‖f − b‖` — the sharp intermediate bound.
    pub base_gap_bound: f64,
    /// `K/(1−K) · ‖I−L‖ · ‖f‖`, when an operator bound exists in this norm.
    pub operator_bound: Option<f64>,
    pub prop_ok: bool,
    pub base_gap_ok: bool,
    pub operator_ok: Option<bool>,
}

/// Perturbation report in the template's space norm and, when the sup-norm
/// factor also contracts, in the sup norm. The two can disagree because the
/// operator-norm constants differ between norms.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub space: SpaceSpec,
    /// `‖L‖` bound in the space norm.
    pub norm_bound: Option<f64>,
    /// `‖I−L‖` bound in the space norm.
    pub deviation_bound: Option<f64>,
    pub space_branch: PerturbationBranch,
    pub sup_branch: Option<PerturbationBranch>,
    pub all_satisfied: bool,
}

fn branch(
    label: &str,
    factor: f64,
    norm_of: impl Fn(&GridFunction) -> Result<f64>,
    falpha: &GridFunction,
    f: &GridFunction,
    b: &GridFunction,
    deviation: Option<f64>,
) -> Result<PerturbationBranch> {
    let lhs = norm_of(&falpha.sub(f))?;
    let prop_bound = factor * norm_of(&falpha.sub(b))?;
    let base_gap_bound = factor / (1.0 - factor) * norm_of(&f.sub(b))?;
    let operator_bound = deviation.map(|d| factor / (1.0 - factor) * d).and_then(|c| {
        norm_of(f).ok().map(|nf| c * nf)
    });
    Ok(PerturbationBranch {
        norm_label: label.into(),
        factor,
        lhs,
        prop_bound,
        base_gap_bound,
        operator_bound,
        prop_ok: lhs <= prop_bound + PERTURB_SLACK,
        base_gap_ok: lhs <= base_gap_bound + PERTURB_SLACK,
        operator_ok: operator_bound.map(|ob| lhs <= ob + PERTURB_SLACK),
    })
}

/// Computes `‖f^α − f‖ ≤ K‖f^α − b‖` and the operator-norm chain
/// `‖f^α − f‖ ≤ K/(1−K)·‖f−b‖ ≤ K/(1−K)·‖I−L‖·‖f‖` in the space norm and
/// in the sup norm.
pub fn perturbation_bounds(
    template: &FractalTemplate,
    f: &GridFunction,
) -> Result<PerturbationReport> {
    let factor = template.factor()?;
    let falpha = falpha_operator(template, f)?;
    let b = template.base.apply(f);
    let span = template.partition.span();

    let space = template.space;
    let deviation = template.base.deviation_bound(&space, span);
    let space_branch = branch(
        &format!("{space}"),
        factor,
        |g| spaces::norm(&space, g),
        &falpha,
        f,
        &b,
        deviation,
    )?;

    let sup_factor = template.sup_factor();
    let sup_branch = if sup_factor < 1.0 {
        let sup_dev = template.base.deviation_bound(&SpaceSpec::Bounded, span);
        Some(branch(
            "sup",
            sup_factor,
            |g| Ok(g.sup_norm()),
            &falpha,
            f,
            &b,
            sup_dev,
        )?)
    } else {
        None
    };

    let ok_of = |br: &PerturbationBranch| {
        br.prop_ok && br.base_gap_ok && br.operator_ok.unwrap_or(true)
    };
    let all_satisfied = ok_of(&space_branch) && sup_branch.as_ref().map_or(true, ok_of);
    Ok(PerturbationReport {
        space,
        norm_bound: template.base.norm_bound(&space, span),
        deviation_bound: deviation,
        space_branch,
        sup_branch,
        all_satisfied,
    })
}

/// Reproducible test family: combinations of `1, t, t², sin(πnt)` for
/// `n ≤ 4` with coefficients drawn uniformly from `[−1, 1]`, where `t` is
/// the normalized abscissa.
pub fn random_test_function(
    lo: f64,
    hi: f64,
    m: u32,
    rng: &mut impl Rng,
) -> GridFunction {
    let c: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridFunction::sample(lo, hi, m, move |x| {
        let t = (x - lo) / (hi - lo);
        let mut v = c[0] + c[1] * t + c[2] * t * t;
        for n in 1..=4 {
            v += c[2 + n] * (std::f64::consts::PI * n as f64 * t).sin();
        }
        v
    })
}

/// Empirical lower bound for `‖F^α‖`: the largest `‖F^α f‖` over seeded
/// random functions normalized in the template's space norm.
pub fn operator_norm_lower_bound(
    template: &FractalTemplate,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    template.factor()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (template.partition.lo(), template.partition.hi());
    let m = grid_level_for(template);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let f = random_test_function(lo, hi, m, &mut rng);
        let nf = spaces::norm(&template.space, &f)?;
        if nf < 1e-12 {
            continue;
        }
        let unit = f.scale(1.0 / nf);
        let image = falpha_operator(template, &unit)?;
        best = best.max(spaces::norm(&template.space, &image)?);
    }
    Ok(best)
}

/// Analytic upper bound `‖F^α‖ ≤ 1 + K/(1−K)·‖I−L‖`, when the deviation
/// bound is available in the space norm.
pub fn operator_norm_upper_bound(template: &FractalTemplate) -> Result<Option<f64>> {
    let factor = template.factor()?;
    Ok(template
        .base
        .deviation_bound(&template.space, template.partition.span())
        .map(|d| 1.0 + factor / (1.0 - factor) * d))
}

/// Inverts the perturbation operator by the Neumann series
/// `h = Σ_j (I − F^α)^j g`, truncated when a term's space norm drops to
/// `tol`.
///
/// Requires the automorphism condition `K·(1 + ‖I−L‖) < 1`, which makes
/// `‖I − F^α‖ ≤ K/(1−K)·‖I−L‖ < 1`.
pub fn neumann_inverse(
    template: &FractalTemplate,
    g: &GridFunction,
    tol: f64,
    max_terms: usize,
) -> Result<GridFunction> {
    let factor = template.factor()?;
    let span = template.partition.span();
    let deviation = template
        .base
        .deviation_bound(&template.space, span)
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
    let mut term = g.clone();
    let mut sum = g.clone();
    let mut last = f64::INFINITY;
    for _ in 0..max_terms {
        let image = falpha_operator(template, &term)?;
        term = term.sub(&image);
        last = spaces::norm(&template.space, &term)?;
        if last <= tol {
            return Ok(sum);
        }
        sum = sum.add(&term);
    }
    Err(FractalError::MaxTermsExceeded {
        terms: max_terms,
        residual: last,
    })
}

fn grid_level_for(template: &FractalTemplate) -> u32 {
    // Operator-level routines that fabricate their own inputs use the
    // default resolution.
    let _ = template;
    crate::grid::DEFAULT_GRID_LEVEL
}
