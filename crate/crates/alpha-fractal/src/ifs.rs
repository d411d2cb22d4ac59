//! Complete problem statements: partition + scaling + seed + base rule +
//! ambient space, with hypothesis validation.

use crate::error::{FractalError, Result};
use crate::grid::GridFunction;
use crate::operator::LinearBaseOperator;
use crate::partition::Partition;
use crate::scaling::ScalingProfile;
use crate::spaces::{self, ContractionReport, SpaceSpec};

/// Endpoint-value matching tolerance, relative to the seed's value scale.
pub const ENDPOINT_TOL: f64 = 1e-9;

/// Derivative endpoint matching tolerance (finite-difference limited).
pub const DERIV_ENDPOINT_TOL: f64 = 1e-6;

/// How the base function is produced: explicitly, or from the seed through
/// a bounded linear operator.
#[derive(Debug, Clone)]
pub enum BaseRule {
    Explicit(GridFunction),
    Operator(LinearBaseOperator),
}

/// A validated problem statement.
#[derive(Debug, Clone)]
pub struct IfsSpec {
    pub partition: Partition,
    pub scaling: ScalingProfile,
    pub seed: GridFunction,
    pub base: BaseRule,
    pub space: SpaceSpec,
    knot_snap_error: f64,
}

impl IfsSpec {
    pub fn new(
        partition: Partition,
        scaling: ScalingProfile,
        seed: GridFunction,
        base: BaseRule,
        space: SpaceSpec,
    ) -> Result<Self> {
        if scaling.len() != partition.interval_count() {
            return Err(FractalError::SpecInvalid {
                reason: format!(
                    "expected {} scaling entries, got {}",
                    partition.interval_count(),
                    scaling.len()
                ),
            });
        }
        let span = partition.span();
        if (seed.lo() - partition.lo()).abs() > 1e-12 * span
            || (seed.hi() - partition.hi()).abs() > 1e-12 * span
        {
            return Err(FractalError::SpecInvalid {
                reason: format!(
                    "seed domain [{}, {}] does not match the partition interval [{}, {}]",
                    seed.lo(),
                    seed.hi(),
                    partition.lo(),
                    partition.hi()
                ),
            });
        }
        if let BaseRule::Explicit(b) = &base {
            if b.len() != seed.len()
                || (b.lo() - seed.lo()).abs() > 1e-12 * span
                || (b.hi() - seed.hi()).abs() > 1e-12 * span
            {
                return Err(FractalError::SpecInvalid {
                    reason: "explicit base must live on the seed's grid".into(),
                });
            }
        }
        // Largest distance from a knot to its nearest grid node. Dyadic
        // partitions on dyadic grids snap to zero; anything else is recorded
        // so downstream exactness claims can be qualified.
        let knot_snap_error = partition
            .knots()
            .iter()
            .map(|&k| (seed.node(seed.nearest_node(k)) - k).abs())
            .fold(0.0, f64::max);
        Ok(IfsSpec {
            partition,
            scaling,
            seed,
            base,
            space,
            knot_snap_error,
        })
    }

    /// The base function as grid samples: a clone of the explicit base, or
    /// the operator applied to the seed.
    pub fn resolve_base(&self) -> GridFunction {
        match &self.base {
            BaseRule::Explicit(b) => b.clone(),
            BaseRule::Operator(op) => op.apply(&self.seed),
        }
    }

    pub fn contraction_report(&self) -> Result<ContractionReport> {
        spaces::contraction_factor(&self.partition, &self.scaling, &self.space)
    }

    pub fn knot_snap_error(&self) -> f64 {
        self.knot_snap_error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCheck {
    pub name: String,
    pub observed: f64,
    pub requirement: String,
    pub passed: bool,
}

/// Hypothesis-by-hypothesis report for the space-relevant existence theorem.
/// Carries failures instead of erroring.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub contraction: Option<ContractionReport>,
    pub knot_snap_error: f64,
    pub passed: bool,
}

/// Checks every hypothesis the ambient space's existence theorem places on
/// the spec: endpoint matching of the base, `b ≠ f`, the contraction
/// condition, and (for smooth spaces) derivative endpoint matching and
/// scaling-kind compatibility.
pub fn validate_spec(spec: &IfsSpec) -> ValidationReport {
    let mut checks = Vec::new();
    let f = &spec.seed;
    let b = spec.resolve_base();
    let scale = f.sup_norm().max(1.0);

    let lo_gap = (b.values()[0] - f.values()[0]).abs();
    let hi_gap = (b.values()[b.len() - 1] - f.values()[f.len() - 1]).abs();
    checks.push(ValidationCheck {
        name: "base matches seed at left endpoint".into(),
        observed: lo_gap,
        requirement: format!("≤ {:e}", ENDPOINT_TOL * scale),
        passed: lo_gap <= ENDPOINT_TOL * scale,
    });
    checks.push(ValidationCheck {
        name: "base matches seed at right endpoint".into(),
        observed: hi_gap,
        requirement: format!("≤ {:e}", ENDPOINT_TOL * scale),
        passed: hi_gap <= ENDPOINT_TOL * scale,
    });

    let sep = b.max_abs_diff(f);
    checks.push(ValidationCheck {
        name: "base differs from seed".into(),
        observed: sep,
        requirement: format!("> {:e}", ENDPOINT_TOL * scale),
        passed: sep > ENDPOINT_TOL * scale,
    });

    if spec.space.requires_constant_scaling() && !spec.scaling.is_constant() {
        checks.push(ValidationCheck {
            name: "scaling kind compatible with space".into(),
            observed: f64::NAN,
            requirement: "constant scaling".into(),
            passed: false,
        });
    }

    if spec.space.requires_derivative_matching() {
        let k = spec.space.derivative_order();
        for r in 1..=k {
            let fr = f.derivative(r);
            let br = b.derivative(r);
            match (fr, br) {
                (Ok(fr), Ok(br)) => {
                    let rscale = fr.sup_norm().max(1.0);
                    let lo = (br.values()[0] - fr.values()[0]).abs();
                    let hi = (br.values()[br.len() - 1] - fr.values()[fr.len() - 1]).abs();
                    let gap = lo.max(hi);
                    checks.push(ValidationCheck {
                        name: format!("base matches seed derivative order {r} at endpoints"),
                        observed: gap,
                        requirement: format!("≤ {:e}", DERIV_ENDPOINT_TOL * rscale),
                        passed: gap <= DERIV_ENDPOINT_TOL * rscale,
                    });
                }
                _ => checks.push(ValidationCheck {
                    name: format!("derivative order {r} computable"),
                    observed: f64::NAN,
                    requirement: "grid fine enough / order supported".into(),
                    passed: false,
                }),
            }
        }
    }

    let contraction = spec.contraction_report().ok();
    match &contraction {
        Some(report) => {
            checks.push(ValidationCheck {
                name: "contraction condition".into(),
                observed: report.factor,
                requirement: report.condition.clone(),
                passed: report.satisfied,
            });
            if let Some(hyp) = report.ck_hypothesis {
                checks.push(ValidationCheck {
                    name: "per-interval scaling bound ‖α_i‖_Ck ≤ (a_i/2)^k".into(),
                    observed: if hyp { 1.0 } else { 0.0 },
                    requirement: "holds on every subinterval".into(),
                    passed: hyp,
                });
            }
        }
        None => checks.push(ValidationCheck {
            name: "contraction factor computable".into(),
            observed: f64::NAN,
            requirement: "scaling kind compatible with space".into(),
            passed: false,
        }),
    }

    let passed = checks.iter().all(|c| c.passed);
    ValidationReport {
        checks,
        contraction,
        knot_snap_error: spec.knot_snap_error,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_GRID_LEVEL;

    fn reference_spec(alpha: Vec<f64>, space: SpaceSpec) -> IfsSpec {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let f = GridFunction::sample(0.0, 1.0, DEFAULT_GRID_LEVEL, |x| x * x);
        let b = GridFunction::sample(0.0, 1.0, DEFAULT_GRID_LEVEL, |x| x);
        IfsSpec::new(
            p,
            ScalingProfile::constant(alpha),
            f,
            BaseRule::Explicit(b),
            space,
        )
        .unwrap()
    }

    #[test]
    fn reference_spec_validates() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Lp { p: 2.0 });
        let report = validate_spec(&spec);
        assert!(report.passed, "{:#?}", report.checks);
        assert_eq!(report.knot_snap_error, 0.0);
    }

    #[test]
    fn base_equal_to_seed_fails_validation() {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let f = GridFunction::sample(0.0, 1.0, 8, |x| x * x);
        let spec = IfsSpec::new(
            p,
            ScalingProfile::constant(vec![0.4, 0.4]),
            f.clone(),
            BaseRule::Explicit(f),
            SpaceSpec::Lp { p: 2.0 },
        )
        .unwrap();
        let report = validate_spec(&spec);
        assert!(!report.passed);
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "base differs from seed")
            .unwrap();
        assert!(!check.passed);
    }

    #[test]
    fn oversized_scaling_fails_contraction_check() {
        let spec = reference_spec(vec![1.2, 0.4], SpaceSpec::Bounded);
        let report = validate_spec(&spec);
        assert!(!report.passed);
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "contraction condition")
            .unwrap();
        assert!(!check.passed);
        assert!((check.observed - 1.2).abs() < 1e-15);
    }

    #[test]
    fn entry_count_mismatch_rejected() {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let f = GridFunction::sample(0.0, 1.0, 6, |x| x);
        let err = IfsSpec::new(
            p,
            ScalingProfile::constant(vec![0.4]),
            f.clone(),
            BaseRule::Explicit(f),
            SpaceSpec::Bounded,
        )
        .unwrap_err();
        assert!(matches!(err, FractalError::SpecInvalid { .. }));
    }

    #[test]
    fn snap_error_recorded_for_non_dyadic_knots() {
        let p = Partition::new(vec![0.0, 1.0 / 3.0, 1.0]).unwrap();
        let f = GridFunction::sample(0.0, 1.0, 4, |x| x * x);
        let b = GridFunction::sample(0.0, 1.0, 4, |x| x);
        let spec = IfsSpec::new(
            p,
            ScalingProfile::constant(vec![0.3, 0.3]),
            f,
            BaseRule::Explicit(b),
            SpaceSpec::Bounded,
        )
        .unwrap();
        assert!(spec.knot_snap_error() > 0.0);
        assert!(spec.knot_snap_error() <= 0.5 / 16.0);
    }
}
