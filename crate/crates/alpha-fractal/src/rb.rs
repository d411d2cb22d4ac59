//! Iteration engine for the self-referential perturbation: applying the
//! contraction, driving it to its fixed point, the derivative recursion for
//! smooth scaling, and the random-iteration sampler for the graph attractor.
//!
//! The update applied at every node `x` in subinterval `i` is
//! `g ↦ f(x) + α_i(L_i⁻¹(x)) · (g − b)(L_i⁻¹(x))`, and the fixed point is
//! the perturbation `f^α`. Successive iterates shrink by the space's
//! contraction factor, so the stop rule is a sup-norm residual threshold.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FractalError, Result};
use crate::grid::GridFunction;
use crate::ifs::{IfsSpec, DERIV_ENDPOINT_TOL};
use crate::spaces::{self, SpaceSpec};

/// Residual magnitudes below this multiple of the value scale are rounding
/// noise; contraction ratios are not measured there.
const RATIO_FLOOR: f64 = 1e-13;

/// Outcome of a fixed-point run.
#[derive(Debug, Clone)]
pub struct FixedPointResult {
    /// The fixed point `f^α` on the grid.
    pub falpha: GridFunction,
    pub iterations: usize,
    /// Sup norm of the last successive-iterate difference.
    pub final_residual: f64,
    /// Largest observed residual ratio (0 when convergence took a single
    /// step and no ratio was measurable).
    pub contraction_estimate: f64,
}

/// Per-node application plan: subinterval index, pulled-back abscissa, and
/// the scaling and base values there. Only the iterate changes between
/// applications, so everything else is computed once.
struct NodePlan {
    seed: Vec<f64>,
    y: Vec<f64>,
    alpha_y: Vec<f64>,
    b_y: Vec<f64>,
}

fn build_plan(spec: &IfsSpec, b: &GridFunction) -> NodePlan {
    let f = &spec.seed;
    let n = f.len();
    let mut y = Vec::with_capacity(n);
    let mut alpha_y = Vec::with_capacity(n);
    let mut b_y = Vec::with_capacity(n);
    for j in 0..n {
        let x = f.node(j);
        let i = spec.partition.locate(x);
        let yy = spec
            .partition
            .map(i)
            .inverse(x)
            .expect("grid nodes lie inside the partition interval");
        y.push(yy);
        alpha_y.push(spec.scaling.entry(i).eval(yy));
        b_y.push(b.eval_clamped(yy));
    }
    NodePlan {
        seed: f.values().to_vec(),
        y,
        alpha_y,
        b_y,
    }
}

fn apply_plan(plan: &NodePlan, g: &GridFunction) -> GridFunction {
    let values: Vec<f64> = (0..plan.seed.len())
        .map(|j| plan.seed[j] + plan.alpha_y[j] * (g.eval_clamped(plan.y[j]) - plan.b_y[j]))
        .collect();
    GridFunction::from_samples(g.lo(), g.hi(), values).expect("finite iterate")
}

/// One application of the contraction to `g`.
///
/// With `g = b` or vanishing scaling the update returns the seed exactly.
pub fn apply_rb(spec: &IfsSpec, g: &GridFunction) -> Result<GridFunction> {
    if g.len() != spec.seed.len() {
        return Err(FractalError::SpecInvalid {
            reason: "iterate must live on the seed's grid".into(),
        });
    }
    let b = spec.resolve_base();
    Ok(apply_plan(&build_plan(spec, &b), g))
}

/// Drives the contraction to its fixed point starting from the seed.
pub fn fixed_point(spec: &IfsSpec, tol: f64, max_iter: usize) -> Result<FixedPointResult> {
    fixed_point_from(spec, spec.seed.clone(), tol, max_iter)
}

/// Same, from an arbitrary starting iterate (the fixed point is unique, so
/// any start converges to the same limit).
pub fn fixed_point_from(
    spec: &IfsSpec,
    start: GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    let (result, _) = run_iteration(spec, start, tol, max_iter, None)?;
    Ok(result)
}

/// Fixed-point run that also records the residual norms
/// `‖g_{n+1} − g_n‖` in `trace_space` (sup norm when `None`).
pub fn fixed_point_traced(
    spec: &IfsSpec,
    tol: f64,
    max_iter: usize,
    trace_space: Option<&SpaceSpec>,
) -> Result<(FixedPointResult, Vec<f64>)> {
    run_iteration(spec, spec.seed.clone(), tol, max_iter, trace_space)
}

fn run_iteration(
    spec: &IfsSpec,
    start: GridFunction,
    tol: f64,
    max_iter: usize,
    trace_space: Option<&SpaceSpec>,
) -> Result<(FixedPointResult, Vec<f64>)> {
    let report = spec.contraction_report()?;
    if !report.iteration_admissible() {
        return Err(FractalError::NotContractive {
            factor: report.factor,
        });
    }
    let b = spec.resolve_base();
    let plan = build_plan(spec, &b);
    let floor = RATIO_FLOOR * spec.seed.sup_norm().max(1.0);

    let mut g = start;
    let mut prev_residual: Option<f64> = None;
    let mut contraction_estimate: f64 = 0.0;
    let mut trace = Vec::new();
    for it in 1..=max_iter {
        let next = apply_plan(&plan, &g);
        let residual = next.max_abs_diff(&g);
        if let Some(space) = trace_space {
            trace.push(spaces::norm(space, &next.sub(&g))?);
        }
        if let Some(prev) = prev_residual {
            if prev > floor {
                contraction_estimate = contraction_estimate.max(residual / prev);
            }
        }
        prev_residual = Some(residual);
        g = next;
        if residual <= tol {
            return Ok((
                FixedPointResult {
                    falpha: g,
                    iterations: it,
                    final_residual: residual,
                    contraction_estimate,
                },
                trace,
            ));
        }
    }
    Err(FractalError::MaxIterExceeded {
        iterations: max_iter,
        residual: prev_residual.unwrap_or(f64::INFINITY),
    })
}

/// Sup-norm defect of the self-referential equation at the grid nodes:
/// `max_x |g(x) − f(x) − α_i(L⁻¹x)·(g − b)(L⁻¹x)|`.
pub fn self_ref_residual(spec: &IfsSpec, candidate: &GridFunction) -> Result<f64> {
    if candidate.len() != spec.seed.len() {
        return Err(FractalError::SpecInvalid {
            reason: "candidate must live on the seed's grid".into(),
        });
    }
    let b = spec.resolve_base();
    let plan = build_plan(spec, &b);
    let image = apply_plan(&plan, candidate);
    Ok(image.max_abs_diff(candidate))
}

/// Computes the r-th derivative of the fixed point by solving the
/// differentiated self-referential equation order by order: each order `s`
/// obeys its own contraction with scale `α_i(L⁻¹x)/a_i^s`, seeded by the
/// already-converged lower orders through the Leibniz sum.
pub fn derivative_recursion(
    spec: &IfsSpec,
    falpha: &GridFunction,
    r: usize,
) -> Result<GridFunction> {
    let k = match spec.space {
        SpaceSpec::Ck { k } => k,
        _ => {
            return Err(FractalError::SpecInvalid {
                reason: format!(
                    "derivative recursion needs a C^k space, spec uses {}",
                    spec.space
                ),
            })
        }
    };
    if r > k {
        return Err(FractalError::SpecInvalid {
            reason: format!("requested order {r} exceeds the space's k = {k}"),
        });
    }
    check_smooth_hypotheses(spec, k)?;
    if r == 0 {
        return Ok(falpha.clone());
    }

    let b = spec.resolve_base();
    let f = &spec.seed;
    let n = f.len();
    // Pull-backs and subinterval data, as in the base plan.
    let mut y = Vec::with_capacity(n);
    let mut sub = Vec::with_capacity(n);
    for j in 0..n {
        let x = f.node(j);
        let i = spec.partition.locate(x);
        sub.push(i);
        y.push(spec.partition.map(i).inverse(x)?);
    }
    let slopes: Vec<f64> = spec.partition.slopes().collect();

    // Derivatives of the sampled scaling entries up to order r; constants
    // have identically zero derivatives and are read off directly.
    let alpha_deriv: Vec<Vec<Option<GridFunction>>> = (0..spec.scaling.len())
        .map(|i| {
            (0..=r)
                .map(|q| match spec.scaling.entry(i) {
                    crate::scaling::ScalingEntry::Constant(_) => None,
                    crate::scaling::ScalingEntry::Sampled(g) => Some(
                        g.derivative(q)
                            .expect("hypothesis check bounds the order"),
                    ),
                })
                .collect()
        })
        .collect();
    let alpha_at = |i: usize, q: usize, yy: f64| -> f64 {
        match spec.scaling.entry(i) {
            crate::scaling::ScalingEntry::Constant(c) => {
                if q == 0 {
                    *c
                } else {
                    0.0
                }
            }
            crate::scaling::ScalingEntry::Sampled(_) => alpha_deriv[i][q]
                .as_ref()
                .map(|g| g.eval_clamped(yy))
                .unwrap_or(0.0),
        }
    };

    let mut orders: Vec<GridFunction> = vec![falpha.sub(&b)]; // (f^α − b)^{(0)}
    let mut result = falpha.clone();
    for s in 1..=r {
        let f_s = f.derivative(s)?;
        let b_s = b.derivative(s)?;
        // Known part of the order-s equation.
        let mut source = vec![0.0; n];
        for j in 0..n {
            let i = sub[j];
            let yy = y[j];
            let mut acc = 0.0;
            for (q, lower) in orders.iter().enumerate().take(s) {
                acc += binomial(s, q) * alpha_at(i, s - q, yy) * lower.eval_clamped(yy);
            }
            source[j] = f_s.values()[j] + acc / slopes[i].powi(s as i32);
        }
        // Contraction for the top-order term.
        let mut psi = f_s.clone();
        let mut converged = false;
        for _ in 0..crate::operator::DEFAULT_MAX_ITER {
            let mut next = vec![0.0; n];
            for j in 0..n {
                let i = sub[j];
                let yy = y[j];
                let scale = alpha_at(i, 0, yy) / slopes[i].powi(s as i32);
                next[j] = source[j] + scale * (psi.eval_clamped(yy) - b_s.eval_clamped(yy));
            }
            let next = GridFunction::from_samples(f.lo(), f.hi(), next)?;
            let residual = next.max_abs_diff(&psi);
            psi = next;
            if residual <= 1e-12 * f_s.sup_norm().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(FractalError::MaxIterExceeded {
                iterations: crate::operator::DEFAULT_MAX_ITER,
                residual: f64::NAN,
            });
        }
        orders.push(psi.sub(&b_s));
        result = psi;
    }
    Ok(result)
}

fn check_smooth_hypotheses(spec: &IfsSpec, k: usize) -> Result<()> {
    for (i, entry) in spec.scaling.entries().iter().enumerate() {
        let ck = entry.ck_norm(k)?;
        let bound = (spec.partition.map(i).a / 2.0).powi(k as i32);
        if ck > bound {
            return Err(FractalError::HypothesisViolated {
                reason: format!(
                    "‖α_{i}‖_C{k} = {ck} exceeds (a_{i}/2)^{k} = {bound}"
                ),
            });
        }
    }
    let b = spec.resolve_base();
    for s in 1..=k {
        let fs = spec.seed.derivative(s)?;
        let bs = b.derivative(s)?;
        let scale = fs.sup_norm().max(1.0);
        let lo = (bs.values()[0] - fs.values()[0]).abs();
        let hi = (bs.values()[bs.len() - 1] - fs.values()[fs.len() - 1]).abs();
        if lo.max(hi) > DERIV_ENDPOINT_TOL * scale {
            return Err(FractalError::HypothesisViolated {
                reason: format!(
                    "base derivative of order {s} does not match the seed at the endpoints \
                     (gap {})",
                    lo.max(hi)
                ),
            });
        }
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for j in 0..k.min(n - k) {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Random-iteration sampling of the graph attractor for constant scaling:
/// the maps `(x, y) ↦ (L_i(x), α_i y + f(L_i(x)) − α_i b(x))` are chosen
/// uniformly; points are emitted after a 100-step burn-in.
pub fn chaos_game(spec: &IfsSpec, n_points: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let alphas = spec.scaling.constants().ok_or_else(|| {
        FractalError::SpecInvalid {
            reason: "the attractor sampler requires constant scaling".into(),
        }
    })?;
    let sup = spec.scaling.sup_magnitude();
    if sup >= 1.0 {
        return Err(FractalError::NotContractive { factor: sup });
    }
    if n_points == 0 {
        return Ok(Vec::new());
    }
    let b = spec.resolve_base();
    let f = &spec.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = spec.partition.lo();
    let mut yv = f.values()[0];
    let mut points = Vec::with_capacity(n_points);
    const BURN_IN: usize = 100;
    for step in 0..BURN_IN + n_points {
        let i = rng.gen_range(0..spec.partition.interval_count());
        let nx = spec.partition.map(i).apply(x);
        let ny = alphas[i] * yv + f.eval_clamped(nx) - alphas[i] * b.eval_clamped(x);
        x = nx;
        yv = ny;
        if step >= BURN_IN {
            points.push((x, yv));
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_GRID_LEVEL;
    use crate::ifs::BaseRule;
    use crate::partition::Partition;
    use crate::scaling::ScalingProfile;

    fn reference_spec(alpha: Vec<f64>, space: SpaceSpec) -> IfsSpec {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let f = GridFunction::sample(0.0, 1.0, DEFAULT_GRID_LEVEL, |x| x * x);
        let b = GridFunction::sample(0.0, 1.0, DEFAULT_GRID_LEVEL, |x| x);
        IfsSpec::new(p, ScalingProfile::constant(alpha), f, BaseRule::Explicit(b), space).unwrap()
    }

    #[test]
    fn applying_to_base_returns_seed() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Bounded);
        let b = spec.resolve_base();
        let image = apply_rb(&spec, &b).unwrap();
        assert!(image.max_abs_diff(&spec.seed) <= 1e-14);
    }

    #[test]
    fn zero_scaling_returns_seed_for_any_iterate() {
        let spec = reference_spec(vec![0.0, 0.0], SpaceSpec::Bounded);
        let g = GridFunction::sample(0.0, 1.0, DEFAULT_GRID_LEVEL, |x| (7.0 * x).cos());
        let image = apply_rb(&spec, &g).unwrap();
        assert!(image.max_abs_diff(&spec.seed) == 0.0);
    }

    #[test]
    fn single_application_hand_value() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Bounded);
        let image = apply_rb(&spec, &spec.seed).unwrap();
        // f(0.25) + 0.4·(f−b)(0.5) = 0.0625 + 0.4·(0.25 − 0.5)
        let j = spec.seed.nearest_node(0.25);
        assert!((image.values()[j] - (-0.0375)).abs() < 1e-14);
    }

    #[test]
    fn fixed_point_hand_unrolled_values() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Bounded);
        let result = fixed_point(&spec, 1e-12, 200).unwrap();
        let g = &result.falpha;
        for (x, expect) in [(0.25, -0.0375), (0.75, 0.4625), (0.125, -0.099375)] {
            let j = g.nearest_node(x);
            assert!(
                (g.values()[j] - expect).abs() <= 1e-9,
                "at {x}: {} vs {expect}",
                g.values()[j]
            );
        }
        assert!(result.final_residual <= 1e-12);
        assert!(result.contraction_estimate < 1.0);
        assert!((result.contraction_estimate - 0.4).abs() <= 0.05);
    }

    #[test]
    fn zero_scaling_converges_immediately() {
        let spec = reference_spec(vec![0.0, 0.0], SpaceSpec::Bounded);
        let result = fixed_point(&spec, 1e-12, 10).unwrap();
        assert_eq!(result.iterations, 1);
        assert!(result.falpha.max_abs_diff(&spec.seed) == 0.0);
    }

    #[test]
    fn knot_interpolation_holds() {
        let spec = reference_spec(vec![0.4, -0.3], SpaceSpec::Bounded);
        let result = fixed_point(&spec, 1e-12, 200).unwrap();
        for &knot in spec.partition.knots() {
            let j = result.falpha.nearest_node(knot);
            assert!(
                (result.falpha.values()[j] - knot * knot).abs() <= 1e-11,
                "knot {knot}"
            );
        }
    }

    #[test]
    fn not_contractive_rejected() {
        let spec = reference_spec(vec![1.1, 0.4], SpaceSpec::Bounded);
        assert!(matches!(
            fixed_point(&spec, 1e-12, 50),
            Err(FractalError::NotContractive { .. })
        ));
    }

    #[test]
    fn uniqueness_from_different_starts() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Bounded);
        let from_seed = fixed_point(&spec, 1e-13, 200).unwrap().falpha;
        let from_zero =
            fixed_point_from(&spec, spec.seed.zeros_like(), 1e-13, 200).unwrap().falpha;
        assert!(from_seed.max_abs_diff(&from_zero) <= 1e-12);
    }

    #[test]
    fn self_ref_residual_examples() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Bounded);
        let fp = fixed_point(&spec, 1e-12, 200).unwrap().falpha;
        assert!(self_ref_residual(&spec, &fp).unwrap() <= 1e-10);
        assert!(self_ref_residual(&spec, &spec.seed).unwrap() > 1e-3);

        let zero = reference_spec(vec![0.0, 0.0], SpaceSpec::Bounded);
        assert_eq!(self_ref_residual(&zero, &zero.seed.clone()).unwrap(), 0.0);
    }

    fn smooth_spec(alpha: f64) -> IfsSpec {
        // base matches the seed's value and first derivative at both
        // endpoints, as the smooth-space existence theorem requires
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let pi = std::f64::consts::PI;
        let f = GridFunction::sample_with_derivs(
            0.0,
            1.0,
            DEFAULT_GRID_LEVEL,
            &[&|x| x * x, &|x| 2.0 * x],
        );
        let b = GridFunction::sample_with_derivs(
            0.0,
            1.0,
            DEFAULT_GRID_LEVEL,
            &[
                &move |x| x * x + 0.25 * (pi * x).sin().powi(2),
                &move |x| 2.0 * x + 0.25 * pi * (2.0 * pi * x).sin(),
            ],
        );
        IfsSpec::new(
            p,
            ScalingProfile::constant(vec![alpha, alpha]),
            f,
            BaseRule::Explicit(b),
            SpaceSpec::Ck { k: 1 },
        )
        .unwrap()
    }

    #[test]
    fn derivative_recursion_matches_seed_derivative_at_knots() {
        let spec = smooth_spec(0.2);
        let fp = fixed_point(&spec, 1e-12, 200).unwrap().falpha;
        let d1 = derivative_recursion(&spec, &fp, 1).unwrap();
        for (knot, expect) in [(0.0, 0.0), (0.5, 1.0), (1.0, 2.0)] {
            let j = d1.nearest_node(knot);
            assert!(
                (d1.values()[j] - expect).abs() <= 1e-9,
                "knot {knot}: {} vs {expect}",
                d1.values()[j]
            );
        }
    }

    #[test]
    fn derivative_recursion_zero_scaling_returns_seed_derivative() {
        let spec = smooth_spec(0.0);
        let fp = fixed_point(&spec, 1e-12, 200).unwrap().falpha;
        let d1 = derivative_recursion(&spec, &fp, 1).unwrap();
        let expect = GridFunction::sample(0.0, 1.0, DEFAULT_GRID_LEVEL, |x| 2.0 * x);
        assert!(d1.max_abs_diff(&expect) <= 1e-10);
    }

    #[test]
    fn derivative_recursion_agrees_with_finite_differences() {
        let spec = smooth_spec(0.2);
        let fp = fixed_point(&spec, 1e-12, 300).unwrap().falpha;
        let d1 = derivative_recursion(&spec, &fp, 1).unwrap();
        let fd = fp.finite_difference(1).unwrap();
        assert!(d1.max_abs_diff(&fd) <= 1e-3);
    }

    #[test]
    fn derivative_recursion_rejects_unmatched_base() {
        // b = x has b'(1) = 1 ≠ f'(1) = 2
        let spec = reference_spec(vec![0.2, 0.2], SpaceSpec::Ck { k: 1 });
        let fp = fixed_point(&spec, 1e-12, 200).unwrap().falpha;
        assert!(matches!(
            derivative_recursion(&spec, &fp, 1),
            Err(FractalError::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn chaos_game_zero_scaling_lands_on_seed_graph() {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let f = GridFunction::sample(0.0, 1.0, DEFAULT_GRID_LEVEL, |x| x);
        let b = GridFunction::sample(0.0, 1.0, DEFAULT_GRID_LEVEL, |x| {
            x + x * (1.0 - x)
        });
        let spec = IfsSpec::new(
            p,
            ScalingProfile::constant(vec![0.0, 0.0]),
            f,
            BaseRule::Explicit(b),
            SpaceSpec::Bounded,
        )
        .unwrap();
        let pts = chaos_game(&spec, 500, 42).unwrap();
        assert_eq!(pts.len(), 500);
        for (x, y) in pts {
            assert!((y - x).abs() <= 1e-9);
        }
    }

    #[test]
    fn chaos_game_tracks_grid_fixed_point() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Bounded);
        let fp = fixed_point(&spec, 1e-12, 200).unwrap().falpha;
        let pts = chaos_game(&spec, 2000, 9).unwrap();
        let near_quarter: Vec<&(f64, f64)> = pts
            .iter()
            .filter(|(x, _)| (x - 0.25).abs() < 5e-3)
            .collect();
        assert!(!near_quarter.is_empty());
        for (x, y) in near_quarter {
            assert!((y - fp.eval_clamped(*x)).abs() <= 2e-3);
        }
    }

    #[test]
    fn chaos_game_empty_request() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Bounded);
        assert!(chaos_game(&spec, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn observed_contraction_below_factor() {
        let spec = reference_spec(vec![0.4, 0.4], SpaceSpec::Bounded);
        let (result, trace) =
            fixed_point_traced(&spec, 1e-12, 200, Some(&SpaceSpec::Bounded)).unwrap();
        assert!(result.contraction_estimate <= 0.45);
        let floor = 1e-10;
        for w in trace.windows(2) {
            if w[0] > floor {
                assert!(w[1] / w[0] <= 0.45, "ratio {}", w[1] / w[0]);
            }
        }
    }
}
