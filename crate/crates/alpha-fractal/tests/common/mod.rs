//! Shared fixtures for the integration suites: the reference problem and
//! seeded random spec generators.
#![allow(dead_code)] // each test binary uses a different subset

use alpha_fractal::grid::DEFAULT_GRID_LEVEL;
use alpha_fractal::operator::{random_test_function, FractalTemplate, LinearBaseOperator};
use alpha_fractal::{
    BaseRule, GridFunction, IfsSpec, Partition, ScalingProfile, SpaceSpec,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const M: u32 = DEFAULT_GRID_LEVEL;

/// The reference problem: unit interval, middle knot at 1/2, seed x²,
/// base x, scale 0.4 on both subintervals.
pub fn reference_spec(space: SpaceSpec) -> IfsSpec {
    reference_spec_alpha(0.4, space)
}

pub fn reference_spec_alpha(alpha: f64, space: SpaceSpec) -> IfsSpec {
    let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
    let f = GridFunction::sample_with_derivs(0.0, 1.0, M, &[&|x| x * x, &|x| 2.0 * x, &|_| 2.0]);
    let b = GridFunction::sample_with_derivs(0.0, 1.0, M, &[&|x| x, &|_| 1.0, &|_| 0.0]);
    IfsSpec::new(
        p,
        ScalingProfile::constant(vec![alpha, alpha]),
        f,
        BaseRule::Explicit(b),
        space,
    )
    .unwrap()
}

pub fn reference_template(alpha: f64, space: SpaceSpec) -> FractalTemplate {
    FractalTemplate {
        partition: Partition::new(vec![0.0, 0.5, 1.0]).unwrap(),
        scaling: ScalingProfile::constant(vec![alpha, alpha]),
        base: LinearBaseOperator::EndpointLine,
        space,
    }
}

/// Random partition with knots on the 1/32 lattice (grid nodes at the
/// default level, so knot samples are exact).
pub fn random_dyadic_partition(rng: &mut impl Rng) -> Partition {
    let n_interior = rng.gen_range(1..=4);
    let mut picks: Vec<u32> = Vec::new();
    while picks.len() < n_interior {
        let c = rng.gen_range(1..32u32);
        if !picks.contains(&c) {
            picks.push(c);
        }
    }
    picks.sort_unstable();
    let mut knots = vec![0.0];
    knots.extend(picks.iter().map(|&c| c as f64 / 32.0));
    knots.push(1.0);
    Partition::new(knots).unwrap()
}

/// Random contractive spec in the bounded space: dyadic partition, random
/// seed, endpoint-line base, constant or sampled scaling below one in sup
/// magnitude.
pub fn random_bounded_spec(rng: &mut impl Rng) -> IfsSpec {
    let partition = random_dyadic_partition(rng);
    let n = partition.interval_count();
    let f = random_test_function(0.0, 1.0, M, rng);
    let scaling = if rng.gen_bool(0.25) {
        let profiles: Vec<GridFunction> = (0..n)
            .map(|_| {
                let c: f64 = rng.gen_range(-0.9..0.9);
                GridFunction::sample(0.0, 1.0, M, move |x| {
                    c * (0.4 + 0.2 * (std::f64::consts::PI * x).sin())
                })
            })
            .collect();
        ScalingProfile::sampled(profiles)
    } else {
        ScalingProfile::constant((0..n).map(|_| rng.gen_range(-0.75..0.75)).collect())
    };
    IfsSpec::new(
        partition,
        scaling,
        f,
        BaseRule::Operator(LinearBaseOperator::EndpointLine),
        SpaceSpec::Bounded,
    )
    .unwrap()
}

/// Random endpoint-line template in one of the operator-friendly spaces,
/// with the scale vector shrunk until the space factor sits at or below
/// `max_factor`.
pub fn random_template(rng: &mut impl Rng, max_factor: f64) -> FractalTemplate {
    // Spaces where the discrete perturbation inequalities carry genuine
    // margin: sup-type norms are dominated sample-by-sample, and the
    // Sobolev factor majorizes every derivative order strictly. The
    // finite-p Lebesgue bound is an equality for constant scaling, so
    // quadrature noise sits directly on it and it is exercised separately.
    let spaces = [
        SpaceSpec::Bounded,
        SpaceSpec::Lp { p: f64::INFINITY },
        SpaceSpec::Ck { k: 0 },
        SpaceSpec::Sobolev { k: 1, p: 2.0 },
    ];
    let space = spaces[rng.gen_range(0..spaces.len())];
    let partition = random_dyadic_partition(rng);
    let n = partition.interval_count();
    let mut alphas: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
    // every space here has a factor positively homogeneous in the scale
    // vector, so one shrink lands exactly on max_factor when needed
    let factor = alpha_fractal::contraction_factor(
        &partition,
        &ScalingProfile::constant(alphas.clone()),
        &space,
    )
    .unwrap()
    .factor;
    if factor > max_factor {
        let shrink = max_factor / factor;
        for a in &mut alphas {
            *a *= shrink;
        }
    }
    FractalTemplate {
        partition,
        scaling: ScalingProfile::constant(alphas),
        base: LinearBaseOperator::EndpointLine,
        space,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
