//! Construction and analysis of self-referential (fractal) perturbations
//! of functions on a compact interval.
//!
//! Given a partition of the interval, a per-subinterval scale profile, a
//! seed function `f` and a base function `b` matching `f` at the endpoints,
//! the perturbation `f^α` is the unique fixed point of a contraction built
//! from the subinterval affine maps. The crate provides:
//!
//! * the iteration engine producing `f^α` and sampling its graph
//!   ([`rb`]),
//! * norms and contraction factors in bounded, Lebesgue, smooth, Sobolev
//!   and Hölder settings ([`spaces`]),
//! * the linear operator `f ↦ f^α` with perturbation and operator-norm
//!   bounds plus Neumann-series inversion ([`operator`]),
//! * Schauder bases of self-referential functions built by integrating the
//!   Haar system upward ([`basis`]),
//! * a JSON problem-file front end ([`problem`]) used by the companion CLI.

pub mod basis;
pub mod error;
pub mod expr;
pub mod grid;
pub mod ifs;
pub mod operator;
pub mod partition;
pub mod problem;
pub mod rb;
pub mod scaling;
pub mod spaces;

pub use error::{FractalError, Result};
pub use grid::{GridFunction, DEFAULT_GRID_LEVEL};
pub use ifs::{validate_spec, BaseRule, IfsSpec, ValidationCheck, ValidationReport};
pub use operator::{
    falpha_operator, neumann_inverse, operator_norm_lower_bound, operator_norm_upper_bound,
    perturbation_bounds, FractalTemplate, LinearBaseOperator, PerturbationReport,
};
pub use partition::{AffineMap, Partition};
pub use rb::{
    apply_rb, chaos_game, derivative_recursion, fixed_point, fixed_point_from, fixed_point_traced,
    self_ref_residual, FixedPointResult,
};
pub use scaling::{ScalingEntry, ScalingProfile};
pub use spaces::{contraction_factor, hoelder_seminorm, norm, ContractionReport, SpaceSpec};
