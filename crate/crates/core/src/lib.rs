//! Numerics for a delayed modified Leslie–Gower predator–prey system with
//! Holling type II response and time-varying coefficients.
//!
//! The core is generic over the floating-point type through [`Scalar`];
//! the `*64` and `*32` aliases at the crate root fix the precision.

// `!(x > 0)` is used throughout to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod examples;
pub mod expr;
pub mod fixedpoint;
pub mod integrator;
pub mod model;
pub mod pap;
pub mod permanence;
pub mod quadrature;
pub mod scalar;
pub mod stability;
pub mod textfmt;

pub use error::{Error, Result};
pub use expr::{
    estimate_bounds, evaluate, parse_expression, BoundsEstimate, CoefficientExpr, ExprError,
};
pub use fixedpoint::{
    apply_upsilon, dde_residual, eval_f, iterate_fixed_point, kernel_identity_check,
    kernel_identity_with, tail_lengths, FArgs, FixedPointResult, GridFunctionPair, KernelIdentity,
    OperatorBounds, Outcome, Species, UpsilonOptions,
};
pub use integrator::{integrate, order_check, Knot, OrderCheck, Trajectory};
pub use model::{
    eval_rhs, per_capita, validate_model, Coefficient, DelayedState, Delays, HistoryComponent,
    InitialHistory, ModelSpec, Rates, ValidationReport,
};
pub use pap::{
    classify_means, ergodic_mean, find_near_period, pap0_trend, shift_defect, NearPeriod,
    PapReport, TrendReport, Verdict, Window,
};
pub use permanence::{
    check_c0, check_trajectory, compute_permanence_bounds, verify_permanence, CoefficientBounds,
    PermanenceBounds, PermanenceCheck, PermanenceInputs,
};
pub use scalar::Scalar;
pub use stability::{
    alpha_beta_from_gaps, compare_trajectories, estimate_liminf, eval_alpha_beta, lag_gaps,
    lag_inverse_gap, run_attractivity, uniform_grid, AttractivityResult, BetaDenominator, LagGaps,
    LiminfEstimate, StabilityReport,
};

pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type ValidationReport64 = ValidationReport<f64>;
pub type ValidationReport32 = ValidationReport<f32>;
pub type PermanenceBounds64 = PermanenceBounds<f64>;
pub type PermanenceBounds32 = PermanenceBounds<f32>;
pub type CoefficientBounds64 = CoefficientBounds<f64>;
pub type StabilityReport64 = StabilityReport<f64>;
pub type AttractivityResult64 = AttractivityResult<f64>;
pub type PapReport64 = PapReport<f64>;
pub type GridFunctionPair64 = GridFunctionPair<f64>;
pub type FixedPointResult64 = FixedPointResult<f64>;
