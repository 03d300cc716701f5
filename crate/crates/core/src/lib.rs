//! Mean-field model predictive control for interacting agents.
//!
//! Agents on an interval relax towards each other through a pairwise kernel
//! and are steered by a common control. The crate provides the particle
//! dynamics and their exact moment reduction, quadratic mean costs, a
//! horizon-`N` MPC solver, the a-priori suboptimality bound `α_N` derived from
//! exponential controllability, and a small exact simplex used to check that
//! bound independently.
//!
//! Numerical code is generic over [`Real`] (`f32`/`f64`); the LP and the
//! product form of `α_N` also run over exact rationals via [`LpScalar`]. The
//! `*F64` aliases below fix the scalar for everyday use.

pub mod bounds;
pub mod costs;
pub mod dynamics;
pub mod error;
pub mod lp;
pub mod measures;
pub mod mpc;
pub mod scalar;

pub use bounds::{
    alpha_n, beta, controllability_from_nu, example2_alpha, gamma_sequence, verify_inequalities,
    BoundResult, ControllabilityParams, InequalityReport,
};
pub use costs::{
    horizon_cost, optimal_running_cost, running_cost, truncated_infinite_cost, QuadraticMeanCost,
    RunningCost,
};
pub use dynamics::{
    simulate, step_mean, step_particles, step_second_moment, ControlSource, Kernel, MeanFieldState,
    ModelConfig, Trajectory,
};
pub use error::{Error, Result};
pub use lp::{alpha_via_lp, alpha_via_lp_exact, solve_lp, LpOutcome, LpProblem, Relation};
pub use measures::{
    moments, sample_uniform, wasserstein1, EmpiricalMeasure, Interval, MomentSummary,
};
pub use mpc::{
    closed_loop, instantaneous_feedback, mpc_feedback, solve_horizon, HorizonPolicy,
    HorizonSolution, HorizonSolver, MpcConfig,
};
pub use scalar::{LpScalar, Real};

pub use num_rational::BigRational;

pub type IntervalF64 = Interval<f64>;
pub type EmpiricalMeasureF64 = EmpiricalMeasure<f64>;
pub type MomentSummaryF64 = MomentSummary<f64>;
pub type ModelConfigF64 = ModelConfig<f64>;
pub type MpcConfigF64 = MpcConfig<f64>;
pub type QuadraticMeanCostF64 = QuadraticMeanCost<f64>;
pub type ControllabilityParamsF64 = ControllabilityParams<f64>;
pub type ParticleTrajectoryF64 = Trajectory<f64, EmpiricalMeasure<f64>>;
pub type ReducedTrajectoryF64 = Trajectory<f64, MomentSummary<f64>>;
pub type LpProblemF64 = LpProblem<f64>;
pub type LpProblemExact = LpProblem<BigRational>;
