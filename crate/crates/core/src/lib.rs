//! Stochastic direction-oriented multi-objective gradient descent.
//!
//! The crate computes update directions for problems with `K` objectives
//! sharing one parameter vector. The main method (`SDMGrad`) solves a
//! regularized min-norm problem over the probability simplex with projected
//! SGD, then steps along `G w + λ G w̃`, where `w̃` fixes a target combination
//! of the objectives (usually their average). An objective-sampling variant
//! (`SDMGrad-OS`) evaluates only a random subset of the objective gradients
//! per draw. MGDA, plain GD, PCGrad and CAGrad are provided as baselines.
//!
//! Everything here is `no_std` with `alloc`; file formats and the CLI live in
//! the `sdmgrad-harness` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod metrics;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod simplex;
pub mod solvers;
pub mod types;

pub use error::{Error, Result};
pub use metrics::{delta_m, pareto_stationarity, pareto_stationarity_default};
pub use optimizers::{apply_step, AdamState, LearningRateSchedule, OptimizerKind, OptimizerState};
pub use problems::{
    quadratic_problem, stochastic_gradients, toy_gradients, toy_losses, NoiseSpec, Problem,
    ProblemDescriptor, QuadraticProblem, ToyProblem,
};
pub use simplex::project_simplex;
pub use solvers::{
    cagrad_direction, gd_direction, mgda_weights, pcgrad_direction, run_solver, sample_mask,
    sdmgrad_direction, sdmgrad_inner_step, sdmgrad_os_direction, sdmgrad_os_inner_gradient,
    sdmgrad_os_inner_step, sdmgrad_solve_weights, InnerState, Method, ObjectiveMask, RunOptions,
    Trajectory,
};
pub use types::{
    validate_simplex, Direction, GradientMatrix, ParameterVector, SimplexWeights, SolverConfig,
    TargetCombination, TrajectoryRecord,
};
