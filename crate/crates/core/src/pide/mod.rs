//! Grid solver for `u_t = G(x, u)`, `u(0) = psi`, on a truncated box.

mod grid;
mod refine;
mod scheme;
mod solve;

pub use grid::{SpatialGrid, ValueField};
pub use refine::{
    refine_study, refined_scheme, RefinementLevel, RefinementReport, CONVERGED_FLOOR, MIN_RATIO,
};
pub use scheme::{cfl_timestep, step_explicit, DiscreteOperator, Interpolation, SchemeConfig};
pub use solve::{solve, solve_to, PolicyRecord, Solution, SolveSummary};
