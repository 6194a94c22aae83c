//! Sublinear Markov semigroups generated by controlled jump-diffusions.
//!
//! The value `S_t psi (x)` is computed two ways: as the solution of the
//! fully nonlinear integro-differential equation `u_t = G(x, u)` on a grid
//! ([`pide`]), and as a supremum of expectations over controlled
//! semimartingale laws by Monte Carlo ([`mc`]). [`verification`] checks the
//! two against each other and against the structural properties of the
//! semigroup.

pub mod coefficients;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod mc;
pub mod payoff;
pub mod pide;
pub mod scenarios;
pub mod verification;

pub use coefficients::{CoefficientField, ControlSet, JumpKernel, SymbolValue, TruncationFunction};
pub use error::{Error, Result};
pub use generator::{eval_generator, eval_generator_single, TestFunction};
pub use mc::{MarkovPolicy, SimulationResult};
pub use payoff::Payoff;
pub use pide::{solve, PolicyRecord, SchemeConfig, SpatialGrid, ValueField};
pub use scenarios::{get_scenario, list_scenarios, Scenario};
pub use verification::VerificationReport;
