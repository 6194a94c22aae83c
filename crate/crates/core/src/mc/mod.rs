//! Monte Carlo for controlled jump-diffusions under piecewise-constant
//! Markov policies. Every estimate is the expectation under one admissible
//! law, so it is a lower bound for the sublinear value up to the Euler bias.

mod engine;
mod policy;

pub use engine::{
    best_constant_policy, estimate_value, exit_probability, simulate_path, ExitRow, ExitTable,
    PathOutcome, SimulationResult, MIN_PATHS,
};
pub use policy::{extract_policy_from_pde, MarkovPolicy};
