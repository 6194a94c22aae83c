//! Executable checks of the semigroup structure: composition, the generator
//! limit, the grid/Monte Carlo representation, far-field decay and the shape
//! of the maximal inequality.

mod checks;
mod report;

pub use checks::{
    feller_decay_check, generator_limit_check, maximal_inequality_check,
    representation_cross_check, semigroup_compose_check, verify_scenario, verify_selected,
    CheckKind, McSettings, COMPOSE_TOL, GENERATOR_REL_TOL, REPRESENTATION_TOL,
};
pub use report::{Bound, Metric, VerificationReport};
