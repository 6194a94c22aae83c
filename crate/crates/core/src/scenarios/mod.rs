//! Bundled coefficient families with independent oracles.
//!
//! Every family has bounded, Lipschitz coefficients and finitely many jump
//! atoms, so the symbol decays on the shells `|x| <= r, |xi| <= 1/r` and the
//! jump kernels are trivially tight.

pub mod quadrature;
mod registry;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::coefficients::CoefficientField;
use crate::payoff::Payoff;
use crate::pide::{SchemeConfig, SpatialGrid};

pub use registry::{get_scenario, list_scenarios, SCENARIO_NAMES};

/// `(psi, x, T) -> S_T psi (x)` when the scenario can compute it
/// independently, `None` otherwise.
pub type Oracle = Arc<dyn Fn(&Payoff, &[f64], f64) -> Option<f64> + Send + Sync>;

pub type Params = BTreeMap<String, f64>;

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub params: Params,
    pub field: CoefficientField,
    pub grid: SpatialGrid,
    pub horizon: f64,
    pub payoff: Payoff,
    pub x0: Vec<f64>,
    pub scheme: SchemeConfig,
    pub oracle: Option<Oracle>,
    pub notes: String,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("grid", &self.grid)
            .field("horizon", &self.horizon)
            .field("payoff", &self.payoff)
            .field("x0", &self.x0)
            .field("has_oracle", &self.oracle.is_some())
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn oracle_value(&self, psi: &Payoff, x: &[f64], t: f64) -> Option<f64> {
        self.oracle.as_ref().and_then(|o| o(psi, x, t))
    }

    pub fn with_grid(mut self, grid: SpatialGrid) -> Self {
        self.grid = grid;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
    pub doc: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamSpec>,
    /// Why the family meets the regularity conditions.
    pub compliance: &'static str,
}
