use serde::{Deserialize, Serialize};

use super::grid::{SpatialGrid, ValueField};
use super::scheme::SchemeConfig;
use super::solve::solve_to;
use crate::error::{Error, Result};
use crate::payoff::Payoff;
use crate::scenarios::Scenario;

/// Required error reduction per halving of the spacing.
pub const MIN_RATIO: f64 = 1.5;
/// Errors below this are treated as converged: at this size they are set by
/// rounding and by the far boundary, neither of which shrinks with the
/// spacing.
pub const CONVERGED_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub nodes_per_axis: Vec<usize>,
    pub spacing: Vec<f64>,
    /// Sup-error against the oracle over the interior third of the box.
    pub sup_error: f64,
    pub interior_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub scenario: String,
    pub payoff: String,
    pub horizon: f64,
    pub levels: Vec<RefinementLevel>,
    /// `err[l] / err[l + 1]`, infinite when the finer error is zero.
    pub ratios: Vec<f64>,
    pub pass: bool,
}

/// The scheme to pair with a grid of half the spacing.
pub fn refined_scheme(scheme: &SchemeConfig) -> SchemeConfig {
    SchemeConfig {
        max_dt: scheme.max_dt.map(|m| m / 2.0),
        ..*scheme
    }
}

/// Solves on the scenario grid and `levels - 1` successive halvings, and
/// compares each against the scenario oracle on the interior third. A time
/// step cap, when configured, is halved together with the spacing.
pub fn refine_study(
    scenario: &Scenario,
    payoff: &Payoff,
    levels: usize,
) -> Result<RefinementReport> {
    if levels == 0 {
        return Err(Error::Input("refine_study needs at least one level".into()));
    }
    let t = scenario.horizon;
    if scenario
        .oracle_value(payoff, &scenario.grid.node(0), t)
        .is_none()
    {
        return Err(Error::Unsupported(format!(
            "scenario {} has no oracle for payoff {}",
            scenario.name,
            payoff.name()
        )));
    }
    let mut grid: SpatialGrid = scenario.grid.clone();
    let mut scheme = scenario.scheme;
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        if l > 0 {
            grid = grid.refined();
            scheme = refined_scheme(&scheme);
        }
        let psi = ValueField::from_payoff(&grid, payoff)?;
        let u = solve_to(&psi, &scenario.field, t, &scheme)?;
        let mut err: f64 = 0.0;
        let mut count = 0;
        for node in 0..grid.n_nodes() {
            if !grid.in_interior_third(node) {
                continue;
            }
            let x = grid.node(node);
            let exact = scenario
                .oracle_value(payoff, &x, t)
                .ok_or_else(|| Error::Unsupported(format!("oracle undefined at {x:?}")))?;
            err = err.max((u.values[node] - exact).abs());
            count += 1;
        }
        out.push(RefinementLevel {
            nodes_per_axis: grid.nodes_per_axis().to_vec(),
            spacing: grid.spacing().to_vec(),
            sup_error: err,
            interior_nodes: count,
        });
    }
    let ratios: Vec<f64> = out
        .windows(2)
        .map(|w| {
            if w[1].sup_error == 0.0 {
                f64::INFINITY
            } else {
                w[0].sup_error / w[1].sup_error
            }
        })
        .collect();
    let pass = out
        .windows(2)
        .zip(&ratios)
        .all(|(w, r)| w[1].sup_error <= CONVERGED_FLOOR || *r >= MIN_RATIO);
    Ok(RefinementReport {
        scenario: scenario.name.clone(),
        payoff: payoff.name().to_string(),
        horizon: t,
        levels: out,
        ratios,
        pass,
    })
}
