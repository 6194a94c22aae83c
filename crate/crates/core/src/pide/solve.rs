use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::grid::{SpatialGrid, ValueField};
use super::scheme::{cfl_timestep, DiscreteOperator, SchemeConfig};
use crate::coefficients::CoefficientField;
use crate::error::{check_dim, Error, Result};

/// Argmax control per node for every time layer of a solve. Layer `n` covers
/// the elapsed-time interval `[step_times[n], step_times[n + 1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub grid: SpatialGrid,
    pub step_times: Vec<f64>,
    pub choices: Vec<Vec<u16>>,
    pub n_controls: usize,
}

impl PolicyRecord {
    pub fn n_steps(&self) -> usize {
        self.choices.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.step_times.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub grid: SpatialGrid,
    /// Time step from the stability bound, before subdivision.
    pub dt: f64,
    pub steps: usize,
    /// Jump targets outside the box, read through clamp extension.
    pub clamped_jump_targets: usize,
    /// Node updates that left `[min psi, max psi]`; zero for a monotone run.
    pub max_principle_violations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Values at the requested output times, in order.
    pub trajectory: Vec<ValueField>,
    pub policy: PolicyRecord,
    pub summary: SolveSummary,
}

impl Solution {
    pub fn last(&self) -> &ValueField {
        self.trajectory.last().expect("at least one output time")
    }
}

/// Marches `u(0) = psi` forward with the explicit monotone scheme. The
/// stability step is shrunk on each output interval so that every output
/// time is hit exactly. Output times are durations measured from `psi.t`.
pub fn solve(
    psi: &ValueField,
    field: &CoefficientField,
    output_times: &[f64],
    config: &SchemeConfig,
) -> Result<Solution> {
    let start = Instant::now();
    config.validate()?;
    check_dim("grid", field.dim(), psi.grid.dim())?;
    if output_times.is_empty() {
        return Err(Error::Input("at least one output time is required".into()));
    }
    if output_times[0] <= 0.0
        || output_times.windows(2).any(|w| w[1] <= w[0])
        || output_times.iter().any(|t| !t.is_finite())
    {
        return Err(Error::Input(
            "output times must be positive and increasing".into(),
        ));
    }
    let horizon = *output_times.last().unwrap();
    let op = DiscreteOperator::assemble(field, &psi.grid)?;
    let dt_cfl = cfl_timestep(field, &psi.grid, config, horizon)?;

    let (lo, hi) = (psi.min(), psi.max());
    let mut u = psi.clone();
    let mut trajectory = Vec::with_capacity(output_times.len());
    let mut step_times = vec![0.0];
    let mut choices = Vec::new();
    let mut violations = 0;
    let mut elapsed = 0.0;
    for &target in output_times {
        let span = target - elapsed;
        let n = ((span / dt_cfl) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = span / n as f64;
        for k in 1..=n {
            let (next, argmax) = op.step(&u, dt)?;
            violations += next.values.iter().filter(|v| **v < lo || **v > hi).count();
            u = next;
            choices.push(argmax);
            step_times.push(if k == n {
                target
            } else {
                elapsed + k as f64 * dt
            });
        }
        elapsed = target;
        u.t = psi.t + target;
        trajectory.push(u.clone());
    }

    let steps = choices.len();
    Ok(Solution {
        trajectory,
        policy: PolicyRecord {
            grid: psi.grid.clone(),
            step_times,
            choices,
            n_controls: field.n_controls(),
        },
        summary: SolveSummary {
            grid: psi.grid.clone(),
            dt: dt_cfl,
            steps,
            clamped_jump_targets: op.clamped_jump_targets(),
            max_principle_violations: violations,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// `S_T psi` on the grid of `psi`.
pub fn solve_to(
    psi: &ValueField,
    field: &CoefficientField,
    horizon: f64,
    config: &SchemeConfig,
) -> Result<ValueField> {
    let mut sol = solve(psi, field, &[horizon], config)?;
    Ok(sol.trajectory.pop().expect("one output"))
}
