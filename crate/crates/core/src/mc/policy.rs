use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pide::{PolicyRecord, SpatialGrid};

/// Control index per (time step, spatial cell). Cells are the nodes of a
/// solver grid; states are binned to the nearest node after clamping into the
/// box, so states outside the box take the choice of the nearest boundary
/// cell. A policy without a grid has a single cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    /// Calendar-time step boundaries, starting at 0.
    pub step_times: Vec<f64>,
    pub grid: Option<SpatialGrid>,
    pub choices: Vec<Vec<u16>>,
    pub n_controls: usize,
}

impl MarkovPolicy {
    /// Uses control `f` on `n_steps` equal steps of `[0, horizon]`.
    pub fn constant(f: usize, n_controls: usize, horizon: f64, n_steps: usize) -> Result<Self> {
        if f >= n_controls {
            return Err(Error::ControlIndex {
                index: f,
                len: n_controls,
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) || n_steps == 0 {
            return Err(Error::Input(format!(
                "constant policy needs a positive horizon and step count, got {horizon} and {n_steps}"
            )));
        }
        let step_times = (0..=n_steps)
            .map(|m| {
                if m == n_steps {
                    horizon
                } else {
                    horizon * m as f64 / n_steps as f64
                }
            })
            .collect();
        Ok(Self {
            step_times,
            grid: None,
            choices: vec![vec![f as u16]; n_steps],
            n_controls,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.choices.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.step_times.last().unwrap_or(&0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.step_times.len() != self.choices.len() + 1 || self.choices.is_empty() {
            return Err(Error::Input(
                "policy needs one choice layer per time step".into(),
            ));
        }
        if self.step_times[0] != 0.0 || self.step_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input(
                "policy step times must start at 0 and increase".into(),
            ));
        }
        let cells = self.grid.as_ref().map_or(1, |g| g.n_nodes());
        for layer in &self.choices {
            if layer.len() != cells {
                return Err(Error::Dimension {
                    what: "policy cells",
                    expected: cells,
                    got: layer.len(),
                });
            }
            if let Some(&bad) = layer.iter().find(|c| **c as usize >= self.n_controls) {
                return Err(Error::ControlIndex {
                    index: bad as usize,
                    len: self.n_controls,
                });
            }
        }
        Ok(())
    }

    pub fn cell(&self, x: &[f64]) -> usize {
        self.grid.as_ref().map_or(0, |g| g.nearest_node(x))
    }

    pub fn choice(&self, step: usize, x: &[f64]) -> usize {
        self.choices[step][self.cell(x)] as usize
    }

    /// Whether every choice equals `f`.
    pub fn is_constant(&self, f: usize) -> bool {
        self.choices.iter().flatten().all(|c| *c as usize == f)
    }
}

/// Converts the solver argmax record into a calendar-time policy. Solver
/// layer `n` covers remaining time `[tau_n, tau_{n+1}]`, which is calendar
/// time `[T - tau_{n+1}, T - tau_n]`.
pub fn extract_policy_from_pde(record: &PolicyRecord, grid: &SpatialGrid) -> Result<MarkovPolicy> {
    if &record.grid != grid {
        return Err(Error::Input(
            "policy record and simulation grid differ".into(),
        ));
    }
    let n = record.n_steps();
    if n == 0 {
        return Err(Error::Input("policy record has no time steps".into()));
    }
    let horizon = record.horizon();
    let step_times = (0..=n)
        .map(|m| {
            if m == 0 {
                0.0
            } else {
                horizon - record.step_times[n - m]
            }
        })
        .collect();
    let choices = (0..n).map(|m| record.choices[n - 1 - m].clone()).collect();
    let policy = MarkovPolicy {
        step_times,
        grid: Some(grid.clone()),
        choices,
        n_controls: record.n_controls,
    };
    policy.validate()?;
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_policy_shape() {
        let p = MarkovPolicy::constant(1, 3, 2.0, 4).unwrap();
        assert_eq!(p.step_times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(p.choice(2, &[100.0]), 1);
        assert!(p.is_constant(1));
        p.validate().unwrap();
        assert!(MarkovPolicy::constant(3, 3, 1.0, 1).is_err());
        assert!(MarkovPolicy::constant(0, 1, 0.0, 1).is_err());
    }

    #[test]
    fn extraction_reverses_time() {
        let grid = SpatialGrid::uniform_1d(-1.0, 1.0, 3).unwrap();
        let record = PolicyRecord {
            grid: grid.clone(),
            step_times: vec![0.0, 0.1, 0.3, 0.6],
            choices: vec![vec![0, 0, 0], vec![1, 1, 1], vec![0, 1, 0]],
            n_controls: 2,
        };
        let p = extract_policy_from_pde(&record, &grid).unwrap();
        let expected = [0.0, 0.3, 0.5, 0.6];
        for (a, b) in p.step_times.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        // first calendar step uses the longest remaining time
        assert_eq!(p.choices[0], vec![0, 1, 0]);
        assert_eq!(p.choices[2], vec![0, 0, 0]);
        assert_eq!(p.choice(0, &[0.1]), 1);
        assert_eq!(p.choice(0, &[5.0]), 0);
    }

    #[test]
    fn extraction_rejects_other_grid() {
        let grid = SpatialGrid::uniform_1d(-1.0, 1.0, 3).unwrap();
        let record = PolicyRecord {
            grid: grid.clone(),
            step_times: vec![0.0, 0.1],
            choices: vec![vec![0, 0, 0]],
            n_controls: 1,
        };
        let other = SpatialGrid::uniform_1d(-1.0, 1.0, 5).unwrap();
        assert!(extract_policy_from_pde(&record, &other).is_err());
    }
}
