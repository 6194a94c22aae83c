//! Explicit monotone discretisation of the HJB operator.
//!
//! For every node and control the operator is stored in difference form
//! `sum_j c_j (u_j - u_0)` with `c_j >= 0`: upwinded compensated drift,
//! central second differences (seven-point stencil for the cross term in
//! two dimensions) and the jump differences `u(x + k) - u(x)` read through
//! multilinear interpolation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{SpatialGrid, ValueField};
use crate::coefficients::{compensated_drift, CoefficientField};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Multilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    /// Fraction of the monotonicity limit used as time step, in `(0, 1]`.
    pub cfl_safety: f64,
    pub interpolation: Interpolation,
    /// Small-jump threshold handed to the nonlocal split.
    pub kappa: f64,
    /// Optional cap on the time step, for jump-dominated problems where the
    /// monotonicity limit alone is too coarse for accuracy.
    pub max_dt: Option<f64>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            cfl_safety: 0.9,
            interpolation: Interpolation::Multilinear,
            kappa: 0.5,
            max_dt: None,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Input(format!(
                "cfl_safety {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Input(format!(
                "kappa {} must lie in (0, 1)",
                self.kappa
            )));
        }
        if let Some(m) = self.max_dt {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Input(format!("max_dt {m} must be positive")));
            }
        }
        Ok(())
    }
}

/// Time step for the explicit scheme:
///
/// ```text
/// dt = safety / max_{x, f} [ sum_a ( |b^_a| / dx_a + (a_aa + M_aa) / dx_a^2 ) + sum_i w_i ]
/// ```
///
/// with `b^` the compensated drift, capped by `output_interval` and the
/// configured `max_dt`. Falls back to `output_interval` when every
/// coefficient vanishes.
pub fn cfl_timestep(
    field: &CoefficientField,
    grid: &SpatialGrid,
    config: &SchemeConfig,
    output_interval: f64,
) -> Result<f64> {
    config.validate()?;
    check_dim("grid", field.dim(), grid.dim())?;
    if !(output_interval.is_finite() && output_interval > 0.0) {
        return Err(Error::Input("output interval must be positive".into()));
    }
    let h = grid.spacing();
    let denom = (0..grid.n_nodes())
        .into_par_iter()
        .map(|node| {
            let x = grid.node(node);
            (0..field.n_controls())
                .map(|f| {
                    let b = compensated_drift(field, f, &x);
                    let a = field.covariance(f, &x);
                    let m = field.small_jump_moment(f);
                    let local: f64 = (0..grid.dim())
                        .map(|ax| {
                            b[ax].abs() / h[ax] + (a[(ax, ax)] + m[(ax, ax)]) / (h[ax] * h[ax])
                        })
                        .sum();
                    local + field.kernel().total_rate(f)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let mut dt = if denom > 0.0 {
        (config.cfl_safety / denom).min(output_interval)
    } else {
        output_interval
    };
    if let Some(m) = config.max_dt {
        dt = dt.min(m);
    }
    Ok(dt)
}

/// The assembled operator: one nonnegative stencil per node and control.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: SpatialGrid,
    n_controls: usize,
    stencils: Vec<Vec<(u32, f64)>>,
    max_rate: f64,
    clamped_jump_targets: usize,
}

impl DiscreteOperator {
    pub fn assemble(field: &CoefficientField, grid: &SpatialGrid) -> Result<Self> {
        check_dim("grid", field.dim(), grid.dim())?;
        let n_controls = field.n_controls();
        let per_node: Vec<Result<(Vec<Vec<(u32, f64)>>, usize)>> = (0..grid.n_nodes())
            .into_par_iter()
            .map(|node| {
                let mut out = Vec::with_capacity(n_controls);
                let mut clamped = 0;
                for f in 0..n_controls {
                    let (s, c) = node_stencil(field, grid, node, f)?;
                    clamped += c;
                    out.push(s);
                }
                Ok((out, clamped))
            })
            .collect();
        let mut stencils = Vec::with_capacity(grid.n_nodes() * n_controls);
        let mut clamped_jump_targets = 0;
        for r in per_node {
            let (s, c) = r?;
            stencils.extend(s);
            clamped_jump_targets += c;
        }
        let max_rate = stencils
            .iter()
            .map(|s| s.iter().map(|(_, c)| c).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self {
            grid: grid.clone(),
            n_controls,
            stencils,
            max_rate,
            clamped_jump_targets,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Largest total off-diagonal weight; the scheme is monotone for
    /// `dt * max_rate <= 1`.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    /// Number of (node, control, atom) jump targets outside the box.
    pub fn clamped_jump_targets(&self) -> usize {
        self.clamped_jump_targets
    }

    pub fn stencil(&self, node: usize, f: usize) -> &[(u32, f64)] {
        &self.stencils[node * self.n_controls + f]
    }

    /// `sum_j c_j (u_j - u_node)` for one control.
    #[inline]
    pub fn apply_control(&self, values: &[f64], node: usize, f: usize) -> f64 {
        let u0 = values[node];
        let mut acc = 0.0;
        for &(j, c) in self.stencil(node, f) {
            acc += c * (values[j as usize] - u0);
        }
        acc
    }

    /// The discrete HJB operator at every node with its argmax control.
    pub fn hamiltonian(&self, values: &[f64]) -> Vec<(f64, u16)> {
        (0..self.grid.n_nodes())
            .into_par_iter()
            .map(|node| {
                let mut best = (self.apply_control(values, node, 0), 0u16);
                for f in 1..self.n_controls {
                    let v = self.apply_control(values, node, f);
                    if v > best.0 {
                        best = (v, f as u16);
                    }
                }
                best
            })
            .collect()
    }

    /// One forward Euler layer. Returns the new field and the argmax control
    /// per node.
    pub fn step(&self, u: &ValueField, dt: f64) -> Result<(ValueField, Vec<u16>)> {
        if u.grid != self.grid {
            return Err(Error::Input(
                "value field and operator use different grids".into(),
            ));
        }
        if !(dt > 0.0) || dt * self.max_rate > 1.0 + 1e-12 {
            return Err(Error::Input(format!(
                "time step {dt} outside the monotone range (0, {}]",
                1.0 / self.max_rate
            )));
        }
        let h = self.hamiltonian(&u.values);
        let mut values = Vec::with_capacity(h.len());
        let mut argmax = Vec::with_capacity(h.len());
        for (u0, (g, f)) in u.values.iter().zip(h) {
            values.push(u0 + dt * g);
            argmax.push(f);
        }
        Ok((
            ValueField {
                grid: u.grid.clone(),
                t: u.t + dt,
                values,
            },
            argmax,
        ))
    }
}

fn node_stencil(
    field: &CoefficientField,
    grid: &SpatialGrid,
    node: usize,
    f: usize,
) -> Result<(Vec<(u32, f64)>, usize)> {
    let d = grid.dim();
    let h = grid.spacing();
    let n = grid.nodes_per_axis();
    let idx = grid.axis_indices(node);
    let x = grid.node(node);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(8 + 4 * field.kernel().atoms(f).len());

    let neighbour = |offset: &[isize]| -> usize {
        let shifted: Vec<usize> = (0..d)
            .map(|a| (idx[a] as isize + offset[a]).clamp(0, n[a] as isize - 1) as usize)
            .collect();
        grid.flat_index(&shifted)
    };
    let unit = |a: usize, s: isize| -> Vec<isize> {
        let mut o = vec![0isize; d];
        o[a] = s;
        o
    };

    let b = compensated_drift(field, f, &x);
    let cov = field.covariance(f, &x) + field.small_jump_moment(f);

    let cross = if d == 2 { cov[(0, 1)] } else { 0.0 };
    let cross_weight = if d == 2 {
        cross.abs() / (2.0 * h[0] * h[1])
    } else {
        0.0
    };
    for a in 0..d {
        let second = cov[(a, a)] / (2.0 * h[a] * h[a]);
        let mut c = second - cross_weight;
        if c < 0.0 {
            if c < -1e-12 * second.max(cross_weight) {
                return Err(Error::Stencil {
                    node: idx.clone(),
                    control: f,
                    detail: format!(
                        "a_{a}{a} / dx_{a}^2 = {} < |a_01| / (dx_0 dx_1) = {}",
                        2.0 * second,
                        2.0 * cross_weight
                    ),
                });
            }
            c = 0.0;
        }
        let up = c + if b[a] > 0.0 { b[a] / h[a] } else { 0.0 };
        let down = c + if b[a] < 0.0 { -b[a] / h[a] } else { 0.0 };
        entries.push((neighbour(&unit(a, 1)), up));
        entries.push((neighbour(&unit(a, -1)), down));
    }
    if cross_weight > 0.0 {
        let s = if cross > 0.0 { 1 } else { -1 };
        entries.push((neighbour(&[1, s]), cross_weight));
        entries.push((neighbour(&[-1, -s]), cross_weight));
    }

    let mut clamped = 0;
    for (i, atom) in field.kernel().atoms(f).iter().enumerate() {
        if atom.rate == 0.0 {
            continue;
        }
        let k = field.jump(f, &x, i);
        if k.iter().all(|v| *v == 0.0) {
            continue;
        }
        let target: Vec<f64> = x.iter().zip(&k).map(|(a, b)| a + b).collect();
        let (weights, outside) = grid.interpolation_weights(&target);
        clamped += outside as usize;
        for (j, w) in weights {
            entries.push((j, atom.rate * w));
        }
    }

    entries.retain(|(j, c)| *j != node && *c > 0.0);
    entries.sort_by_key(|e| e.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
    for (j, c) in entries {
        match merged.last_mut() {
            Some(last) if last.0 as usize == j => last.1 += c,
            _ => merged.push((j as u32, c)),
        }
    }
    Ok((merged, clamped))
}

/// One explicit step of the scheme; assembles the operator on the fly.
pub fn step_explicit(
    u: &ValueField,
    field: &CoefficientField,
    config: &SchemeConfig,
    dt: f64,
) -> Result<ValueField> {
    config.validate()?;
    let op = DiscreteOperator::assemble(field, &u.grid)?;
    Ok(op.step(u, dt)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{ControlSet, JumpKernel};
    use nalgebra::DMatrix;

    fn controls(v: &[f64]) -> ControlSet {
        ControlSet::from_scalars(v).unwrap()
    }

    fn grid(dx: f64) -> SpatialGrid {
        SpatialGrid::uniform_1d(-1.0, 1.0, (2.0 / dx).round() as usize + 1).unwrap()
    }

    #[test]
    fn cfl_examples() {
        let exact = SchemeConfig {
            cfl_safety: 1.0,
            ..Default::default()
        };
        let zero = CoefficientField::zero(1, controls(&[0.0])).unwrap();
        assert_eq!(cfl_timestep(&zero, &grid(0.1), &exact, 0.3).unwrap(), 0.3);

        let transport = CoefficientField::builder(1, controls(&[0.0]))
            .drift(|_, _| vec![1.0])
            .build()
            .unwrap();
        assert!((cfl_timestep(&transport, &grid(0.1), &exact, 1.0).unwrap() - 0.1).abs() < 1e-15);

        let heat = CoefficientField::builder(1, controls(&[0.0]))
            .diffusion(1, |_, _| DMatrix::from_element(1, 1, 1.0))
            .build()
            .unwrap();
        assert!((cfl_timestep(&heat, &grid(0.1), &exact, 1.0).unwrap() - 0.01).abs() < 1e-15);

        let capped = SchemeConfig {
            max_dt: Some(0.001),
            ..exact
        };
        assert_eq!(
            cfl_timestep(&heat, &grid(0.1), &capped, 1.0).unwrap(),
            0.001
        );
    }

    #[test]
    fn zero_field_step_is_identity() {
        let g = grid(0.1);
        let zero = CoefficientField::zero(1, controls(&[0.0, 1.0])).unwrap();
        let u = ValueField::from_fn(&g, |x| x[0].sin()).unwrap();
        let v = step_explicit(&u, &zero, &SchemeConfig::default(), 0.5).unwrap();
        assert_eq!(v.values, u.values);
    }

    #[test]
    fn constants_are_preserved_exactly() {
        let kernel =
            JumpKernel::new(vec![vec![(vec![0.37], 1.3)], vec![(vec![-0.61], 0.4)]]).unwrap();
        let field = CoefficientField::builder(1, controls(&[0.3, 1.0]))
            .drift(|c, x| vec![c[0] * x[0].cos()])
            .diffusion(1, |c, _| DMatrix::from_element(1, 1, c[0]))
            .jumps(kernel, |_, _, z| z.to_vec())
            .build()
            .unwrap();
        let g = grid(0.05);
        let cfg = SchemeConfig::default();
        let dt = cfl_timestep(&field, &g, &cfg, 1.0).unwrap();
        let u = ValueField::constant(&g, 0.1).unwrap();
        let v = step_explicit(&u, &field, &cfg, dt).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.1));
    }

    #[test]
    fn rejects_non_monotone_step() {
        let heat = CoefficientField::builder(1, controls(&[0.0]))
            .diffusion(1, |_, _| DMatrix::from_element(1, 1, 1.0))
            .build()
            .unwrap();
        let g = grid(0.1);
        let u = ValueField::constant(&g, 0.0).unwrap();
        assert!(step_explicit(&u, &heat, &SchemeConfig::default(), 0.02).is_err());
    }

    #[test]
    fn cross_term_dominance_violation_names_node() {
        let field = CoefficientField::builder(2, controls(&[0.0]))
            .diffusion(2, |_, _| {
                DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 1.0, 0.1])
            })
            .build()
            .unwrap();
        let g = SpatialGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![5, 5]).unwrap();
        match DiscreteOperator::assemble(&field, &g) {
            Err(Error::Stencil { node, control, .. }) => {
                assert_eq!(node.len(), 2);
                assert_eq!(control, 0);
            }
            other => panic!("expected stencil error, got {other:?}"),
        }
    }

    #[test]
    fn cross_stencil_is_exact_on_quadratics() {
        // a = [[1, .5], [.5, 1]]: 1/2 tr(a D^2 u) for u = x y is a_01 = 0.5.
        let field = CoefficientField::builder(2, controls(&[0.0]))
            .diffusion(2, |_, _| {
                let r = 0.5f64;
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, r, (1.0 - r * r).sqrt()])
            })
            .build()
            .unwrap();
        let g = SpatialGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![11, 11]).unwrap();
        let op = DiscreteOperator::assemble(&field, &g).unwrap();
        let u = ValueField::from_fn(&g, |x| x[0] * x[1] + 3.0 * x[0] * x[0] - x[1] * x[1]).unwrap();
        let node = g.flat_index(&[5, 5]);
        let expected = 0.5 + 0.5 * (6.0 * 1.0) + 0.5 * (-2.0 * 1.0);
        assert!((op.apply_control(&u.values, node, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn upwind_transport_moves_mass_along_characteristics() {
        let transport = CoefficientField::builder(1, controls(&[0.0]))
            .drift(|_, _| vec![1.0])
            .build()
            .unwrap();
        let g = grid(0.1);
        let u = ValueField::from_fn(&g, |x| x[0]).unwrap();
        let cfg = SchemeConfig {
            cfl_safety: 1.0,
            ..Default::default()
        };
        let v = step_explicit(&u, &transport, &cfg, 0.1).unwrap();
        // dt = dx with unit speed shifts the data by one node.
        for i in 0..g.n_nodes() - 1 {
            assert!((v.values[i] - u.values[i + 1]).abs() < 1e-14);
        }
    }
}
