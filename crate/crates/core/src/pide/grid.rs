use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::payoff::Payoff;

/// Uniform tensor grid on a box in one or two dimensions. Node `i` has axis
/// indices `(i % n[0], i / n[0])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: Vec<usize>,
    spacing: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: Vec<usize>) -> Result<Self> {
        let d = lo.len();
        if !(d == 1 || d == 2) {
            return Err(Error::Unsupported(format!(
                "grids of dimension {d}; only 1 and 2"
            )));
        }
        check_dim("grid upper corner", d, hi.len())?;
        check_dim("grid node counts", d, n.len())?;
        if n.iter().any(|&k| k < 3) {
            return Err(Error::Input("grids need at least 3 nodes per axis".into()));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(l, h)| !(l.is_finite() && h.is_finite() && h > l))
        {
            return Err(Error::Input(
                "grid box needs finite corners with lo < hi".into(),
            ));
        }
        let spacing = (0..d)
            .map(|a| (hi[a] - lo[a]) / (n[a] - 1) as f64)
            .collect();
        Ok(Self { lo, hi, n, spacing })
    }

    pub fn uniform_1d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.n
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn n_nodes(&self) -> usize {
        self.n.iter().product()
    }

    /// Same box with the spacing halved.
    pub fn refined(&self) -> Self {
        let n = self.n.iter().map(|k| 2 * (k - 1) + 1).collect();
        Self::new(self.lo.clone(), self.hi.clone(), n).expect("refinement of a valid grid")
    }

    pub fn axis_indices(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        self.n
            .iter()
            .map(|&k| {
                let i = rest % k;
                rest /= k;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.n)
            .rev()
            .fold(0, |acc, (&i, &k)| acc * k + i)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        // Pin the last node to `hi` exactly.
        if i + 1 == self.n[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing[axis]
        }
    }

    pub fn node(&self, node: usize) -> Vec<f64> {
        self.axis_indices(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.coord(a, i))
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.n_nodes()).map(|i| self.node(i))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(a, v)| *v >= self.lo[a] && *v <= self.hi[a])
    }

    /// Whether the node lies in the middle third of the box on every axis.
    pub fn in_interior_third(&self, node: usize) -> bool {
        self.node(node).iter().enumerate().all(|(a, v)| {
            let w = self.hi[a] - self.lo[a];
            *v >= self.lo[a] + w / 3.0 - 1e-12 && *v <= self.hi[a] - w / 3.0 + 1e-12
        })
    }

    /// Index of the node nearest to `x` after clamping into the box.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| {
                let s = ((x[a] - self.lo[a]) / self.spacing[a]).round();
                s.clamp(0.0, (self.n[a] - 1) as f64) as usize
            })
            .collect();
        self.flat_index(&idx)
    }

    /// Multilinear interpolation weights at `x` with clamp extension outside
    /// the box. Weights are nonnegative and sum to one. The flag reports
    /// whether `x` was outside the box.
    pub fn interpolation_weights(&self, x: &[f64]) -> (Vec<(usize, f64)>, bool) {
        let d = self.dim();
        let mut clamped = false;
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..d {
            let top = (self.n[a] - 1) as f64;
            let mut s = (x[a] - self.lo[a]) / self.spacing[a];
            if !(s >= 0.0) {
                clamped |= s < 0.0;
                s = 0.0;
            } else if s > top {
                clamped = true;
                s = top;
            }
            let i = (s.floor() as usize).min(self.n[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let mut out = Vec::with_capacity(1 << d);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = [0usize; 2];
            for a in 0..d {
                let up = (corner >> a) & 1 == 1;
                idx[a] = base[a] + up as usize;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w > 0.0 {
                out.push((self.flat_index(&idx[..d]), w));
            }
        }
        (out, clamped)
    }
}

/// Values of `u(t, .)` at the nodes of a grid, extended by clamping outside
/// the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueField {
    pub grid: SpatialGrid,
    pub t: f64,
    pub values: Vec<f64>,
}

impl ValueField {
    pub fn new(grid: SpatialGrid, t: f64, values: Vec<f64>) -> Result<Self> {
        check_dim("value field", grid.n_nodes(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("value field has non-finite entries".into()));
        }
        Ok(Self { grid, t, values })
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = grid.nodes().map(|x| f(&x)).collect();
        Self::new(grid.clone(), 0.0, values)
    }

    pub fn from_payoff(grid: &SpatialGrid, psi: &Payoff) -> Result<Self> {
        psi.validate()?;
        Self::from_fn(grid, |x| psi.eval(x))
    }

    pub fn constant(grid: &SpatialGrid, c: f64) -> Result<Self> {
        Self::new(grid.clone(), 0.0, vec![c; grid.n_nodes()])
    }

    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let (w, _) = self.grid.interpolation_weights(x);
        w.iter().map(|(i, c)| c * self.values[*i]).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(coordinates, value)` per node, in node order.
    pub fn rows(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.grid.node(i), *v))
    }
}
