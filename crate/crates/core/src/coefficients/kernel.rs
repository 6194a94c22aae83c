use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Bounding function on the mark space.
pub type GammaFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One weighted mark of a finite-atom jump measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpAtom {
    pub mark: Vec<f64>,
    /// Intensity, in units of 1/time.
    pub rate: f64,
    /// Value of the bounding function at `mark`.
    pub gamma: f64,
}

/// Finite-atom jump measures, one per control, plus the moment-matched
/// second-moment matrix standing in for the discarded small jumps.
#[derive(Clone)]
pub struct JumpKernel {
    atoms: Vec<Vec<JumpAtom>>,
    gamma_fn: Option<GammaFn>,
    kappa: f64,
    small_jump_moment: Vec<Option<DMatrix<f64>>>,
}

impl fmt::Debug for JumpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpKernel")
            .field("atoms", &self.atoms)
            .field("has_gamma_fn", &self.gamma_fn.is_some())
            .field("kappa", &self.kappa)
            .field("small_jump_moment", &self.small_jump_moment)
            .finish()
    }
}

impl JumpKernel {
    /// `atoms[f]` lists `(mark, rate)` pairs for control `f`. Bounding values
    /// are filled in by the coefficient field builder.
    pub fn new(atoms: Vec<Vec<(Vec<f64>, f64)>>) -> Result<Self> {
        let mut resolved = Vec::with_capacity(atoms.len());
        for (f, list) in atoms.into_iter().enumerate() {
            let mut out = Vec::with_capacity(list.len());
            for (mark, rate) in list {
                if !(rate.is_finite() && rate >= 0.0) {
                    return Err(Error::Input(format!(
                        "control {f}: jump rate {rate} must be finite and nonnegative"
                    )));
                }
                if mark.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Input(format!("control {f}: non-finite jump mark")));
                }
                out.push(JumpAtom {
                    mark,
                    rate,
                    gamma: f64::NAN,
                });
            }
            resolved.push(out);
        }
        let n = resolved.len();
        Ok(Self {
            atoms: resolved,
            gamma_fn: None,
            kappa: 1.0,
            small_jump_moment: vec![None; n],
        })
    }

    /// No jumps for any of `n_controls` controls.
    pub fn empty(n_controls: usize) -> Self {
        Self {
            atoms: vec![Vec::new(); n_controls],
            gamma_fn: None,
            kappa: 1.0,
            small_jump_moment: vec![None; n_controls],
        }
    }

    pub fn with_gamma(mut self, gamma: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.gamma_fn = Some(Arc::new(gamma));
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::Input(format!("kappa {kappa} must lie in (0, 1]")));
        }
        self.kappa = kappa;
        Ok(self)
    }

    /// Second-moment matrix of the small jumps of control `f`, folded into the
    /// diffusion.
    pub fn with_small_jump_moment(mut self, f: usize, m: DMatrix<f64>) -> Result<Self> {
        if f >= self.atoms.len() {
            return Err(Error::ControlIndex {
                index: f,
                len: self.atoms.len(),
            });
        }
        self.small_jump_moment[f] = Some(m);
        Ok(self)
    }

    pub fn n_controls(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self, f: usize) -> &[JumpAtom] {
        &self.atoms[f]
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma_fn(&self) -> Option<&GammaFn> {
        self.gamma_fn.as_ref()
    }

    pub fn has_atoms(&self) -> bool {
        self.atoms.iter().any(|a| !a.is_empty())
    }

    pub fn total_rate(&self, f: usize) -> f64 {
        self.atoms[f].iter().map(|a| a.rate).sum()
    }

    pub(crate) fn small_jump_moment_raw(&self, f: usize) -> Option<&DMatrix<f64>> {
        self.small_jump_moment[f].as_ref()
    }

    pub(crate) fn set_gammas(&mut self, gammas: Vec<Vec<f64>>) {
        for (list, g) in self.atoms.iter_mut().zip(gammas) {
            for (atom, value) in list.iter_mut().zip(g) {
                atom.gamma = value;
            }
        }
    }

    pub(crate) fn set_small_jump_moments(&mut self, m: Vec<DMatrix<f64>>) {
        self.small_jump_moment = m.into_iter().map(Some).collect();
    }

    /// `sum_i w_i (gamma_i^2 ∧ 1)` for control `f`.
    pub fn integrability_mass(&self, f: usize) -> f64 {
        self.atoms[f]
            .iter()
            .map(|a| a.rate * (a.gamma * a.gamma).min(1.0))
            .sum()
    }
}
