use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ControlSet, JumpKernel, TruncationFunction};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm};

pub type DriftFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type DiffusionFn = Arc<dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;
pub type JumpFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Lipschitz constants a scenario claims for its modified drift, diffusion
/// and jump amplitude (the latter relative to the bounding function).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclaredLipschitz {
    pub btilde: f64,
    pub sigma: f64,
    pub k_over_gamma: f64,
}

/// Axis-aligned box used to sample coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("sample box", self.lo.len(), self.hi.len())?;
        if self
            .lo
            .iter()
            .zip(&self.hi)
            .any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite())
        {
            return Err(Error::Input(
                "sample box corners must be finite with lo <= hi".into(),
            ));
        }
        Ok(())
    }

    /// Deterministic sample: a tensor grid with `per_axis` points per axis
    /// when that stays small, otherwise seeded uniform points.
    pub fn points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let per_axis = per_axis.max(2);
        let total = (per_axis as f64).powi(d as i32);
        if total <= 20_000.0 {
            let total = total as usize;
            (0..total)
                .map(|mut idx| {
                    (0..d)
                        .map(|a| {
                            let i = idx % per_axis;
                            idx /= per_axis;
                            let s = i as f64 / (per_axis - 1) as f64;
                            self.lo[a] + s * (self.hi[a] - self.lo[a])
                        })
                        .collect()
                })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            (0..2000)
                .map(|_| {
                    (0..d)
                        .map(|a| self.lo[a] + rng.random::<f64>() * (self.hi[a] - self.lo[a]))
                        .collect()
                })
                .collect()
        }
    }
}

/// The controlled coefficients `(b, sigma, k)` together with the jump
/// measures and truncation function.
#[derive(Clone)]
pub struct CoefficientField {
    dim: usize,
    noise_dim: usize,
    controls: ControlSet,
    drift: DriftFn,
    diffusion: DiffusionFn,
    jump: JumpFn,
    kernel: JumpKernel,
    truncation: TruncationFunction,
    declared_lipschitz: Option<DeclaredLipschitz>,
    sample_box: SampleBox,
    small_jump_sqrt: Vec<DMatrix<f64>>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("controls", &self.controls)
            .field("kernel", &self.kernel)
            .field("declared_lipschitz", &self.declared_lipschitz)
            .finish_non_exhaustive()
    }
}

impl CoefficientField {
    pub fn builder(dim: usize, controls: ControlSet) -> FieldBuilder {
        let n = controls.len();
        FieldBuilder {
            dim,
            noise_dim: dim,
            controls,
            drift: Arc::new(move |_, _| vec![0.0; dim]),
            diffusion: Arc::new(move |_, _| DMatrix::zeros(dim, dim)),
            jump: Arc::new(|_, _, z| z.to_vec()),
            kernel: JumpKernel::empty(n),
            declared_lipschitz: None,
            sample_box: SampleBox::cube(dim, 5.0),
        }
    }

    /// All coefficients identically zero.
    pub fn zero(dim: usize, controls: ControlSet) -> Result<Self> {
        Self::builder(dim, controls).build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn controls(&self) -> &ControlSet {
        &self.controls
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    pub fn truncation(&self) -> TruncationFunction {
        self.truncation
    }

    pub fn declared_lipschitz(&self) -> Option<DeclaredLipschitz> {
        self.declared_lipschitz
    }

    pub fn sample_box(&self) -> &SampleBox {
        &self.sample_box
    }

    pub fn drift(&self, f: usize, x: &[f64]) -> Vec<f64> {
        (self.drift)(self.controls.point(f), x)
    }

    pub fn diffusion(&self, f: usize, x: &[f64]) -> DMatrix<f64> {
        (self.diffusion)(self.controls.point(f), x)
    }

    /// `sigma sigma^*` at `(f, x)`.
    pub fn covariance(&self, f: usize, x: &[f64]) -> DMatrix<f64> {
        let s = self.diffusion(f, x);
        &s * s.transpose()
    }

    /// Jump amplitude `k(f, x, z)` for the `atom`-th atom of control `f`.
    pub fn jump(&self, f: usize, x: &[f64], atom: usize) -> Vec<f64> {
        let mark = &self.kernel.atoms(f)[atom].mark;
        (self.jump)(self.controls.point(f), x, mark)
    }

    /// Jump amplitude at an arbitrary mark.
    pub fn jump_at_mark(&self, f: usize, x: &[f64], mark: &[f64]) -> Vec<f64> {
        (self.jump)(self.controls.point(f), x, mark)
    }

    pub fn small_jump_moment(&self, f: usize) -> &DMatrix<f64> {
        self.kernel
            .small_jump_moment_raw(f)
            .expect("moments are resolved at build time")
    }

    /// Symmetric square root of the small-jump second-moment matrix.
    pub fn small_jump_sqrt(&self, f: usize) -> &DMatrix<f64> {
        &self.small_jump_sqrt[f]
    }

    pub fn check_control(&self, f: usize) -> Result<()> {
        self.controls.check_index(f)
    }

    pub fn check_point(&self, what: &'static str, x: &[f64]) -> Result<()> {
        check_dim(what, self.dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("{what} has a non-finite entry")));
        }
        Ok(())
    }
}

pub struct FieldBuilder {
    dim: usize,
    noise_dim: usize,
    controls: ControlSet,
    drift: DriftFn,
    diffusion: DiffusionFn,
    jump: JumpFn,
    kernel: JumpKernel,
    declared_lipschitz: Option<DeclaredLipschitz>,
    sample_box: SampleBox,
}

impl FieldBuilder {
    pub fn drift(mut self, b: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(b);
        self
    }

    /// `sigma` returns a `dim x noise_dim` matrix.
    pub fn diffusion(
        mut self,
        noise_dim: usize,
        sigma: impl Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.noise_dim = noise_dim;
        self.diffusion = Arc::new(sigma);
        self
    }

    pub fn jumps(
        mut self,
        kernel: JumpKernel,
        k: impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.kernel = kernel;
        self.jump = Arc::new(k);
        self
    }

    pub fn declared_lipschitz(mut self, l: DeclaredLipschitz) -> Self {
        self.declared_lipschitz = Some(l);
        self
    }

    pub fn sample_box(mut self, b: SampleBox) -> Self {
        self.sample_box = b;
        self
    }

    pub fn build(self) -> Result<CoefficientField> {
        let FieldBuilder {
            dim,
            noise_dim,
            controls,
            drift,
            diffusion,
            jump,
            mut kernel,
            declared_lipschitz,
            sample_box,
        } = self;
        if dim == 0 {
            return Err(Error::Input("state dimension must be positive".into()));
        }
        check_dim("kernel controls", controls.len(), kernel.n_controls())?;
        check_dim("sample box", dim, sample_box.dim())?;
        sample_box.validate()?;

        let samples = sample_box.points(11);
        for f in 0..controls.len() {
            let c = controls.point(f);
            for x in &samples {
                let b = drift(c, x);
                check_dim("drift", dim, b.len())?;
                let s = diffusion(c, x);
                check_dim("diffusion rows", dim, s.nrows())?;
                check_dim("diffusion columns", noise_dim, s.ncols())?;
                if b.iter().chain(s.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::Input(format!(
                        "control {f}: non-finite drift or diffusion at {x:?}"
                    )));
                }
                for atom in kernel.atoms(f) {
                    let k = jump(c, x, &atom.mark);
                    check_dim("jump amplitude", dim, k.len())?;
                    if k.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Input(format!(
                            "control {f}: non-finite jump at {x:?}"
                        )));
                    }
                }
            }
        }

        // Bounding values at the atoms: supplied, or the smallest constant
        // compatible with the linear growth bound on the sample.
        let gammas: Vec<Vec<f64>> = (0..controls.len())
            .map(|f| {
                kernel
                    .atoms(f)
                    .iter()
                    .map(|atom| match kernel.gamma_fn() {
                        Some(g) => g(&atom.mark),
                        None => (0..controls.len())
                            .flat_map(|g| {
                                let c = controls.point(g);
                                samples
                                    .iter()
                                    .map(|x| norm(&jump(c, x, &atom.mark)) / (1.0 + norm(x)))
                                    .collect::<Vec<_>>()
                            })
                            .fold(0.0, f64::max),
                    })
                    .collect()
            })
            .collect();
        for (f, g) in gammas.iter().enumerate() {
            if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Input(format!(
                    "control {f}: bounding function must be finite and nonnegative"
                )));
            }
        }
        kernel.set_gammas(gammas);

        for f in 0..controls.len() {
            let c = controls.point(f);
            for atom in kernel.atoms(f) {
                for x in &samples {
                    let k = norm(&jump(c, x, &atom.mark));
                    let bound = atom.gamma * (1.0 + norm(x));
                    if k > bound * (1.0 + 1e-12) + 1e-300 {
                        return Err(Error::Input(format!(
                            "control {f}: |k| = {k} exceeds gamma(z)(1+|x|) = {bound} at x = {x:?}, z = {:?}",
                            atom.mark
                        )));
                    }
                }
            }
        }

        let mut moments = Vec::with_capacity(controls.len());
        let mut roots = Vec::with_capacity(controls.len());
        for f in 0..controls.len() {
            let m = kernel
                .small_jump_moment_raw(f)
                .cloned()
                .unwrap_or_else(|| DMatrix::zeros(dim, dim));
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Dimension {
                    what: "small-jump moment",
                    expected: dim,
                    got: m.nrows(),
                });
            }
            if !linalg::is_symmetric(&m, 1e-12) {
                return Err(Error::Input(format!(
                    "control {f}: small-jump moment not symmetric"
                )));
            }
            let root = linalg::psd_sqrt(&m, 1e-12).ok_or_else(|| {
                Error::Input(format!(
                    "control {f}: small-jump moment not positive semidefinite"
                ))
            })?;
            moments.push(m);
            roots.push(root);
        }
        kernel.set_small_jump_moments(moments);

        Ok(CoefficientField {
            dim,
            noise_dim,
            controls,
            drift,
            diffusion,
            jump,
            kernel,
            truncation: TruncationFunction,
            declared_lipschitz,
            sample_box,
            small_jump_sqrt: roots,
        })
    }
}
