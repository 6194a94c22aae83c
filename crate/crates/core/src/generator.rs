//! The single-control generator, the HJB operator obtained by maximising it
//! over the controls, and the small/large jump split of its nonlocal part.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::coefficients::CoefficientField;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, is_symmetric, norm, trace_product};

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type HessianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A bounded `C^2` function with analytic first and second derivatives.
#[derive(Clone)]
pub struct TestFunction {
    dim: usize,
    value: ValueFn,
    gradient: GradientFn,
    hessian: HessianFn,
    bound: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("dim", &self.dim)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        bound: f64,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            bound,
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(
            dim,
            move |_| c,
            move |_| vec![0.0; dim],
            move |_| DMatrix::zeros(dim, dim),
            c.abs(),
        )
    }

    /// `y -> cos<xi, y - center>`.
    pub fn cos_probe(xi: Vec<f64>, center: Vec<f64>) -> Self {
        let dim = xi.len();
        let (xi1, c1) = (xi.clone(), center.clone());
        let (xi2, c2) = (xi.clone(), center.clone());
        Self::new(
            dim,
            move |y| phase(&xi1, y, &c1).cos(),
            move |y| {
                let s = -phase(&xi2, y, &c2).sin();
                xi2.iter().map(|v| s * v).collect()
            },
            move |y| {
                let c = -phase(&xi, y, &center).cos();
                DMatrix::from_fn(dim, dim, |i, j| c * xi[i] * xi[j])
            },
            1.0,
        )
    }

    /// `y -> sin<xi, y - center>`.
    pub fn sin_probe(xi: Vec<f64>, center: Vec<f64>) -> Self {
        let dim = xi.len();
        let (xi1, c1) = (xi.clone(), center.clone());
        let (xi2, c2) = (xi.clone(), center.clone());
        Self::new(
            dim,
            move |y| phase(&xi1, y, &c1).sin(),
            move |y| {
                let c = phase(&xi2, y, &c2).cos();
                xi2.iter().map(|v| c * v).collect()
            },
            move |y| {
                let s = -phase(&xi, y, &center).sin();
                DMatrix::from_fn(dim, dim, |i, j| s * xi[i] * xi[j])
            },
            1.0,
        )
    }

    /// `lambda * self`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let (v, g, h) = (
            self.value.clone(),
            self.gradient.clone(),
            self.hessian.clone(),
        );
        Self::new(
            self.dim,
            move |x| lambda * v(x),
            move |x| g(x).into_iter().map(|c| lambda * c).collect(),
            move |x| h(x) * lambda,
            lambda.abs() * self.bound,
        )
    }

    /// `self + other`.
    pub fn sum(&self, other: &TestFunction) -> Self {
        let (v1, g1, h1) = (
            self.value.clone(),
            self.gradient.clone(),
            self.hessian.clone(),
        );
        let (v2, g2, h2) = (
            other.value.clone(),
            other.gradient.clone(),
            other.hessian.clone(),
        );
        Self::new(
            self.dim,
            move |x| v1(x) + v2(x),
            move |x| {
                let mut g = g1(x);
                axpy(1.0, &g2(x), &mut g);
                g
            },
            move |x| h1(x) + h2(x),
            self.bound + other.bound,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.hessian)(x)
    }

    /// Checks the analytic derivatives at `points`: symmetric Hessian and a
    /// central-difference gradient agreeing to `1e-4` relative.
    pub fn check_derivatives(&self, points: &[Vec<f64>]) -> Result<()> {
        const STEP: f64 = 1e-5;
        for x in points {
            check_dim("test point", self.dim, x.len())?;
            let h = self.hessian(x);
            if h.nrows() != self.dim || !is_symmetric(&h, 1e-10 * (1.0 + h.abs().max())) {
                return Err(Error::Input(format!("hessian not symmetric at {x:?}")));
            }
            let g = self.gradient(x);
            for a in 0..self.dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[a] += STEP;
                xm[a] -= STEP;
                let fd = (self.value(&xp) - self.value(&xm)) / (2.0 * STEP);
                if (fd - g[a]).abs() > 1e-4 * (1.0 + g[a].abs()) {
                    return Err(Error::Input(format!(
                        "gradient component {a} at {x:?}: analytic {} vs finite difference {fd}",
                        g[a]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn phase(xi: &[f64], y: &[f64], c: &[f64]) -> f64 {
    xi.iter()
        .zip(y.iter().zip(c))
        .map(|(k, (a, b))| k * (a - b))
        .sum()
}

/// `phi(x + z) - phi(x) - <grad phi(x), h(z)>`.
pub fn compensated_increment(phi: &TestFunction, x: &[f64], z: &[f64]) -> f64 {
    let grad = phi.gradient(x);
    increment_with_gradient(phi, x, z, &grad)
}

fn increment_with_gradient(phi: &TestFunction, x: &[f64], z: &[f64], grad: &[f64]) -> f64 {
    let shifted: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
    let scale = if norm(z) <= 1.0 { 1.0 } else { 1.0 / norm(z) };
    phi.value(&shifted) - phi.value(x) - scale * dot(grad, z)
}

fn check_inputs(field: &CoefficientField, phi: &TestFunction, x: &[f64]) -> Result<()> {
    field.check_point("x", x)?;
    check_dim("test function", field.dim(), phi.dim())
}

/// The generator of the constant control `f` applied to `phi` at `x`.
pub fn eval_generator_single(
    field: &CoefficientField,
    f: usize,
    phi: &TestFunction,
    x: &[f64],
) -> Result<f64> {
    field.check_control(f)?;
    check_inputs(field, phi, x)?;
    Ok(single_unchecked(
        field,
        f,
        phi,
        x,
        &phi.gradient(x),
        &phi.hessian(x),
    ))
}

fn single_unchecked(
    field: &CoefficientField,
    f: usize,
    phi: &TestFunction,
    x: &[f64],
    grad: &[f64],
    hess: &DMatrix<f64>,
) -> f64 {
    let b = field.drift(f, x);
    let a = field.covariance(f, x);
    let mut out = dot(grad, &b)
        + 0.5 * trace_product(hess, &a)
        + 0.5 * trace_product(hess, field.small_jump_moment(f));
    for (i, atom) in field.kernel().atoms(f).iter().enumerate() {
        if atom.rate == 0.0 {
            continue;
        }
        let k = field.jump(f, x, i);
        out += atom.rate * increment_with_gradient(phi, x, &k, grad);
    }
    out
}

/// The HJB operator: the maximum of the single-control generators over the
/// field's controls, with the lowest index winning ties.
pub fn eval_generator(
    field: &CoefficientField,
    phi: &TestFunction,
    x: &[f64],
) -> Result<(f64, usize)> {
    check_inputs(field, phi, x)?;
    let (grad, hess) = (phi.gradient(x), phi.hessian(x));
    let mut best = (f64::NEG_INFINITY, 0);
    for f in 0..field.n_controls() {
        let v = single_unchecked(field, f, phi, x, &grad, &hess);
        if v > best.0 {
            best = (v, f);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Input(format!("generator is not finite at {x:?}")));
    }
    Ok(best)
}

/// The split `J = H + <grad phi, K>` of the nonlocal term of control `f`:
/// atoms with bounding value at most one keep a first-order correction in
/// `H`, larger atoms are uncompensated, and `K` carries the drift residue.
pub fn eval_nonlocal_split(
    field: &CoefficientField,
    f: usize,
    phi: &TestFunction,
    x: &[f64],
    kappa: f64,
) -> Result<(f64, Vec<f64>)> {
    field.check_control(f)?;
    check_inputs(field, phi, x)?;
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Input(format!("kappa {kappa} must lie in (0, 1)")));
    }
    let grad = phi.gradient(x);
    let base = phi.value(x);
    let (mut small, mut medium, mut large) = (0.0, 0.0, 0.0);
    for (i, atom) in field.kernel().atoms(f).iter().enumerate() {
        if atom.rate == 0.0 {
            continue;
        }
        let k = field.jump(f, x, i);
        let shifted: Vec<f64> = x.iter().zip(&k).map(|(a, b)| a + b).collect();
        let jump = phi.value(&shifted) - base;
        if atom.gamma <= kappa {
            small += atom.rate * (jump - dot(&grad, &k));
        } else if atom.gamma <= 1.0 {
            medium += atom.rate * (jump - dot(&grad, &k));
        } else {
            large += atom.rate * jump;
        }
    }
    let k_term = crate::coefficients::jump_drift_correction(field, f, x);
    Ok((small + medium + large, k_term))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{modified_drift, ControlSet, JumpKernel};
    use crate::linalg::sub;

    fn square() -> TestFunction {
        TestFunction::new(
            1,
            |x| x[0] * x[0],
            |x| vec![2.0 * x[0]],
            |_| DMatrix::from_element(1, 1, 2.0),
            f64::INFINITY,
        )
    }

    fn affine(slope: f64, offset: f64) -> TestFunction {
        TestFunction::new(
            1,
            move |x| slope * x[0] + offset,
            move |_| vec![slope],
            |_| DMatrix::zeros(1, 1),
            f64::INFINITY,
        )
    }

    fn volatility_band(sigmas: &[f64]) -> CoefficientField {
        CoefficientField::builder(1, ControlSet::from_scalars(sigmas).unwrap())
            .diffusion(1, |c, _| DMatrix::from_element(1, 1, c[0]))
            .build()
            .unwrap()
    }

    fn single_atom(mark: f64, rate: f64) -> CoefficientField {
        let kernel = JumpKernel::new(vec![vec![(vec![mark], rate)]])
            .unwrap()
            .with_gamma(|z| z[0].abs());
        CoefficientField::builder(1, ControlSet::from_scalars(&[0.0]).unwrap())
            .jumps(kernel, |_, _, z| z.to_vec())
            .build()
            .unwrap()
    }

    #[test]
    fn compensated_increment_examples() {
        let phi = affine(1.7, -0.3);
        assert!(compensated_increment(&phi, &[0.4], &[0.9]).abs() < 1e-15);
        assert_eq!(compensated_increment(&square(), &[0.0], &[1.0]), 1.0);
        assert_eq!(compensated_increment(&square(), &[0.0], &[2.0]), 4.0);
    }

    #[test]
    fn single_generator_examples() {
        let field = volatility_band(&[0.5, 1.0]);
        let c = TestFunction::constant(1, 3.0);
        assert_eq!(eval_generator_single(&field, 0, &c, &[0.2]).unwrap(), 0.0);

        let drift =
            CoefficientField::builder(1, ControlSet::from_scalars(&[-1.0, 0.0, 1.0]).unwrap())
                .drift(|c, _| vec![c[0]])
                .build()
                .unwrap();
        assert_eq!(
            eval_generator_single(&drift, 2, &affine(1.0, 0.0), &[0.0]).unwrap(),
            1.0
        );
        assert_eq!(
            eval_generator_single(&field, 1, &square(), &[0.0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn hjb_operator_examples() {
        let drift =
            CoefficientField::builder(1, ControlSet::from_scalars(&[-1.0, 0.0, 1.0]).unwrap())
                .drift(|c, _| vec![c[0]])
                .build()
                .unwrap();
        assert_eq!(
            eval_generator(&drift, &affine(1.0, 0.0), &[0.3]).unwrap(),
            (1.0, 2)
        );

        let field = volatility_band(&[0.5, 1.0]);
        assert_eq!(eval_generator(&field, &square(), &[0.0]).unwrap(), (1.0, 1));
        let concave = square().scaled(-1.0);
        let (v, f) = eval_generator(&field, &concave, &[0.0]).unwrap();
        assert_eq!(f, 0);
        assert_eq!(v, -0.25);
    }

    #[test]
    fn hjb_ties_go_to_lowest_index() {
        let field = volatility_band(&[0.5, 1.0]);
        assert_eq!(
            eval_generator(&field, &affine(2.0, 0.0), &[0.0]).unwrap(),
            (0.0, 0)
        );
    }

    #[test]
    fn split_examples() {
        let field = volatility_band(&[1.0]);
        let (h, k) = eval_nonlocal_split(&field, 0, &square(), &[0.3], 0.5).unwrap();
        assert_eq!((h, k), (0.0, vec![0.0]));

        let lambda = 0.8;
        let field = single_atom(1.0, lambda);
        let phi = affine(1.5, 0.2);
        let (h, k) = eval_nonlocal_split(&field, 0, &phi, &[0.7], 0.5).unwrap();
        let expected = lambda * (phi.value(&[1.7]) - phi.value(&[0.7]) - 1.5);
        assert!((h - expected).abs() < 1e-15);
        assert_eq!(k, vec![0.0]);
        assert!((h + 1.5 * k[0]).abs() < 1e-15);

        // Large atom: H = 2 lambda, K = -lambda h(2) = -lambda.
        let field = single_atom(2.0, lambda);
        let phi = affine(1.0, 0.0);
        let (h, k) = eval_nonlocal_split(&field, 0, &phi, &[-3.1], 0.5).unwrap();
        assert!((h - 2.0 * lambda).abs() < 1e-15);
        assert!((k[0] + lambda).abs() < 1e-15);
        let recombined = h + k[0];
        let direct = lambda * compensated_increment(&phi, &[-3.1], &[2.0]);
        assert!((recombined - direct).abs() < 1e-14);
        assert!((recombined - lambda).abs() < 1e-14);

        assert!(eval_nonlocal_split(&field, 0, &phi, &[0.0], 1.0).is_err());
    }

    #[test]
    fn split_k_is_modified_drift_residue() {
        let kernel = JumpKernel::new(vec![vec![
            (vec![0.05], 3.0),
            (vec![0.6], 1.0),
            (vec![-1.8], 0.5),
        ]])
        .unwrap()
        .with_gamma(|z| 2.0 * z[0].abs());
        let field = CoefficientField::builder(1, ControlSet::from_scalars(&[1.0]).unwrap())
            .drift(|_, x| vec![0.3 * x[0].cos()])
            .jumps(kernel, |_, x, z| vec![z[0] * (1.0 + x[0].tanh())])
            .build()
            .unwrap();
        for x in [-2.0, -0.1, 0.0, 0.9, 3.3] {
            let (_, k) = eval_nonlocal_split(&field, 0, &square(), &[x], 0.2).unwrap();
            let residue = sub(
                &modified_drift(&field, 0, &[x]).unwrap(),
                &field.drift(0, &[x]),
            );
            assert!((k[0] - residue[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn probes_have_consistent_derivatives() {
        let pts: Vec<Vec<f64>> = vec![vec![0.1, -0.4], vec![1.3, 2.2]];
        TestFunction::cos_probe(vec![1.2, -0.7], vec![0.3, 0.1])
            .check_derivatives(&pts)
            .unwrap();
        TestFunction::sin_probe(vec![1.2, -0.7], vec![0.3, 0.1])
            .check_derivatives(&pts)
            .unwrap();
        let bad = TestFunction::new(1, |x| x[0], |_| vec![2.0], |_| DMatrix::zeros(1, 1), 1.0);
        assert!(bad.check_derivatives(&[vec![0.0]]).is_err());
    }
}
