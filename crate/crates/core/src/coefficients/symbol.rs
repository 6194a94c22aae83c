use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CoefficientField;
use crate::error::Result;
use crate::linalg::{axpy, dot, quad_form};

/// A value of the symbol `q(f, x, xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolValue {
    pub re: f64,
    pub im: f64,
}

impl SymbolValue {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

impl From<Complex64> for SymbolValue {
    fn from(c: Complex64) -> Self {
        Self { re: c.re, im: c.im }
    }
}

impl From<SymbolValue> for Complex64 {
    fn from(s: SymbolValue) -> Self {
        Complex64::new(s.re, s.im)
    }
}

/// Evaluates the symbol of control `f` at `(x, xi)`:
///
/// ```text
/// q = -i<b, xi> + 1/2 <xi, (sigma sigma^* + M) xi>
///     + sum_i w_i (1 - exp(i<k_i, xi>) + i<xi, h(k_i)>)
/// ```
pub fn eval_symbol(
    field: &CoefficientField,
    f: usize,
    x: &[f64],
    xi: &[f64],
) -> Result<SymbolValue> {
    field.check_control(f)?;
    field.check_point("x", x)?;
    field.check_point("xi", xi)?;
    Ok(symbol_unchecked(field, f, x, xi))
}

pub(crate) fn symbol_unchecked(
    field: &CoefficientField,
    f: usize,
    x: &[f64],
    xi: &[f64],
) -> SymbolValue {
    let b = field.drift(f, x);
    let a = field.covariance(f, x);
    let mut q = Complex64::new(
        0.5 * quad_form(&a, xi) + 0.5 * quad_form(field.small_jump_moment(f), xi),
        -dot(&b, xi),
    );
    let h = field.truncation();
    for (i, atom) in field.kernel().atoms(f).iter().enumerate() {
        if atom.rate == 0.0 {
            continue;
        }
        let k = field.jump(f, x, i);
        let phase = dot(&k, xi);
        let hk = dot(xi, &k) * h.scale(&k);
        q += atom.rate * Complex64::new(1.0 - phase.cos(), -phase.sin() + hk);
    }
    q.into()
}

/// The modified drift
///
/// ```text
/// b~(f, x) = b(f, x) + sum_{gamma_i <= 1} w_i (k_i - h(k_i)) - sum_{gamma_i > 1} w_i h(k_i)
/// ```
pub fn modified_drift(field: &CoefficientField, f: usize, x: &[f64]) -> Result<Vec<f64>> {
    field.check_control(f)?;
    field.check_point("x", x)?;
    let mut out = field.drift(f, x);
    axpy(1.0, &jump_drift_correction(field, f, x), &mut out);
    Ok(out)
}

/// `b~ - b`: the first-order jump contribution moved into the drift.
pub(crate) fn jump_drift_correction(field: &CoefficientField, f: usize, x: &[f64]) -> Vec<f64> {
    let h = field.truncation();
    let mut out = vec![0.0; field.dim()];
    for (i, atom) in field.kernel().atoms(f).iter().enumerate() {
        if atom.rate == 0.0 {
            continue;
        }
        let k = field.jump(f, x, i);
        let s = h.scale(&k);
        if atom.gamma <= 1.0 {
            axpy(atom.rate * (1.0 - s), &k, &mut out);
        } else {
            axpy(-atom.rate * s, &k, &mut out);
        }
    }
    out
}

/// `b(f, x) - sum_i w_i h(k_i)`: the drift left after pulling the whole
/// truncated compensator out of the jump integral. With this drift the
/// nonlocal part of the generator is the plain difference `u(x + k) - u(x)`.
pub fn compensated_drift(field: &CoefficientField, f: usize, x: &[f64]) -> Vec<f64> {
    let h = field.truncation();
    let mut out = field.drift(f, x);
    for (i, atom) in field.kernel().atoms(f).iter().enumerate() {
        if atom.rate == 0.0 {
            continue;
        }
        let k = field.jump(f, x, i);
        axpy(-atom.rate * h.scale(&k), &k, &mut out);
    }
    out
}

/// One admissible characteristic triplet at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub drift: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Push-forward of the jump measure under `k(f, x, .)`, origin removed.
    pub jumps: Vec<(Vec<f64>, f64)>,
}

/// The triplets `(b(f,x), sigma sigma^*(f,x), nu(f,.) o k(f,x,.)^{-1})`, one per
/// control in control order.
pub fn theta_triplets(field: &CoefficientField, x: &[f64]) -> Result<Vec<Triplet>> {
    field.check_point("x", x)?;
    Ok((0..field.n_controls())
        .map(|f| Triplet {
            drift: field.drift(f, x),
            covariance: field.covariance(f, x),
            jumps: field
                .kernel()
                .atoms(f)
                .iter()
                .enumerate()
                .filter_map(|(i, atom)| {
                    let k = field.jump(f, x, i);
                    (k.iter().any(|v| *v != 0.0)).then_some((k, atom.rate))
                })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{ControlSet, JumpKernel};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn single(controls: &[f64]) -> ControlSet {
        ControlSet::from_scalars(controls).unwrap()
    }

    fn pure_jump(mark: f64, rate: f64, drift: f64) -> CoefficientField {
        let kernel = JumpKernel::new(vec![vec![(vec![mark], rate)]])
            .unwrap()
            .with_gamma(|z| z[0].abs());
        CoefficientField::builder(1, single(&[0.0]))
            .drift(move |_, _| vec![drift])
            .jumps(kernel, |_, _, z| z.to_vec())
            .build()
            .unwrap()
    }

    #[test]
    fn symbol_zero_coefficients() {
        let field = CoefficientField::zero(2, single(&[0.0])).unwrap();
        let q = eval_symbol(&field, 0, &[0.3, 1.0], &[2.0, -1.0]).unwrap();
        assert_eq!((q.re, q.im), (0.0, 0.0));
    }

    #[test]
    fn symbol_pure_diffusion() {
        let field = CoefficientField::builder(1, single(&[0.0]))
            .diffusion(1, |_, _| DMatrix::from_element(1, 1, 2.0))
            .build()
            .unwrap();
        let q = eval_symbol(&field, 0, &[0.0], &[1.0]).unwrap();
        assert_eq!((q.re, q.im), (2.0, 0.0));
    }

    #[test]
    fn symbol_unit_jump_at_pi() {
        let field = pure_jump(1.0, 1.0, 0.0);
        let q = eval_symbol(&field, 0, &[0.0], &[PI]).unwrap();
        assert!((q.re - 2.0).abs() < 1e-15);
        assert!((q.im - PI).abs() < 1e-15);
    }

    #[test]
    fn symbol_dimension_mismatch() {
        let field = CoefficientField::zero(2, single(&[0.0])).unwrap();
        assert!(eval_symbol(&field, 0, &[0.0], &[1.0, 1.0]).is_err());
        assert!(eval_symbol(&field, 1, &[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn modified_drift_examples() {
        let field = CoefficientField::builder(1, single(&[0.0]))
            .drift(|_, x| vec![0.5 + x[0]])
            .build()
            .unwrap();
        assert_eq!(modified_drift(&field, 0, &[1.0]).unwrap(), vec![1.5]);

        let lambda = 0.7;
        let field = pure_jump(2.0, lambda, 0.25);
        let bt = modified_drift(&field, 0, &[0.0]).unwrap();
        assert!((bt[0] - (0.25 - lambda)).abs() < 1e-15);

        let kernel = JumpKernel::new(vec![vec![(vec![2.0], 0.4), (vec![-2.0], 0.4)]])
            .unwrap()
            .with_gamma(|z| z[0].abs());
        let field = CoefficientField::builder(1, single(&[0.0]))
            .drift(|_, _| vec![0.1])
            .jumps(kernel, |_, _, z| z.to_vec())
            .build()
            .unwrap();
        assert_eq!(modified_drift(&field, 0, &[3.0]).unwrap(), vec![0.1]);
    }

    #[test]
    fn compensated_drift_cancels_unit_jump_drift() {
        let field = pure_jump(1.0, 1.5, 1.5);
        assert_eq!(compensated_drift(&field, 0, &[0.0]), vec![0.0]);
        // gamma = 1 places the atom in the small-jump branch, where k - h(k) = 0.
        assert_eq!(modified_drift(&field, 0, &[0.0]).unwrap(), vec![1.5]);
    }

    #[test]
    fn theta_examples() {
        let field = CoefficientField::zero(1, single(&[0.0])).unwrap();
        let t = theta_triplets(&field, &[0.0]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].drift, vec![0.0]);
        assert!(t[0].jumps.is_empty());

        let kernel = JumpKernel::new(vec![vec![(vec![1.0], 1.0)], vec![(vec![1.0], 2.0)]])
            .unwrap()
            .with_gamma(|_| 1.0);
        let field = CoefficientField::builder(1, single(&[0.0, 1.0]))
            .drift(|c, _| vec![c[0]])
            .jumps(kernel, |c, _, z| vec![c[0] * z[0]])
            .build()
            .unwrap();
        let t = theta_triplets(&field, &[0.0]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].drift, vec![0.0]);
        assert_eq!(t[1].drift, vec![1.0]);
        // control 0 maps its atom to the origin
        assert!(t[0].jumps.is_empty());
        assert_eq!(t[1].jumps, vec![(vec![1.0], 2.0)]);
    }

    fn mixed_field() -> CoefficientField {
        let kernel = JumpKernel::new(vec![
            vec![(vec![0.6], 0.8), (vec![-0.4], 1.0)],
            vec![(vec![0.6], 0.3), (vec![-1.5], 0.2)],
        ])
        .unwrap();
        CoefficientField::builder(1, single(&[0.5, 1.0]))
            .drift(|c, x| vec![c[0] - 0.2 * x[0].tanh()])
            .diffusion(1, |c, x| {
                DMatrix::from_element(1, 1, 0.3 * c[0] + 0.1 * x[0].sin())
            })
            .jumps(kernel, |c, x, z| vec![c[0] * z[0] * (1.0 + x[0].tanh())])
            .build()
            .unwrap()
    }

    #[test]
    fn no_jump_identities_exact() {
        let field = CoefficientField::builder(2, single(&[1.0]))
            .drift(|_, x| vec![x[0], -0.5])
            .diffusion(2, |_, x| {
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, x[1], 0.5])
            })
            .build()
            .unwrap();
        let (x, xi) = ([0.3, -0.7], [1.1, 2.0]);
        let q = eval_symbol(&field, 0, &x, &xi).unwrap();
        let a = field.covariance(0, &x);
        assert_eq!(q.re, 0.5 * quad_form(&a, &xi));
        assert_eq!(q.im, -dot(&field.drift(0, &x), &xi));
    }

    proptest! {
        #[test]
        fn symbol_vanishes_at_zero_and_is_conjugate_symmetric(
            f in 0usize..2, x in -4.0f64..4.0, xi in -6.0f64..6.0,
        ) {
            let field = mixed_field();
            let q0 = eval_symbol(&field, f, &[x], &[0.0]).unwrap();
            prop_assert_eq!((q0.re, q0.im), (0.0, 0.0));
            let q = eval_symbol(&field, f, &[x], &[xi]).unwrap();
            let qm = eval_symbol(&field, f, &[x], &[-xi]).unwrap();
            prop_assert!((q.re - qm.re).abs() <= 1e-12);
            prop_assert!((q.im + qm.im).abs() <= 1e-12);
        }

        #[test]
        fn modified_drift_is_drift_for_small_jumps(x in -3.0f64..3.0, m in -0.9f64..0.9) {
            let kernel = JumpKernel::new(vec![vec![(vec![m], 2.0), (vec![m / 2.0], 1.0)]])
                .unwrap()
                .with_gamma(|z| z[0].abs());
            let field = CoefficientField::builder(1, single(&[0.0]))
                .drift(|_, x| vec![x[0].cos()])
                .jumps(kernel, |_, _, z| z.to_vec())
                .build()
                .unwrap();
            prop_assert_eq!(modified_drift(&field, 0, &[x]).unwrap(), field.drift(0, &[x]));
        }
    }
}
