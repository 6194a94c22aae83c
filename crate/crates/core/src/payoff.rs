//! Initial data `psi` used by the solver, the Monte Carlo engine and the
//! scenario oracles. One-dimensional shapes act on the first coordinate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::generator::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    /// `|x|^2`
    Square,
    /// `-|x|^2`
    NegSquare,
    /// `tanh(x_1)`
    Tanh,
    /// `1 - exp(-x_1)`
    OneMinusExpNeg,
    /// `|x|^2 / (1 + |x|^2)`: equals `|x|^2` to second order at the origin.
    CappedSquare,
    /// `ln(1 + exp(x_1))`
    Softplus,
    /// `(1 - |x|^2 / r^2)^3` inside the ball of radius `r`, zero outside.
    Bump {
        radius: f64,
    },
    Constant {
        value: f64,
    },
}

/// Coarse shape information used to pick the extremal control in oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Convex,
    Concave,
    Increasing,
    Decreasing,
    Constant,
    Other,
}

impl Payoff {
    pub fn name(&self) -> &'static str {
        match self {
            Payoff::Square => "square",
            Payoff::NegSquare => "neg_square",
            Payoff::Tanh => "tanh",
            Payoff::OneMinusExpNeg => "one_minus_exp_neg",
            Payoff::CappedSquare => "capped_square",
            Payoff::Softplus => "softplus",
            Payoff::Bump { .. } => "bump",
            Payoff::Constant { .. } => "constant",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|v| v * v).sum();
        match *self {
            Payoff::Square => s,
            Payoff::NegSquare => -s,
            Payoff::Tanh => x[0].tanh(),
            Payoff::OneMinusExpNeg => 1.0 - (-x[0]).exp(),
            Payoff::CappedSquare => s / (1.0 + s),
            Payoff::Softplus => softplus(x[0]),
            Payoff::Bump { radius } => {
                let t = 1.0 - s / (radius * radius);
                if t > 0.0 {
                    t * t * t
                } else {
                    0.0
                }
            }
            Payoff::Constant { value } => value,
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let s: f64 = x.iter().map(|v| v * v).sum();
        let first = |g: f64| {
            let mut out = vec![0.0; d];
            out[0] = g;
            out
        };
        let radial = |c: f64| x.iter().map(|v| c * v).collect();
        match *self {
            Payoff::Square => radial(2.0),
            Payoff::NegSquare => radial(-2.0),
            Payoff::Tanh => {
                let t = x[0].tanh();
                first(1.0 - t * t)
            }
            Payoff::OneMinusExpNeg => first((-x[0]).exp()),
            Payoff::CappedSquare => radial(2.0 / ((1.0 + s) * (1.0 + s))),
            Payoff::Softplus => first(logistic(x[0])),
            Payoff::Bump { radius } => {
                let r2 = radius * radius;
                let t = 1.0 - s / r2;
                if t > 0.0 {
                    radial(-6.0 * t * t / r2)
                } else {
                    vec![0.0; d]
                }
            }
            Payoff::Constant { .. } => vec![0.0; d],
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let s: f64 = x.iter().map(|v| v * v).sum();
        // a I + c x x^T
        let radial = |a: f64, c: f64| {
            DMatrix::from_fn(d, d, |i, j| c * x[i] * x[j] + if i == j { a } else { 0.0 })
        };
        let first = |h: f64| {
            let mut m = DMatrix::zeros(d, d);
            m[(0, 0)] = h;
            m
        };
        match *self {
            Payoff::Square => radial(2.0, 0.0),
            Payoff::NegSquare => radial(-2.0, 0.0),
            Payoff::Tanh => {
                let t = x[0].tanh();
                first(-2.0 * t * (1.0 - t * t))
            }
            Payoff::OneMinusExpNeg => first(-(-x[0]).exp()),
            Payoff::CappedSquare => {
                let q = 1.0 + s;
                radial(2.0 / (q * q), -8.0 / (q * q * q))
            }
            Payoff::Softplus => {
                let p = logistic(x[0]);
                first(p * (1.0 - p))
            }
            Payoff::Bump { radius } => {
                let r2 = radius * radius;
                let t = 1.0 - s / r2;
                if t > 0.0 {
                    radial(-6.0 * t * t / r2, 24.0 * t / (r2 * r2))
                } else {
                    DMatrix::zeros(d, d)
                }
            }
            Payoff::Constant { .. } => DMatrix::zeros(d, d),
        }
    }

    /// `sup |psi|`, infinite for unbounded shapes.
    pub fn bound(&self) -> f64 {
        match *self {
            Payoff::Square | Payoff::NegSquare | Payoff::OneMinusExpNeg | Payoff::Softplus => {
                f64::INFINITY
            }
            Payoff::Tanh | Payoff::CappedSquare | Payoff::Bump { .. } => 1.0,
            Payoff::Constant { value } => value.abs(),
        }
    }

    /// Radius of a ball containing the support, when compact.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            Payoff::Bump { radius } => Some(radius),
            Payoff::Constant { value: 0.0 } => Some(0.0),
            _ => None,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Payoff::Square | Payoff::Softplus => Shape::Convex,
            Payoff::NegSquare => Shape::Concave,
            Payoff::Tanh => Shape::Increasing,
            Payoff::OneMinusExpNeg => Shape::Increasing,
            Payoff::Constant { .. } => Shape::Constant,
            Payoff::CappedSquare | Payoff::Bump { .. } => Shape::Other,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        match *self {
            Payoff::Bump { radius } if !(radius.is_finite() && radius > 0.0) => Err(
                crate::Error::Input(format!("bump radius {radius} must be positive")),
            ),
            Payoff::Constant { value } if !value.is_finite() => {
                Err(crate::Error::Input("constant payoff must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn to_test_function(self, dim: usize) -> TestFunction {
        TestFunction::new(
            dim,
            move |x| self.eval(x),
            move |x| self.gradient(x),
            move |x| self.hessian(x),
            self.bound(),
        )
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
