//! Quadrature used by the scenario oracles. Nothing here touches the solver
//! or the simulator.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Hermite nodes and weights for the weight `exp(-x^2)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[f(mean + std * Z)]` for standard normal `Z` by `n`-point Gauss–Hermite.
pub fn gaussian_expectation(f: impl Fn(f64) -> f64, mean: f64, std: f64, n: usize) -> f64 {
    if std == 0.0 {
        return f(mean);
    }
    static RULE_64: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let owned;
    let (x, w) = if n == 64 {
        RULE_64.get_or_init(|| gauss_hermite(64))
    } else {
        owned = gauss_hermite(n);
        &owned
    };
    let s = std * std::f64::consts::SQRT_2;
    x.iter()
        .zip(w)
        .map(|(xi, wi)| wi * f(mean + s * xi))
        .sum::<f64>()
        / PI.sqrt()
}

/// Poisson probabilities `P(N = k)` for `k = 0..` until the remaining tail
/// mass is negligible.
pub fn poisson_pmf(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    let n_max = (mean + 12.0 * mean.sqrt() + 25.0).ceil() as usize;
    // unnormalised weights relative to the mode, normalised at the end
    let mode = (mean.floor() as usize).min(n_max);
    let mut w = vec![0.0; n_max + 1];
    w[mode] = 1.0;
    for k in (mode + 1)..=n_max {
        w[k] = w[k - 1] * mean / k as f64;
    }
    for k in (0..mode).rev() {
        w[k] = w[k + 1] * (k + 1) as f64 / mean;
    }
    let total = crate::linalg::pairwise_sum(&w);
    w.iter().map(|v| v / total).collect()
}
