//! Sampling-based falsifiers for the regularity conditions on the
//! coefficients. They report empirical suprema on finite samples and cannot
//! certify a condition over all of `R^d`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::symbol::{jump_drift_correction, symbol_unchecked};
use super::{CoefficientField, DeclaredLipschitz, JumpKernel, SampleBox};
use crate::error::{Error, Result};
use crate::linalg::{add, norm, sub};

/// Relative slack allowed when checking that `M(r)` does not increase.
pub const SYMBOL_DECAY_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolDecayReport {
    /// `(r, M(r))` with `M(r) = max |q(f, x, xi)|` over controls, sampled
    /// `|x| <= r` and sampled `|xi| <= 1/r`.
    pub table: Vec<(f64, f64)>,
    pub slack: f64,
    pub pass: bool,
}

/// Deterministic sample of the closed unit ball: the origin plus `shells`
/// radii along a fixed set of directions. Includes points on the sphere.
fn unit_ball_sample(dim: usize, shells: usize) -> Vec<Vec<f64>> {
    let directions: Vec<Vec<f64>> = match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let n = shells.max(4);
            (0..n)
                .map(|j| {
                    let t = std::f64::consts::TAU * j as f64 / n as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        _ => {
            let mut dirs = Vec::new();
            for a in 0..dim {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; dim];
                    e[a] = s;
                    dirs.push(e);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0xba11);
            for _ in 0..shells.max(4) {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = norm(&v);
                if n > 1e-3 {
                    dirs.push(v.iter().map(|c| c / n).collect());
                }
            }
            dirs
        }
    };
    let mut out = vec![vec![0.0; dim]];
    for j in 1..=shells {
        let rho = j as f64 / shells as f64;
        for u in &directions {
            out.push(u.iter().map(|c| rho * c).collect());
        }
    }
    out
}

/// `max |q(f, y, xi)|` over controls, sampled `|y - x| <= r` and sampled
/// `|xi| <= 1/r`.
pub fn symbol_sup_near(
    field: &CoefficientField,
    x: &[f64],
    r: f64,
    samples_per_shell: usize,
) -> Result<f64> {
    field.check_point("x", x)?;
    if !(r.is_finite() && r > 0.0) || samples_per_shell == 0 {
        return Err(Error::Input(format!("radius {r} must be positive")));
    }
    let ball = unit_ball_sample(field.dim(), samples_per_shell);
    let mut m: f64 = 0.0;
    for f in 0..field.n_controls() {
        for u in &ball {
            let y: Vec<f64> = u.iter().zip(x).map(|(c, x)| x + c * r).collect();
            for v in &ball {
                let xi: Vec<f64> = v.iter().map(|c| c / r).collect();
                m = m.max(symbol_unchecked(field, f, &y, &xi).abs());
            }
        }
    }
    Ok(m)
}

/// Tabulates `r -> M(r)`; passes when `M` is nonincreasing along the supplied
/// radii up to [`SYMBOL_DECAY_SLACK`].
pub fn check_symbol_uniform_continuity(
    field: &CoefficientField,
    r_values: &[f64],
    samples_per_shell: usize,
) -> Result<SymbolDecayReport> {
    if r_values.is_empty() || samples_per_shell == 0 {
        return Err(Error::Input(
            "symbol check needs radii and a positive sample count".into(),
        ));
    }
    if r_values.iter().any(|r| !(r.is_finite() && *r > 0.0))
        || r_values.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Input(
            "radii must be positive and strictly increasing".into(),
        ));
    }
    let ball = unit_ball_sample(field.dim(), samples_per_shell);
    let mut table = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let mut m: f64 = 0.0;
        for f in 0..field.n_controls() {
            for u in &ball {
                let x: Vec<f64> = u.iter().map(|c| c * r).collect();
                for v in &ball {
                    let xi: Vec<f64> = v.iter().map(|c| c / r).collect();
                    m = m.max(symbol_unchecked(field, f, &x, &xi).abs());
                }
            }
        }
        table.push((r, m));
    }
    let pass = table.iter().all(|(_, m)| m.is_finite())
        && table
            .windows(2)
            .all(|w| w[1].1 <= (1.0 + SYMBOL_DECAY_SLACK) * w[0].1);
    Ok(SymbolDecayReport {
        table,
        slack: SYMBOL_DECAY_SLACK,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    /// `(kappa, s(kappa))`, `s(kappa) = max_f sum_{gamma_i <= kappa} w_i gamma_i^2`.
    pub small: Vec<(f64, f64)>,
    /// `(R, m(R))`, `m(R) = max_f sum_{gamma_i > R} w_i`.
    pub large: Vec<(f64, f64)>,
    /// `max_f sum_i w_i (gamma_i^2 ∧ 1)`.
    pub integrability: f64,
    pub max_gamma: f64,
    pub pass: bool,
}

pub fn check_tightness(
    kernel: &JumpKernel,
    kappa_values: &[f64],
    r_values: &[f64],
) -> Result<TightnessReport> {
    if kappa_values.iter().any(|k| !(*k > 0.0 && *k <= 1.0)) {
        return Err(Error::Input("kappa values must lie in (0, 1]".into()));
    }
    if r_values.iter().any(|r| !(r.is_finite() && *r >= 1.0)) {
        return Err(Error::Input(
            "R values must be finite and at least 1".into(),
        ));
    }
    let fs = 0..kernel.n_controls();
    let s = |kappa: f64| {
        fs.clone()
            .map(|f| {
                kernel
                    .atoms(f)
                    .iter()
                    .filter(|a| a.gamma <= kappa)
                    .map(|a| a.rate * a.gamma * a.gamma)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    };
    let m = |r: f64| {
        fs.clone()
            .map(|f| {
                kernel
                    .atoms(f)
                    .iter()
                    .filter(|a| a.gamma > r)
                    .map(|a| a.rate)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    };
    let small: Vec<(f64, f64)> = kappa_values.iter().map(|&k| (k, s(k))).collect();
    let large: Vec<(f64, f64)> = r_values.iter().map(|&r| (r, m(r))).collect();
    let max_gamma = fs
        .clone()
        .flat_map(|f| kernel.atoms(f).iter().map(|a| a.gamma))
        .fold(0.0, f64::max);
    let integrability = fs.map(|f| kernel.integrability_mass(f)).fold(0.0, f64::max);

    let mut sorted = small.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let small_ok = sorted.windows(2).all(|w| w[0].1 <= w[1].1);
    let large_ok = large
        .iter()
        .filter(|(r, _)| *r > max_gamma)
        .all(|(_, m)| *m == 0.0);
    Ok(TightnessReport {
        small,
        large,
        integrability,
        max_gamma,
        pass: small_ok && large_ok && integrability.is_finite(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub btilde: f64,
    pub sigma: f64,
    pub k_over_gamma: f64,
    pub pairs_used: usize,
    pub declared: Option<DeclaredLipschitz>,
    pub pass: bool,
}

/// Empirical Lipschitz ratios over seeded sample pairs. Half of the pairs are
/// drawn independently in the box, half as close neighbours so that local
/// slopes are seen as well.
pub fn estimate_lipschitz_constants(
    field: &CoefficientField,
    sample_box: &SampleBox,
    n_pairs: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    if n_pairs < 2 {
        return Err(Error::Input(
            "at least two sample pairs are required".into(),
        ));
    }
    sample_box.validate()?;
    crate::error::check_dim("sample box", field.dim(), sample_box.dim())?;
    let d = field.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|a| sample_box.lo[a] + rng.random::<f64>() * (sample_box.hi[a] - sample_box.lo[a]))
            .collect()
    };

    let (mut lb, mut ls, mut lk) = (0.0f64, 0.0f64, 0.0f64);
    let mut used = 0;
    for p in 0..n_pairs {
        let x = uniform(&mut rng);
        let y = if p % 2 == 0 {
            uniform(&mut rng)
        } else {
            let step: Vec<f64> = (0..d)
                .map(|a| 1e-3 * (sample_box.hi[a] - sample_box.lo[a]) * rng.random_range(-1.0..1.0))
                .collect();
            add(&x, &step)
        };
        let dist = norm(&sub(&x, &y));
        if dist == 0.0 {
            continue;
        }
        used += 1;
        for f in 0..field.n_controls() {
            let bx = add(&field.drift(f, &x), &jump_drift_correction(field, f, &x));
            let by = add(&field.drift(f, &y), &jump_drift_correction(field, f, &y));
            lb = lb.max(norm(&sub(&bx, &by)) / dist);
            let ds = field.diffusion(f, &x) - field.diffusion(f, &y);
            ls = ls.max(ds.norm() / dist);
            for (i, atom) in field.kernel().atoms(f).iter().enumerate() {
                if atom.gamma == 0.0 {
                    continue;
                }
                let dk = sub(&field.jump(f, &x, i), &field.jump(f, &y, i));
                lk = lk.max(norm(&dk) / (atom.gamma * dist));
            }
        }
    }
    let declared = field.declared_lipschitz();
    let finite = lb.is_finite() && ls.is_finite() && lk.is_finite();
    let within = declared.is_none_or(|c| {
        let tol = 1.0 + 1e-9;
        lb <= c.btilde * tol && ls <= c.sigma * tol && lk <= c.k_over_gamma * tol
    });
    Ok(LipschitzEstimate {
        btilde: lb,
        sigma: ls,
        k_over_gamma: lk,
        pairs_used: used,
        declared,
        pass: finite && within && used > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ControlSet;
    use nalgebra::DMatrix;

    fn controls(v: &[f64]) -> ControlSet {
        ControlSet::from_scalars(v).unwrap()
    }

    #[test]
    fn symbol_decay_zero_field() {
        let field = CoefficientField::zero(1, controls(&[0.0])).unwrap();
        let rep = check_symbol_uniform_continuity(&field, &[1.0, 2.0, 4.0], 8).unwrap();
        assert!(rep.pass);
        assert!(rep.table.iter().all(|(_, m)| *m == 0.0));
    }

    #[test]
    fn symbol_decay_g_heat_closed_form() {
        // sigma sigma^* = f^2, f in [0.5, 1]: M(r) = 1/2 * 1 * (1/r)^2.
        let field = CoefficientField::builder(1, controls(&[0.5, 0.75, 1.0]))
            .diffusion(1, |c, _| DMatrix::from_element(1, 1, c[0]))
            .build()
            .unwrap();
        let rep = check_symbol_uniform_continuity(&field, &[1.0, 2.0, 4.0, 8.0], 6).unwrap();
        for (r, m) in &rep.table {
            assert!((m - 0.5 / (r * r)).abs() < 1e-14, "r={r} m={m}");
        }
        assert!(rep.pass);
    }

    #[test]
    fn symbol_decay_drift_only() {
        let field = CoefficientField::builder(1, controls(&[-1.0, 0.5, 1.0]))
            .drift(|c, _| vec![c[0]])
            .build()
            .unwrap();
        let rep = check_symbol_uniform_continuity(&field, &[1.0, 3.0, 10.0], 5).unwrap();
        for (r, m) in &rep.table {
            assert!((m - 1.0 / r).abs() < 1e-14);
        }
    }

    #[test]
    fn symbol_decay_rejects_bad_input() {
        let field = CoefficientField::zero(1, controls(&[0.0])).unwrap();
        assert!(check_symbol_uniform_continuity(&field, &[], 4).is_err());
        assert!(check_symbol_uniform_continuity(&field, &[1.0], 0).is_err());
        assert!(check_symbol_uniform_continuity(&field, &[2.0, 1.0], 4).is_err());
    }

    #[test]
    fn symbol_decay_flags_growth() {
        // |b| grows faster than linearly, so M(r) increases with r.
        let field = CoefficientField::builder(1, controls(&[1.0]))
            .drift(|_, x| vec![x[0] * x[0]])
            .sample_box(SampleBox::cube(1, 1.0))
            .build()
            .unwrap();
        let rep = check_symbol_uniform_continuity(&field, &[1.0, 2.0, 4.0], 4).unwrap();
        assert!(!rep.pass);
    }

    fn kernel(atoms: Vec<(f64, f64)>) -> JumpKernel {
        let k = JumpKernel::new(vec![atoms.into_iter().map(|(g, w)| (vec![g], w)).collect()])
            .unwrap()
            .with_gamma(|z| z[0].abs());
        CoefficientField::builder(1, controls(&[0.0]))
            .jumps(k, |_, _, z| z.to_vec())
            .build()
            .unwrap()
            .kernel()
            .clone()
    }

    #[test]
    fn tightness_examples() {
        let rep = check_tightness(&kernel(vec![(1.0, 3.0)]), &[0.5], &[1.0]).unwrap();
        assert_eq!(rep.small, vec![(0.5, 0.0)]);

        let rep = check_tightness(
            &kernel(vec![(0.1, 10.0), (2.0, 1.0)]),
            &[0.5, 0.05, 1.0],
            &[1.0, 3.0],
        )
        .unwrap();
        assert!((rep.small[0].1 - 0.1).abs() < 1e-15);
        assert_eq!(rep.small[1].1, 0.0);
        assert_eq!(rep.large, vec![(1.0, 1.0), (3.0, 0.0)]);
        assert_eq!(rep.max_gamma, 2.0);
        assert!(rep.pass);
        assert!(check_tightness(&kernel(vec![]), &[0.0], &[]).is_err());
        assert!(check_tightness(&kernel(vec![]), &[0.5], &[0.5]).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let b = SampleBox::cube(1, 3.0);
        let field = CoefficientField::builder(1, controls(&[0.0]))
            .drift(|_, _| vec![1.0])
            .diffusion(1, |_, _| DMatrix::from_element(1, 1, 0.4))
            .build()
            .unwrap();
        let est = estimate_lipschitz_constants(&field, &b, 100, 1).unwrap();
        assert_eq!((est.btilde, est.sigma, est.k_over_gamma), (0.0, 0.0, 0.0));
        assert!(est.pass);

        let field = CoefficientField::builder(1, controls(&[0.0]))
            .drift(|_, x| vec![2.0 * x[0]])
            .build()
            .unwrap();
        let est = estimate_lipschitz_constants(&field, &b, 100, 1).unwrap();
        assert!((est.btilde - 2.0).abs() < 1e-12);

        let k = JumpKernel::new(vec![vec![(vec![0.5], 1.0), (vec![-2.0], 0.5)]])
            .unwrap()
            .with_gamma(|z| z[0].abs());
        let field = CoefficientField::builder(1, controls(&[0.0]))
            .jumps(k, |_, x, z| vec![z[0].abs() * x[0]])
            .sample_box(SampleBox::cube(1, 3.0))
            .build()
            .unwrap();
        let est = estimate_lipschitz_constants(&field, &b, 100, 1).unwrap();
        assert!((est.k_over_gamma - 1.0).abs() < 1e-12);

        assert!(estimate_lipschitz_constants(&field, &b, 1, 1).is_err());
    }

    #[test]
    fn lipschitz_is_deterministic() {
        let field = CoefficientField::builder(1, controls(&[0.0, 1.0]))
            .drift(|c, x| vec![c[0] * x[0].sin()])
            .build()
            .unwrap();
        let b = SampleBox::cube(1, 2.0);
        let a = estimate_lipschitz_constants(&field, &b, 50, 9).unwrap();
        let c = estimate_lipschitz_constants(&field, &b, 50, 9).unwrap();
        assert_eq!(a, c);
        assert!(a.btilde <= 1.0 + 1e-12);
    }
}
