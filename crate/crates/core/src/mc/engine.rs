use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::MarkovPolicy;
use crate::coefficients::{compensated_drift, CoefficientField};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, pairwise_sum};

pub const MIN_PATHS: usize = 100;

const EXCURSION_LEVELS: [f64; 4] = [0.5, 0.9, 0.99, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub terminal: Vec<f64>,
    /// Largest `|X_s - x0|` over the step endpoints.
    pub sup_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// `(level, quantile of sup_deviation)`.
    pub max_excursion_quantiles: Vec<(f64, f64)>,
}

fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

fn check_horizon(policy: &MarkovPolicy, horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Input(format!("horizon {horizon} must be positive")));
    }
    if policy.horizon() < horizon * (1.0 - 1e-12) {
        return Err(Error::Input(format!(
            "policy covers [0, {}] but the horizon is {horizon}",
            policy.horizon()
        )));
    }
    Ok(())
}

/// One Euler path on the policy time grid, stopped at `horizon`. Each path
/// draws from its own ChaCha stream, so the result depends only on
/// `(seed, path_index)`.
pub fn simulate_path(
    field: &CoefficientField,
    policy: &MarkovPolicy,
    x0: &[f64],
    horizon: f64,
    seed: u64,
    path_index: u64,
) -> Result<PathOutcome> {
    field.check_point("x0", x0)?;
    policy.validate()?;
    check_horizon(policy, horizon)?;
    if policy.n_controls != field.n_controls() {
        return Err(Error::Dimension {
            what: "policy controls",
            expected: field.n_controls(),
            got: policy.n_controls,
        });
    }
    Ok(run_path(field, policy, x0, horizon, seed, path_index))
}

fn run_path(
    field: &CoefficientField,
    policy: &MarkovPolicy,
    x0: &[f64],
    horizon: f64,
    seed: u64,
    path_index: u64,
) -> PathOutcome {
    let d = field.dim();
    let m = field.noise_dim();
    let mut rng = path_rng(seed, path_index);
    let mut x = x0.to_vec();
    let mut sup: f64 = 0.0;
    let mut xi = vec![0.0; m.max(d)];
    for step in 0..policy.n_steps() {
        let t0 = policy.step_times[step];
        if t0 >= horizon {
            break;
        }
        let dt = policy.step_times[step + 1].min(horizon) - t0;
        let f = policy.choice(step, &x);
        let mut dx: Vec<f64> = compensated_drift(field, f, &x)
            .iter()
            .map(|b| b * dt)
            .collect();

        if m > 0 {
            let sigma = field.diffusion(f, &x);
            for v in xi.iter_mut().take(m) {
                *v = rng.sample(StandardNormal);
            }
            let s = dt.sqrt();
            for i in 0..d {
                for j in 0..m {
                    dx[i] += sigma[(i, j)] * s * xi[j];
                }
            }
        }

        for (a, atom) in field.kernel().atoms(f).iter().enumerate() {
            let mean = atom.rate * dt;
            if mean <= 0.0 {
                continue;
            }
            let count: f64 = rng.sample(Poisson::new(mean).expect("positive mean"));
            if count > 0.0 {
                let k = field.jump(f, &x, a);
                for i in 0..d {
                    dx[i] += count * k[i];
                }
            }
        }

        let root = field.small_jump_sqrt(f);
        if root.iter().any(|v| *v != 0.0) {
            for v in xi.iter_mut().take(d) {
                *v = rng.sample(StandardNormal);
            }
            let s = dt.sqrt();
            for i in 0..d {
                for j in 0..d {
                    dx[i] += root[(i, j)] * s * xi[j];
                }
            }
        }

        for i in 0..d {
            x[i] += dx[i];
        }
        let dev: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        sup = sup.max(norm(&dev));
    }
    PathOutcome {
        terminal: x,
        sup_deviation: sup,
    }
}

fn simulate_many(
    field: &CoefficientField,
    policy: &MarkovPolicy,
    x0: &[f64],
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<PathOutcome>> {
    simulate_path(field, policy, x0, horizon, seed, 0)?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|p| run_path(field, policy, x0, horizon, seed, p))
        .collect())
}

/// Mean and standard error with a fixed reduction order. Values are centred
/// on the first sample so that a constant sample reproduces exactly.
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let v0 = values[0];
    let shifted: Vec<f64> = values.iter().map(|v| v - v0).collect();
    let offset = pairwise_sum(&shifted) / n;
    let mean = v0 + offset;
    let sq: Vec<f64> = shifted
        .iter()
        .map(|s| (s - offset) * (s - offset))
        .collect();
    let var = if values.len() > 1 {
        pairwise_sum(&sq) / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

fn quantiles(mut values: Vec<f64>) -> Vec<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    EXCURSION_LEVELS
        .iter()
        .map(|&q| {
            let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
            (q, values[idx])
        })
        .collect()
}

/// Estimates `E[psi(X_T)]` under the law induced by `policy`.
pub fn estimate_value(
    field: &CoefficientField,
    policy: &MarkovPolicy,
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<SimulationResult> {
    if n_paths < MIN_PATHS {
        return Err(Error::Input(format!(
            "need at least {MIN_PATHS} paths, got {n_paths}"
        )));
    }
    let paths = simulate_many(field, policy, x0, horizon, n_paths, seed)?;
    let values: Vec<f64> = paths.par_iter().map(|p| psi(&p.terminal)).collect();
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("payoff returned {bad}")));
    }
    let (mean, stderr) = mean_stderr(&values);
    Ok(SimulationResult {
        mean,
        stderr,
        n_paths,
        seed,
        max_excursion_quantiles: quantiles(paths.iter().map(|p| p.sup_deviation).collect()),
    })
}

/// Runs every constant policy on the same path seeds and returns the index
/// with the largest mean (lowest index on ties) with all results.
pub fn best_constant_policy(
    field: &CoefficientField,
    psi: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<(usize, Vec<SimulationResult>)> {
    let nf = field.n_controls();
    let results = (0..nf)
        .map(|f| {
            let policy = MarkovPolicy::constant(f, nf, horizon, n_steps)?;
            estimate_value(field, &policy, psi, x0, horizon, n_paths, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (f, r) in results.iter().enumerate() {
        if r.mean > results[best].mean {
            best = f;
        }
    }
    Ok((best, results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRow {
    pub r: f64,
    pub probability: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTable {
    pub u: f64,
    pub n_paths: usize,
    pub rows: Vec<ExitRow>,
}

/// Empirical `P(sup_{s <= u} |X_s - x0| > r)` for each `r`, all from the same
/// paths so the table is nonincreasing in `r`.
pub fn exit_probability(
    field: &CoefficientField,
    policy: &MarkovPolicy,
    x0: &[f64],
    r_values: &[f64],
    u: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ExitTable> {
    if r_values.is_empty() || r_values.windows(2).any(|w| w[1] <= w[0]) || r_values[0] < 0.0 {
        return Err(Error::Input(
            "r values must be nonnegative and increasing".into(),
        ));
    }
    if n_paths == 0 {
        return Err(Error::Input("need at least one path".into()));
    }
    check_dim("x0", field.dim(), x0.len())?;
    let paths = simulate_many(field, policy, x0, u, n_paths, seed)?;
    let n = n_paths as f64;
    let rows = r_values
        .iter()
        .map(|&r| {
            let hits = paths.iter().filter(|p| p.sup_deviation > r).count() as f64;
            let p = hits / n;
            ExitRow {
                r,
                probability: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect();
    Ok(ExitTable { u, n_paths, rows })
}
