use std::sync::Arc;

use nalgebra::DMatrix;

use super::quadrature::{gaussian_expectation, poisson_pmf};
use super::{Oracle, ParamSpec, Params, Scenario, ScenarioInfo};
use crate::coefficients::{CoefficientField, ControlSet, DeclaredLipschitz, JumpKernel, SampleBox};
use crate::error::{Error, Result};
use crate::payoff::{Payoff, Shape};
use crate::pide::{SchemeConfig, SpatialGrid};

pub const SCENARIO_NAMES: [&str; 5] = [
    "linear_levy",
    "g_brownian",
    "drift_band",
    "poisson_band",
    "mixed_jump_diffusion",
];

const GH_NODES: usize = 64;

const fn spec(
    name: &'static str,
    default: f64,
    min: f64,
    max: f64,
    doc: &'static str,
) -> ParamSpec {
    ParamSpec {
        name,
        default,
        min,
        max,
        integer: false,
        doc,
    }
}

const fn int_spec(
    name: &'static str,
    default: f64,
    min: f64,
    max: f64,
    doc: &'static str,
) -> ParamSpec {
    ParamSpec {
        name,
        default,
        min,
        max,
        integer: true,
        doc,
    }
}

pub fn list_scenarios() -> Vec<ScenarioInfo> {
    vec![
        ScenarioInfo {
            name: "linear_levy",
            summary: "single control: Brownian motion with drift plus two compound Poisson jump sizes",
            params: vec![
                spec("mu", 0.1, -5.0, 5.0, "drift b"),
                spec("sigma", 0.4, 0.0, 5.0, "volatility"),
                spec("jump1_size", 0.5, -3.0, 3.0, "first jump size"),
                spec("jump1_rate", 0.8, 0.0, 20.0, "first jump intensity"),
                spec("jump2_size", -0.7, -3.0, 3.0, "second jump size"),
                spec("jump2_rate", 0.4, 0.0, 20.0, "second jump intensity"),
            ],
            compliance: "constant coefficients; gamma(z) = |z|; finitely many atoms so both tightness limits hold trivially; the modified drift is constant",
        },
        ScenarioInfo {
            name: "g_brownian",
            summary: "volatility uncertainty sigma in {sigma_lo, sigma_hi}, no drift, no jumps",
            params: vec![
                spec("sigma_lo", 0.5, 0.0, 5.0, "lower volatility"),
                spec("sigma_hi", 1.0, 0.0, 5.0, "upper volatility"),
                int_spec("dim", 1.0, 1.0, 2.0, "state dimension"),
                spec("rho", 0.0, -0.99, 0.99, "correlation of the two noise components (dim = 2)"),
            ],
            compliance: "bounded constant diffusion, no jumps; symbol bounded by sigma_hi^2 |xi|^2 / 2 so it decays like 1/r^2",
        },
        ScenarioInfo {
            name: "drift_band",
            summary: "drift uncertainty b in an evenly spaced band [b_lo, b_hi], constant volatility",
            params: vec![
                spec("b_lo", -1.0, -5.0, 5.0, "lowest drift"),
                spec("b_hi", 1.0, -5.0, 5.0, "highest drift"),
                int_spec("levels", 3.0, 1.0, 9.0, "number of drift levels"),
                spec("sigma", 0.5, 0.0, 5.0, "volatility"),
            ],
            compliance: "bounded constant drift and volatility, no jumps; symbol decays like 1/r",
        },
        ScenarioInfo {
            name: "poisson_band",
            summary: "jump intensity uncertainty lambda in {lambda_lo, lambda_hi} with a fixed jump size and compensator-cancelling drift",
            params: vec![
                spec("lambda_lo", 0.5, 0.0, 50.0, "lower intensity"),
                spec("lambda_hi", 1.5, 0.0, 50.0, "upper intensity"),
                spec("jump", 1.0, 0.05, 5.0, "jump size"),
            ],
            compliance: "one atom per control with gamma = |jump|; bounded intensities; drift lambda h(jump) is constant",
        },
        ScenarioInfo {
            name: "mixed_jump_diffusion",
            summary: "two controls trading volatility against state-dependent jumps k(f, x, z) = s_f z (1 + tanh x)",
            params: vec![
                spec("sigma_a", 0.2, 0.0, 5.0, "volatility of control a"),
                spec("scale_a", 1.0, 0.0, 3.0, "jump scale of control a"),
                spec("sigma_b", 0.4, 0.0, 5.0, "volatility of control b"),
                spec("scale_b", 0.5, 0.0, 3.0, "jump scale of control b"),
                spec("drift_strength", 0.2, 0.0, 5.0, "mean reversion b(x) = -c tanh(x)"),
                spec("rate_up", 0.8, 0.0, 20.0, "intensity of the mark z = 0.6"),
                spec("rate_down", 1.0, 0.0, 20.0, "intensity of the mark z = -0.4"),
                spec("small_jump_var", 0.0, 0.0, 1.0, "second moment of the discarded small jumps (no oracle when nonzero)"),
            ],
            compliance: "k is Lipschitz in x with constant s_f |z| <= gamma(z) = 2 max(s) |z| and |k| <= gamma(z); bounded drift and volatility; finitely many atoms",
        },
    ]
}

fn resolve(info: &ScenarioInfo, params: &Params) -> Result<Params> {
    for key in params.keys() {
        if !info.params.iter().any(|p| p.name == key) {
            return Err(Error::Input(format!(
                "unknown parameter '{key}' for scenario {}",
                info.name
            )));
        }
    }
    let mut out = Params::new();
    for p in &info.params {
        let v = params.get(p.name).copied().unwrap_or(p.default);
        if !(v.is_finite() && v >= p.min && v <= p.max) {
            return Err(Error::Input(format!(
                "{}.{} = {v} outside [{}, {}]",
                info.name, p.name, p.min, p.max
            )));
        }
        if p.integer && v.fract() != 0.0 {
            return Err(Error::Input(format!(
                "{}.{} must be an integer",
                info.name, p.name
            )));
        }
        out.insert(p.name.to_string(), v);
    }
    Ok(out)
}

/// Builds a bundled scenario, filling unspecified parameters with defaults.
pub fn get_scenario(name: &str, params: &Params) -> Result<Scenario> {
    let info = list_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            Error::Input(format!(
                "unknown scenario '{name}'; expected one of {}",
                SCENARIO_NAMES.join(", ")
            ))
        })?;
    let p = resolve(&info, params)?;
    let notes = info.compliance.to_string();
    let mut sc = match name {
        "linear_levy" => linear_levy(&p)?,
        "g_brownian" => g_brownian(&p)?,
        "drift_band" => drift_band(&p)?,
        "poisson_band" => poisson_band(&p)?,
        "mixed_jump_diffusion" => mixed(&p)?,
        _ => unreachable!("names come from the registry"),
    };
    sc.notes = notes;
    sc.params = p;
    Ok(sc)
}

fn ordered_pair(name: &str, lo_key: &str, hi_key: &str, p: &Params) -> Result<(f64, f64)> {
    let (lo, hi) = (p[lo_key], p[hi_key]);
    if lo > hi {
        return Err(Error::Input(format!(
            "{name}: {lo_key} = {lo} exceeds {hi_key} = {hi}"
        )));
    }
    Ok((lo, hi))
}

fn band(lo: f64, hi: f64, levels: usize) -> Vec<f64> {
    if lo == hi || levels == 1 {
        return vec![hi];
    }
    (0..levels)
        .map(|i| {
            if i + 1 == levels {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (levels - 1) as f64
            }
        })
        .collect()
}

fn truncate_scalar(z: f64) -> f64 {
    z.clamp(-1.0, 1.0)
}

fn base(
    name: &str,
    field: CoefficientField,
    grid: SpatialGrid,
    horizon: f64,
    payoff: Payoff,
    oracle: Oracle,
) -> Scenario {
    let dim = field.dim();
    Scenario {
        name: name.to_string(),
        params: Params::new(),
        field,
        grid,
        horizon,
        payoff,
        x0: vec![0.0; dim],
        scheme: SchemeConfig::default(),
        oracle: Some(oracle),
        notes: String::new(),
    }
}

fn linear_levy(p: &Params) -> Result<Scenario> {
    let (mu, sigma) = (p["mu"], p["sigma"]);
    let jumps = [
        (p["jump1_size"], p["jump1_rate"]),
        (p["jump2_size"], p["jump2_rate"]),
    ];
    let atoms: Vec<(Vec<f64>, f64)> = jumps.iter().map(|(z, w)| (vec![*z], *w)).collect();
    let kernel = JumpKernel::new(vec![atoms])?.with_gamma(|z| z[0].abs());
    let field = CoefficientField::builder(1, ControlSet::new(vec![vec![0.0]], vec!["f0".into()])?)
        .drift(move |_, _| vec![mu])
        .diffusion(1, move |_, _| DMatrix::from_element(1, 1, sigma))
        .jumps(kernel, |_, _, z| z.to_vec())
        .declared_lipschitz(DeclaredLipschitz {
            btilde: 0.0,
            sigma: 0.0,
            k_over_gamma: 0.0,
        })
        .build()?;

    // X_T = x + (mu - sum w h(z)) T + sigma W_T + sum_j z_j N_j
    let oracle: Oracle = Arc::new(move |psi, x, t| {
        if x.len() != 1 {
            return None;
        }
        let centre = x[0]
            + (mu
                - jumps
                    .iter()
                    .map(|(z, w)| w * truncate_scalar(*z))
                    .sum::<f64>())
                * t;
        let std = sigma * t.sqrt();
        let p1 = poisson_pmf(jumps[0].1 * t);
        let p2 = poisson_pmf(jumps[1].1 * t);
        let mut total = 0.0;
        for (n1, q1) in p1.iter().enumerate() {
            for (n2, q2) in p2.iter().enumerate() {
                let shift = n1 as f64 * jumps[0].0 + n2 as f64 * jumps[1].0;
                total += q1
                    * q2
                    * gaussian_expectation(|y| psi.eval(&[y]), centre + shift, std, GH_NODES);
            }
        }
        Some(total)
    });
    let mut sc = base(
        "linear_levy",
        field,
        SpatialGrid::uniform_1d(-5.0, 5.0, 201)?,
        0.5,
        Payoff::Tanh,
        oracle,
    );
    sc.x0 = vec![0.0];
    Ok(sc)
}

fn g_brownian(p: &Params) -> Result<Scenario> {
    let (lo, hi) = ordered_pair("g_brownian", "sigma_lo", "sigma_hi", p)?;
    let dim = p["dim"] as usize;
    let rho = p["rho"];
    let controls = ControlSet::from_scalars(&band(lo, hi, 2))?;
    let chol = if dim == 1 {
        DMatrix::from_element(1, 1, 1.0)
    } else {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, rho, (1.0 - rho * rho).sqrt()])
    };
    let field = CoefficientField::builder(dim, controls)
        .diffusion(dim, move |c, _| &chol * c[0])
        .sample_box(SampleBox::cube(dim, 5.0))
        .declared_lipschitz(DeclaredLipschitz {
            btilde: 0.0,
            sigma: 0.0,
            k_over_gamma: 0.0,
        })
        .build()?;

    // Convex data is maximised by the top volatility, concave data by the
    // bottom one.
    let oracle: Oracle = Arc::new(move |psi, x, t| {
        let s = match psi.shape() {
            Shape::Convex => hi,
            Shape::Concave => lo,
            Shape::Constant => return Some(psi.eval(x)),
            _ => return None,
        };
        let d = x.len() as f64;
        match psi {
            Payoff::Square => Some(x.iter().map(|v| v * v).sum::<f64>() + d * s * s * t),
            Payoff::NegSquare => Some(-x.iter().map(|v| v * v).sum::<f64>() - d * s * s * t),
            _ => {
                let rest = x[1..].to_vec();
                Some(gaussian_expectation(
                    |y| {
                        let mut z = vec![y];
                        z.extend_from_slice(&rest);
                        psi.eval(&z)
                    },
                    x[0],
                    s * t.sqrt(),
                    GH_NODES,
                ))
            }
        }
    });
    let grid = if dim == 1 {
        SpatialGrid::uniform_1d(-4.0, 4.0, 201)?
    } else {
        SpatialGrid::new(vec![-4.0; 2], vec![4.0; 2], vec![81, 81])?
    };
    Ok(base(
        "g_brownian",
        field,
        grid,
        0.25,
        Payoff::Square,
        oracle,
    ))
}

fn drift_band(p: &Params) -> Result<Scenario> {
    let (lo, hi) = ordered_pair("drift_band", "b_lo", "b_hi", p)?;
    let sigma = p["sigma"];
    let controls = ControlSet::from_scalars(&band(lo, hi, p["levels"] as usize))?;
    let field = CoefficientField::builder(1, controls)
        .drift(|c, _| vec![c[0]])
        .diffusion(1, move |_, _| DMatrix::from_element(1, 1, sigma))
        .declared_lipschitz(DeclaredLipschitz {
            btilde: 0.0,
            sigma: 0.0,
            k_over_gamma: 0.0,
        })
        .build()?;
    let oracle: Oracle = Arc::new(move |psi, x, t| {
        let b = match psi.shape() {
            Shape::Increasing => hi,
            Shape::Decreasing => lo,
            Shape::Constant => return Some(psi.eval(x)),
            _ => return None,
        };
        Some(gaussian_expectation(
            |y| psi.eval(&[y]),
            x[0] + b * t,
            sigma * t.sqrt(),
            GH_NODES,
        ))
    });
    Ok(base(
        "drift_band",
        field,
        SpatialGrid::uniform_1d(-4.0, 4.0, 201)?,
        0.5,
        Payoff::Tanh,
        oracle,
    ))
}

fn poisson_band(p: &Params) -> Result<Scenario> {
    let (lo, hi) = ordered_pair("poisson_band", "lambda_lo", "lambda_hi", p)?;
    let jump = p["jump"];
    let rates = band(lo, hi, 2);
    let controls = ControlSet::from_scalars(&rates)?;
    let kernel = JumpKernel::new(rates.iter().map(|w| vec![(vec![jump], *w)]).collect())?
        .with_gamma(|z| z[0].abs());
    let h_jump = truncate_scalar(jump);
    let field = CoefficientField::builder(1, controls)
        .drift(move |c, _| vec![c[0] * h_jump])
        .jumps(kernel, |_, _, z| z.to_vec())
        .declared_lipschitz(DeclaredLipschitz {
            btilde: 0.0,
            sigma: 0.0,
            k_over_gamma: 0.0,
        })
        .build()?;
    // X_T = x + jump * N_T with N_T ~ Poisson(lambda T)
    let oracle: Oracle = Arc::new(move |psi, x, t| {
        let upward = jump > 0.0;
        let lambda = match (psi.shape(), upward) {
            (Shape::Increasing, true) | (Shape::Decreasing, false) => hi,
            (Shape::Increasing, false) | (Shape::Decreasing, true) => lo,
            (Shape::Constant, _) => return Some(psi.eval(x)),
            _ => return None,
        };
        Some(
            poisson_pmf(lambda * t)
                .iter()
                .enumerate()
                .map(|(n, q)| q * psi.eval(&[x[0] + n as f64 * jump]))
                .sum(),
        )
    });
    let mut sc = base(
        "poisson_band",
        field,
        SpatialGrid::uniform_1d(-4.0, 8.0, 121)?,
        1.0,
        Payoff::OneMinusExpNeg,
        oracle,
    );
    sc.scheme.max_dt = Some(0.01);
    Ok(sc)
}

fn mixed(p: &Params) -> Result<Scenario> {
    let a = vec![p["sigma_a"], p["scale_a"]];
    let b = vec![p["sigma_b"], p["scale_b"]];
    let controls = ControlSet::new(vec![a, b], vec!["a".into(), "b".into()])?;
    let c = p["drift_strength"];
    let marks = [(0.6, p["rate_up"]), (-0.4, p["rate_down"])];
    let max_scale = p["scale_a"].max(p["scale_b"]);
    let atoms: Vec<(Vec<f64>, f64)> = marks.iter().map(|(z, w)| (vec![*z], *w)).collect();
    let mut kernel = JumpKernel::new(vec![atoms.clone(), atoms])?
        .with_gamma(move |z| 2.0 * max_scale * z[0].abs());
    let var = p["small_jump_var"];
    if var > 0.0 {
        for f in 0..2 {
            kernel = kernel.with_small_jump_moment(f, DMatrix::from_element(1, 1, var))?;
        }
    }
    // k - h(k) and h(k) are 3- and 1-Lipschitz in k; k is max_scale |z|-Lipschitz in x.
    let btilde_bound = c + marks
        .iter()
        .map(|(z, w)| 3.0 * w * max_scale * z.abs())
        .sum::<f64>();
    let field = CoefficientField::builder(1, controls)
        .drift(move |_, x| vec![-c * x[0].tanh()])
        .diffusion(1, |f, _| DMatrix::from_element(1, 1, f[0]))
        .jumps(kernel, |f, x, z| vec![f[1] * z[0] * (1.0 + x[0].tanh())])
        .declared_lipschitz(DeclaredLipschitz {
            btilde: btilde_bound,
            sigma: 0.0,
            k_over_gamma: 1.0,
        })
        .build()?;
    let mut sc = base(
        "mixed_jump_diffusion",
        field,
        SpatialGrid::uniform_1d(-4.0, 4.0, 161)?,
        0.5,
        Payoff::Tanh,
        Arc::new(|psi, x, _| (psi.shape() == Shape::Constant).then(|| psi.eval(x))),
    );
    sc.x0 = vec![0.0];
    Ok(sc)
}
