use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sublab_core::coefficients::{
    check_symbol_uniform_continuity, check_tightness, estimate_lipschitz_constants,
    LipschitzEstimate, SymbolDecayReport, TightnessReport,
};
use sublab_core::mc::{
    best_constant_policy, estimate_value, extract_policy_from_pde, MarkovPolicy, SimulationResult,
};
use sublab_core::pide::{solve, SpatialGrid, ValueField};
use sublab_core::scenarios::{list_scenarios, Params, ScenarioInfo};
use sublab_core::verification::{verify_selected, Bound, VerificationReport};
use sublab_core::Payoff;

use crate::config::{PolicyConfig, Resolved};
use crate::error::CliError;

pub struct Outcome {
    pub pass: bool,
    pub message: String,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn scenarios() -> Result<Vec<ScenarioInfo>, CliError> {
    Ok(list_scenarios())
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    scenario: &'a str,
    params: &'a Params,
    symbol_decay: SymbolDecayReport,
    tightness: TightnessReport,
    lipschitz: LipschitzEstimate,
    pass: bool,
}

pub fn check(run: &Resolved) -> Result<Outcome, CliError> {
    let sc = &run.scenario;
    let c = &run.config.checks;
    let symbol = check_symbol_uniform_continuity(&sc.field, &c.symbol_radii, c.symbol_samples)
        .map_err(CliError::config)?;
    let tightness = check_tightness(sc.field.kernel(), &c.tightness_kappas, &c.tightness_radii)
        .map_err(CliError::config)?;
    let lipschitz = estimate_lipschitz_constants(
        &sc.field,
        sc.field.sample_box(),
        c.lipschitz_pairs,
        c.lipschitz_seed,
    )
    .map_err(CliError::config)?;
    let pass = symbol.pass && tightness.pass && lipschitz.pass;
    prepare(&run.output_dir)?;
    write_json(
        &run.output_dir,
        "check.json",
        &CheckOutput {
            scenario: &sc.name,
            params: &sc.params,
            symbol_decay: symbol.clone(),
            tightness: tightness.clone(),
            lipschitz: lipschitz.clone(),
            pass,
        },
    )?;
    Ok(Outcome {
        pass,
        message: format!(
            "check {}: symbol {} tightness {} lipschitz {}",
            sc.name,
            verdict(symbol.pass),
            verdict(tightness.pass),
            verdict(lipschitz.pass)
        ),
    })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct PointValue {
    t: f64,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<f64>,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    scenario: &'a str,
    params: &'a Params,
    payoff: Payoff,
    x0: &'a [f64],
    output_times: &'a [f64],
    values_at_x0: Vec<PointValue>,
    grid: SpatialGrid,
    dt: f64,
    steps: usize,
    clamped_jump_targets: usize,
    max_principle_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

pub fn solve_cmd(run: &Resolved) -> Result<Outcome, CliError> {
    let sc = &run.scenario;
    let data = ValueField::from_payoff(&sc.grid, &sc.payoff)?;
    let sol = solve(&data, &sc.field, &run.output_times, &sc.scheme)?;
    prepare(&run.output_dir)?;

    let d = sc.grid.dim();
    let mut w = csv::Writer::from_path(run.output_dir.join("values.csv"))?;
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|a| format!("x{a}")));
    header.push("value".into());
    w.write_record(&header)?;
    for u in &sol.trajectory {
        for (x, v) in u.rows() {
            let mut rec = vec![u.t.to_string()];
            rec.extend(x.iter().map(f64::to_string));
            rec.push(v.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;

    let values_at_x0: Vec<PointValue> = sol
        .trajectory
        .iter()
        .map(|u| PointValue {
            t: u.t,
            value: u.interpolate(&sc.x0),
            oracle: sc.oracle_value(&sc.payoff, &sc.x0, u.t),
        })
        .collect();
    let last = values_at_x0.last().map(|p| p.value).unwrap_or(f64::NAN);
    let summary = &sol.summary;
    let out = SolveOutput {
        scenario: &sc.name,
        params: &sc.params,
        payoff: sc.payoff,
        x0: &sc.x0,
        output_times: &run.output_times,
        values_at_x0,
        grid: summary.grid.clone(),
        dt: summary.dt,
        steps: summary.steps,
        clamped_jump_targets: summary.clamped_jump_targets,
        max_principle_violations: summary.max_principle_violations,
        wall_time_s: run.config.record_timing.then_some(summary.wall_time_s),
    };
    write_json(&run.output_dir, "solve_summary.json", &out)?;
    Ok(Outcome {
        pass: true,
        message: format!(
            "solve {}: u({}, {:?}) = {last:.6} ({} steps)",
            sc.name, sc.horizon, sc.x0, sol.summary.steps
        ),
    })
}

#[derive(Serialize)]
struct LabelledResult {
    policy: String,
    result: SimulationResult,
}

#[derive(Serialize)]
struct McOutput<'a> {
    scenario: &'a str,
    params: &'a Params,
    payoff: Payoff,
    x0: &'a [f64],
    horizon: f64,
    seed: u64,
    n_paths: usize,
    policy: PolicyConfig,
    /// How the simulated policy was obtained.
    provenance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_control: Option<usize>,
    results: Vec<LabelledResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

pub fn mc_cmd(run: &Resolved) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let sc = &run.scenario;
    let psi = sc.payoff;
    let payoff = move |x: &[f64]| psi.eval(x);
    let (n, seed) = (run.mc.n_paths, run.mc.seed);
    let nf = sc.field.n_controls();
    let labels = sc.field.controls().labels();
    let (provenance, best, results) = match run.config.mc.policy {
        PolicyConfig::Pde => {
            let data = ValueField::from_payoff(&sc.grid, &sc.payoff)?;
            let sol = solve(&data, &sc.field, &[sc.horizon], &sc.scheme)?;
            let policy = extract_policy_from_pde(&sol.policy, &sc.grid)?;
            let r = estimate_value(&sc.field, &policy, &payoff, &sc.x0, sc.horizon, n, seed)?;
            (
                format!(
                    "argmax of the grid solve on {:?} nodes, {} time layers",
                    sc.grid.nodes_per_axis(),
                    policy.n_steps()
                ),
                None,
                vec![LabelledResult {
                    policy: "pde".into(),
                    result: r,
                }],
            )
        }
        PolicyConfig::Constant { control } => {
            let policy = MarkovPolicy::constant(control, nf, sc.horizon, run.config.mc.steps)?;
            let r = estimate_value(&sc.field, &policy, &payoff, &sc.x0, sc.horizon, n, seed)?;
            (
                format!(
                    "constant control {control} on {} steps",
                    run.config.mc.steps
                ),
                None,
                vec![LabelledResult {
                    policy: format!("constant:{}", labels[control]),
                    result: r,
                }],
            )
        }
        PolicyConfig::BestConstant => {
            let (best, all) = best_constant_policy(
                &sc.field,
                &payoff,
                &sc.x0,
                sc.horizon,
                run.config.mc.steps,
                n,
                seed,
            )?;
            (
                format!(
                    "every constant control on {} steps, common seeds",
                    run.config.mc.steps
                ),
                Some(best),
                all.into_iter()
                    .enumerate()
                    .map(|(f, r)| LabelledResult {
                        policy: format!("constant:{}", labels[f]),
                        result: r,
                    })
                    .collect(),
            )
        }
    };

    prepare(&run.output_dir)?;
    let mut w = csv::Writer::from_path(run.output_dir.join("mc.csv"))?;
    w.write_record(["policy", "n_paths", "seed", "mean", "stderr"])?;
    for r in &results {
        w.write_record([
            r.policy.clone(),
            r.result.n_paths.to_string(),
            r.result.seed.to_string(),
            r.result.mean.to_string(),
            r.result.stderr.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(run.output_dir.join("mc_excursions.csv"))?;
    w.write_record(["policy", "level", "sup_deviation_quantile"])?;
    for r in &results {
        for (level, q) in &r.result.max_excursion_quantiles {
            w.write_record([r.policy.clone(), level.to_string(), q.to_string()])?;
        }
    }
    w.flush()?;

    let headline = &results[best.unwrap_or(0)];
    let message = format!(
        "mc {}: {} mean {:.6} +- {:.6} ({} paths, seed {})",
        sc.name, headline.policy, headline.result.mean, headline.result.stderr, n, seed
    );
    write_json(
        &run.output_dir,
        "mc_summary.json",
        &McOutput {
            scenario: &sc.name,
            params: &sc.params,
            payoff: sc.payoff,
            x0: &sc.x0,
            horizon: sc.horizon,
            seed,
            n_paths: n,
            policy: run.config.mc.policy,
            provenance,
            best_control: best,
            results,
            wall_time_s: run
                .config
                .record_timing
                .then(|| start.elapsed().as_secs_f64()),
        },
    )?;
    Ok(Outcome {
        pass: true,
        message,
    })
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    scenario: &'a str,
    params: &'a Params,
    reports: &'a [VerificationReport],
    pass: bool,
}

fn bound_text(b: &Bound) -> String {
    match b {
        Bound::AtMost(t) => format!("<= {t}"),
        Bound::AtLeast(t) => format!(">= {t}"),
        Bound::Info => "info".into(),
    }
}

pub fn verify_cmd(run: &Resolved) -> Result<(Outcome, Vec<VerificationReport>), CliError> {
    let sc = &run.scenario;
    let reports = verify_selected(sc, &run.mc, &run.config.checks.verify)?;
    let pass = reports.iter().all(|r| r.pass);
    prepare(&run.output_dir)?;
    write_json(
        &run.output_dir,
        "verify.json",
        &VerifyOutput {
            scenario: &sc.name,
            params: &sc.params,
            reports: &reports,
            pass,
        },
    )?;
    let mut w = csv::Writer::from_path(run.output_dir.join("verify.csv"))?;
    w.write_record(["check", "metric", "value", "bound", "ok"])?;
    for r in &reports {
        for m in &r.metrics {
            w.write_record([
                r.name.clone(),
                m.label.clone(),
                m.value.to_string(),
                bound_text(&m.bound),
                m.ok.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let lines: Vec<String> = reports
        .iter()
        .map(|r| format!("  [{}] {}", verdict(r.pass), r.name))
        .collect();
    Ok((
        Outcome {
            pass,
            message: format!(
                "verify {}: {}\n{}",
                sc.name,
                verdict(pass),
                lines.join("\n")
            ),
        },
        reports,
    ))
}
