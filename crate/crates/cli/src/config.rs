use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sublab_core::pide::{SchemeConfig, SpatialGrid};
use sublab_core::scenarios::{get_scenario, Params, Scenario};
use sublab_core::verification::{CheckKind, McSettings};
use sublab_core::Payoff;

use crate::error::CliError;

/// Top-level run configuration, read from JSON. Unknown keys are rejected at
/// every level.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Times at which `solve` writes value fields; defaults to the horizon.
    #[serde(default)]
    pub output_times: Option<Vec<f64>>,
    #[serde(default)]
    pub psi: Option<Payoff>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub scheme: Option<SchemeConfig>,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Adds wall-clock times to the JSON summaries, which then differ between
    /// runs.
    #[serde(default)]
    pub record_timing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    /// Argmax policy of a grid solve on the scenario grid.
    Pde,
    Constant {
        control: usize,
    },
    /// Every constant policy on common random numbers.
    BestConstant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    pub policy: PolicyConfig,
    /// Euler steps for constant policies.
    pub steps: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 20_000,
            seed: 2024,
            policy: PolicyConfig::Pde,
            steps: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    /// Verification checks run by `verify`.
    pub verify: Vec<CheckKind>,
    /// Radii for the symbol decay table.
    pub symbol_radii: Vec<f64>,
    pub symbol_samples: usize,
    pub tightness_kappas: Vec<f64>,
    pub tightness_radii: Vec<f64>,
    pub lipschitz_pairs: usize,
    pub lipschitz_seed: u64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            verify: CheckKind::ALL.to_vec(),
            symbol_radii: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            symbol_samples: 8,
            tightness_kappas: vec![0.05, 0.1, 0.25, 0.5, 1.0],
            tightness_radii: vec![1.0, 2.0, 5.0, 10.0, 100.0],
            lipschitz_pairs: 2000,
            lipschitz_seed: 7,
        }
    }
}

/// A configuration resolved against the scenario registry.
pub struct Resolved {
    pub config: RunConfig,
    pub scenario: Scenario,
    pub output_times: Vec<f64>,
    pub output_dir: PathBuf,
    pub mc: McSettings,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(
        self,
        out_override: Option<PathBuf>,
        seed_override: Option<u64>,
    ) -> Result<Resolved, CliError> {
        let mut config = self;
        if let Some(seed) = seed_override {
            config.mc.seed = seed;
        }
        let mut sc = get_scenario(&config.scenario.name, &config.scenario.params)
            .map_err(CliError::config)?;
        if let Some(g) = &config.grid {
            let grid = SpatialGrid::new(g.lo.clone(), g.hi.clone(), g.n.clone())
                .map_err(CliError::config)?;
            if grid.dim() != sc.field.dim() {
                return Err(CliError::Config(format!(
                    "grid has dimension {} but scenario {} has dimension {}",
                    grid.dim(),
                    sc.name,
                    sc.field.dim()
                )));
            }
            sc.grid = grid;
        }
        if let Some(t) = config.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("horizon {t} must be positive")));
            }
            sc.horizon = t;
        }
        if let Some(psi) = config.psi {
            psi.validate().map_err(CliError::config)?;
            sc.payoff = psi;
        }
        if let Some(x0) = &config.x0 {
            sc.field.check_point("x0", x0).map_err(CliError::config)?;
            sc.x0 = x0.clone();
        }
        if let Some(scheme) = config.scheme {
            scheme.validate().map_err(CliError::config)?;
            sc.scheme = scheme;
        }
        let output_times = match &config.output_times {
            Some(ts) => {
                if ts.is_empty() || ts[0] <= 0.0 || ts.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::Config(
                        "output_times must be positive and increasing".into(),
                    ));
                }
                if config.horizon.is_none() {
                    sc.horizon = *ts.last().unwrap();
                }
                ts.clone()
            }
            None => vec![sc.horizon],
        };
        if config.mc.paths < sublab_core::mc::MIN_PATHS {
            return Err(CliError::Config(format!(
                "mc.paths must be at least {}",
                sublab_core::mc::MIN_PATHS
            )));
        }
        if config.mc.steps == 0 {
            return Err(CliError::Config("mc.steps must be positive".into()));
        }
        if let PolicyConfig::Constant { control } = config.mc.policy {
            if control >= sc.field.n_controls() {
                return Err(CliError::Config(format!(
                    "control {control} out of range for {} controls",
                    sc.field.n_controls()
                )));
            }
        }
        let output_dir = out_override
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let mc = McSettings {
            n_paths: config.mc.paths,
            seed: config.mc.seed,
        };
        Ok(Resolved {
            config,
            scenario: sc,
            output_times,
            output_dir,
            mc,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_str(s)
    }

    #[test]
    fn minimal_config() {
        let c = parse(r#"{"scenario": {"name": "g_brownian"}}"#).unwrap();
        let r = c.resolve(None, Some(5)).unwrap();
        assert_eq!(r.mc.seed, 5);
        assert_eq!(r.output_times, vec![0.25]);
        assert_eq!(r.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse(r#"{"scenario": {"name": "g_brownian"}, "bogus": 1}"#).is_err());
        assert!(parse(r#"{"scenario": {"name": "g_brownian", "extra": 1}}"#).is_err());
        assert!(parse(r#"{"scenario": {"name": "g_brownian"}, "mc": {"path": 10}}"#).is_err());
        assert!(parse(r#"{"scenario": {"name": "g_brownian"}, "psi": {"kind": "bump"}}"#).is_err());
    }

    #[test]
    fn bad_params_are_config_errors() {
        let c = parse(
            r#"{"scenario": {"name": "g_brownian", "params": {"sigma_lo": 2.0, "sigma_hi": 1.0}}}"#,
        )
        .unwrap();
        assert!(matches!(c.resolve(None, None), Err(CliError::Config(_))));
        let c = parse(r#"{"scenario": {"name": "drift_band"}, "grid": {"lo": [-1, -1], "hi": [1, 1], "n": [5, 5]}}"#).unwrap();
        assert!(matches!(c.resolve(None, None), Err(CliError::Config(_))));
        let c = parse(r#"{"scenario": {"name": "drift_band"}, "mc": {"paths": 5}}"#).unwrap();
        assert!(matches!(c.resolve(None, None), Err(CliError::Config(_))));
    }

    #[test]
    fn output_times_set_horizon() {
        let c = parse(r#"{"scenario": {"name": "drift_band"}, "output_times": [0.1, 0.3], "psi": {"kind": "bump", "radius": 1.0}}"#)
            .unwrap();
        let r = c.resolve(None, None).unwrap();
        assert_eq!(r.scenario.horizon, 0.3);
        assert_eq!(r.scenario.payoff, Payoff::Bump { radius: 1.0 });
    }
}
