//! Experiment configuration: population (explicit or generated), transfer
//! function, and numeric options. Parsed from JSON; a seed is mandatory
//! whenever the population is drawn from a distribution, so every run can be
//! replayed exactly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use dynasty_core::{Agent, GenerationState, TransferSpec};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub population: PopulationSpec,
    pub transfer: TransferSpec,
    #[serde(default)]
    pub options: Options,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum PopulationSpec {
    /// `{"agents": [[w, alpha], ...]}`
    #[serde(rename = "agents")]
    Agents(Vec<(f64, f64)>),
    /// `{"generator": {"n": 8, "alpha_distribution": {...}, "w_init": "egalitarian"}}`
    #[serde(rename = "generator")]
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n: usize,
    pub alpha_distribution: AlphaDistribution,
    #[serde(default)]
    pub w_init: WInit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaDistribution {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WInit {
    #[default]
    Egalitarian,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    pub tol: f64,
    pub max_iter: usize,
    pub horizon: usize,
    pub eps: f64,
    pub gap_tol: f64,
    pub grid_points: usize,
    pub seed: Option<u64>,
    /// Endowment range for effort-curve scans.
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: 1e-10,
            max_iter: 10_000,
            horizon: 500,
            eps: 1e-3,
            gap_tol: 0.1,
            grid_points: 512,
            seed: None,
            w_min: 0.1,
            w_max: 2.5,
        }
    }
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
    config
        .transfer
        .validate()
        .map_err(|e| CliError::Config(format!("transfer: {e}")))?;
    Ok(config)
}

/// Materializes generation 0 from the config. `seed_override` replaces
/// `options.seed` when given.
pub fn build_state(
    config: &ExperimentConfig,
    seed_override: Option<u64>,
) -> Result<GenerationState, CliError> {
    let agents = match &config.population {
        PopulationSpec::Agents(list) => {
            if list.is_empty() {
                return Err(CliError::Config("population must not be empty".into()));
            }
            list.iter()
                .map(|&(w, alpha)| Agent::new(w, alpha))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("agents: {e}")))?
        }
        PopulationSpec::Generator(generator) => {
            if generator.n == 0 {
                return Err(CliError::Config("generator.n must be at least 1".into()));
            }
            let alphas = sample_alphas(generator, config.options.seed, seed_override)?;
            let ws: Vec<f64> = match &generator.w_init {
                WInit::Egalitarian => vec![1.0; generator.n],
                WInit::Explicit(ws) => {
                    if ws.len() != generator.n {
                        return Err(CliError::Config(format!(
                            "w_init lists {} endowments for n = {}",
                            ws.len(),
                            generator.n
                        )));
                    }
                    ws.clone()
                }
            };
            ws.iter()
                .zip(&alphas)
                .map(|(&w, &alpha)| Agent::new(w, alpha))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("generator: {e}")))?
        }
    };
    GenerationState::new(agents).map_err(|e| CliError::Config(format!("population: {e}")))
}

fn sample_alphas(
    generator: &GeneratorSpec,
    config_seed: Option<u64>,
    seed_override: Option<u64>,
) -> Result<Vec<f64>, CliError> {
    match &generator.alpha_distribution {
        AlphaDistribution::Constant { value } => Ok(vec![*value; generator.n]),
        AlphaDistribution::Uniform { lo, hi } => {
            if !(lo < hi && *lo > 0.0 && *hi < 1.0) {
                return Err(CliError::Config(format!(
                    "uniform alpha range ({lo}, {hi}) must satisfy 0 < lo < hi < 1"
                )));
            }
            let seed = seed_override.or(config_seed).ok_or_else(|| {
                CliError::Config(
                    "a seed is required when alpha_distribution is random (set options.seed or --seed)"
                        .into(),
                )
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..generator.n)
                .map(|_| rng.random_range(*lo..*hi))
                .collect())
        }
    }
}
