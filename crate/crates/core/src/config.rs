//! Tunables for every subsystem, loadable from a TOML file. Missing keys keep
//! their defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineConfig;
use crate::preference::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub listen: String,
    pub session_dir: PathBuf,
    pub publish_every_generations: u64,
    pub publish_every_ms: u64,
    /// Length of the preference pane.
    pub top_k: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            listen: "127.0.0.1:8080".into(),
            session_dir: PathBuf::from("sessions"),
            publish_every_generations: 50,
            publish_every_ms: 500,
            top_k: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Generations evolved between two synthetic applications.
    pub burst_generations: u64,
    /// Generations after an application at which its trained model is swapped in.
    pub swap_latency: u64,
    /// Snapshot cadence feeding the run digest.
    pub publish_every: u64,
    /// Apply the scripted room draft before the first episode.
    pub draft: bool,
    /// Write measured wall times into report.csv instead of zeros.
    pub wall_clock: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            burst_generations: 500,
            swap_latency: 100,
            publish_every: 50,
            draft: true,
            wall_clock: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub engine: EngineConfig,
    pub training: TrainConfig,
    pub session: SessionConfig,
    pub sim: SimConfig,
}

fn unit(name: &str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} = {v} is outside [0, 1]")))
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.engine;
        if e.rows == 0 || e.cols == 0 || e.feasible_cap == 0 || e.infeasible_cap == 0 {
            return Err(ConfigError::Invalid(
                "grid granularity and population caps must be positive".into(),
            ));
        }
        if e.dimensions.0 == e.dimensions.1 {
            return Err(ConfigError::Invalid(format!(
                "dimension {} selected twice",
                e.dimensions.0
            )));
        }
        unit("engine.crossover_rate", e.crossover_rate)?;
        unit("engine.mutation_rate", e.mutation_rate)?;
        unit("engine.seed_mutation_rate", e.seed_mutation_rate)?;
        unit("engine.analysis.chamber_target", e.analysis.chamber_target)?;
        unit(
            "engine.analysis.leniency_enemy_fraction",
            e.analysis.leniency_enemy_fraction,
        )?;
        if e.analysis.pattern_norm <= 0.0 || e.analysis.patterns_cap <= 0.0 {
            return Err(ConfigError::Invalid("pattern normalizers must be positive".into()));
        }
        let t = &self.training;
        unit("training.test_fraction", t.test_fraction)?;
        if t.hidden_layers.contains(&0)
            || t.batch_size == 0
            || t.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        {
            return Err(ConfigError::Invalid(
                "training needs non-empty layers, a positive batch size and learning rate".into(),
            ));
        }
        if self.session.top_k == 0 || self.session.publish_every_generations == 0 {
            return Err(ConfigError::Invalid(
                "session.top_k and publish cadence must be positive".into(),
            ));
        }
        if self.sim.publish_every == 0 {
            return Err(ConfigError::Invalid("sim.publish_every must be positive".into()));
        }
        Ok(())
    }
}

/// Derives an independent seed for one named random stream.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = base
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
