use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisConfig, DimensionKind};
use crate::preference::BlendMode;

/// Tunables of the evolutionary engine. Every value can be overridden from
/// the `[engine]` table of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Bins along the first active dimension.
    pub rows: usize,
    /// Bins along the second active dimension.
    pub cols: usize,
    pub feasible_cap: usize,
    pub infeasible_cap: usize,
    pub offspring_per_generation: usize,
    /// Probability of taking each tile from the first parent.
    pub crossover_rate: f64,
    /// Per-tile probability of resampling among the four tile kinds.
    pub mutation_rate: f64,
    /// Mutated copies of the target created when the grid is (re)seeded.
    pub seed_population: usize,
    pub seed_mutation_rate: f64,
    pub dimensions: (DimensionKind, DimensionKind),
    pub blend: BlendMode,
    pub analysis: AnalysisConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            rows: 5,
            cols: 5,
            feasible_cap: 25,
            infeasible_cap: 25,
            offspring_per_generation: 20,
            crossover_rate: 0.5,
            mutation_rate: 0.04,
            seed_population: 100,
            seed_mutation_rate: 0.2,
            dimensions: (DimensionKind::Symmetry, DimensionKind::Similarity),
            blend: BlendMode::Weighted,
            analysis: AnalysisConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn rows_cols(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Upper bound on the size of one preference dataset.
    pub fn max_feasible(&self) -> usize {
        self.rows * self.cols * self.feasible_cap
    }
}
