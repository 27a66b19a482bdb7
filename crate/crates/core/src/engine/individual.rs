use serde::{Deserialize, Serialize};

use crate::analysis::BehaviorDescriptor;
use crate::level::TileGrid;
use crate::preference::Blended;

/// An evaluated candidate room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genotype: TileGrid,
    pub feasible: bool,
    pub descriptor: BehaviorDescriptor,
    /// Objective fitness when feasible, infeasibility fitness otherwise.
    pub objective: f64,
    /// Blended score used for ranking feasible members.
    pub combined: f64,
    /// Model opinion behind `combined`; `None` when the model carried no weight
    /// and was not consulted.
    pub blend: Option<Blended>,
    /// Insertion counter; larger is more recent.
    pub birth: u64,
}

impl Individual {
    /// Ordering key of feasible members: combined, then objective, then recency.
    pub(crate) fn feasible_rank(&self, other: &Individual) -> std::cmp::Ordering {
        self.combined
            .total_cmp(&other.combined)
            .then(self.objective.total_cmp(&other.objective))
            .then(self.birth.cmp(&other.birth))
    }

    pub(crate) fn infeasible_rank(&self, other: &Individual) -> std::cmp::Ordering {
        self.objective
            .total_cmp(&other.objective)
            .then(self.birth.cmp(&other.birth))
    }
}
