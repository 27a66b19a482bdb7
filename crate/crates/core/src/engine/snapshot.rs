//! Immutable elite snapshots handed to consumers of the engine.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EliteGrid;
use crate::analysis::DimensionKind;
use crate::level::TileGrid;

/// The elite of one cell as seen by a consumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotElite {
    pub genotype: TileGrid,
    pub objective: f64,
    pub combined: f64,
    pub descriptor: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EliteSnapshot {
    pub generation: u64,
    pub dims: (DimensionKind, DimensionKind),
    pub granularity: (usize, usize),
    /// Row-major cells; `None` marks an empty cell.
    pub cells: Vec<Option<SnapshotElite>>,
}

impl EliteSnapshot {
    pub fn capture(grid: &EliteGrid) -> EliteSnapshot {
        EliteSnapshot {
            generation: grid.generation(),
            dims: grid.dims(),
            granularity: grid.granularity(),
            cells: grid
                .cells()
                .map(|(_, cell)| {
                    cell.elite().map(|e| SnapshotElite {
                        genotype: e.genotype.clone(),
                        objective: e.objective,
                        combined: e.combined,
                        descriptor: e.descriptor.values,
                    })
                })
                .collect(),
        }
    }

    pub fn elite(&self, i: usize, j: usize) -> Option<&SnapshotElite> {
        self.cells.get(i * self.granularity.1 + j).and_then(Option::as_ref)
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("snapshot serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
