//! Feasibility, pattern-based objective fitness and behavior dimensions.
//!
//! Everything here is a pure function of a tile grid and its doors. The
//! engine evaluates genotypes through [`RoomAnalysis`], which computes the
//! connectivity labels, spatial classification and meso-patterns once and
//! derives every metric from them.

mod connectivity;
mod dimensions;
mod patterns;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::{Door, Room, TileGrid};

pub use connectivity::{walkable_components, Components};
pub use dimensions::{BehaviorDescriptor, DimensionKind, ParseDimensionError};
pub use patterns::{MesoKind, MesoPattern, SpatialClassification, SpatialLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("objective fitness requested for an infeasible room")]
    InfeasibleInput,
    #[error("the similarity dimension needs a target room")]
    MissingTarget,
    #[error("target room is {target_width}x{target_height}, room is {width}x{height}")]
    ShapeMismatch {
        width: usize,
        height: usize,
        target_width: usize,
        target_height: usize,
    },
}

/// Constants of the objective and dimension formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Desired fraction of walkable tiles classified as chamber.
    pub chamber_target: f64,
    /// Meso-pattern score that saturates the meso half of the objective.
    pub pattern_norm: f64,
    /// Number of meso-patterns at which the PATTERNS dimension saturates.
    pub patterns_cap: f64,
    /// Enemy count saturating LENIENCY, as a fraction of the room area (rounded up).
    pub leniency_enemy_fraction: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            chamber_target: 0.5,
            pattern_norm: 4.0,
            patterns_cap: 10.0,
            leniency_enemy_fraction: 0.1,
        }
    }
}

/// Precomputed structure of one room.
#[derive(Debug, Clone)]
pub struct RoomAnalysis<'a> {
    grid: &'a TileGrid,
    doors: Vec<(usize, usize)>,
    components: Components,
    spatial: SpatialClassification,
    meso: Vec<MesoPattern>,
}

impl<'a> RoomAnalysis<'a> {
    pub fn new(grid: &'a TileGrid, doors: &[Door]) -> Self {
        let doors = crate::level::door_positions(grid, doors);
        let components = Components::label(grid);
        let spatial = SpatialClassification::classify(grid);
        let meso = patterns::find_meso_patterns(grid, &spatial, &doors);
        RoomAnalysis {
            grid,
            doors,
            components,
            spatial,
            meso,
        }
    }

    pub fn of_room(room: &'a Room) -> Self {
        Self::new(room.grid(), room.doors())
    }

    pub fn grid(&self) -> &TileGrid {
        self.grid
    }

    pub fn components(&self) -> &Components {
        &self.components
    }

    pub fn spatial(&self) -> &SpatialClassification {
        &self.spatial
    }

    pub fn meso(&self) -> &[MesoPattern] {
        &self.meso
    }

    fn door_label(&self, i: usize) -> Option<u32> {
        let (x, y) = self.doors[i];
        self.components.label_at(x, y)
    }

    /// Component holding the most doors; ties go to the earliest door.
    fn main_component(&self) -> Option<u32> {
        let mut best: Option<(u32, usize)> = None;
        for i in 0..self.doors.len() {
            let Some(label) = self.door_label(i) else { continue };
            let count = (0..self.doors.len())
                .filter(|&j| self.door_label(j) == Some(label))
                .count();
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((label, count));
            }
        }
        best.map(|(label, _)| label)
    }

    fn door_pairs(&self) -> (usize, usize) {
        let n = self.doors.len();
        let mut connected = 0;
        for i in 0..n {
            for j in i + 1..n {
                let a = self.door_label(i);
                if a.is_some() && a == self.door_label(j) {
                    connected += 1;
                }
            }
        }
        (connected, n * (n.saturating_sub(1)) / 2)
    }

    fn entities(&self) -> (usize, usize) {
        let main = self.main_component();
        let mut total = 0;
        let mut reachable = 0;
        for y in 0..self.grid.height() {
            for x in 0..self.grid.width() {
                if self.grid.get(x, y).is_entity() {
                    total += 1;
                    if main.is_some() && self.components.label_at(x, y) == main {
                        reachable += 1;
                    }
                }
            }
        }
        (reachable, total)
    }

    /// All doors share one walkable component and every treasure and enemy lies in it.
    pub fn is_feasible(&self) -> bool {
        let (connected, pairs) = self.door_pairs();
        let (reachable, total) = self.entities();
        !self.doors.is_empty() && self.main_component().is_some() && connected == pairs && reachable == total
    }

    /// Gradient toward feasibility for the infeasible population; 1.0 iff feasible.
    pub fn infeasibility_fitness(&self) -> f64 {
        let (connected, pairs) = self.door_pairs();
        let door_term = if pairs == 0 {
            if self.main_component().is_some() {
                1.0
            } else {
                0.0
            }
        } else {
            connected as f64 / pairs as f64
        };
        let (reachable, total) = self.entities();
        let entity_term = if total == 0 {
            1.0
        } else {
            reachable as f64 / total as f64
        };
        0.5 * door_term + 0.5 * entity_term
    }

    pub fn chamber_ratio(&self) -> f64 {
        let walkable = self.spatial.walkable_count();
        if walkable == 0 {
            return 0.0;
        }
        self.spatial.count(SpatialLabel::Chamber) as f64 / walkable as f64
    }

    pub fn meso_count(&self, kind: MesoKind) -> usize {
        self.meso.iter().filter(|m| m.kind == kind).count()
    }

    pub fn objective_fitness(&self, config: &AnalysisConfig) -> Result<f64, AnalysisError> {
        if !self.is_feasible() {
            return Err(AnalysisError::InfeasibleInput);
        }
        Ok(self.objective_unchecked(config))
    }

    pub(crate) fn objective_unchecked(&self, config: &AnalysisConfig) -> f64 {
        let spatial = (1.0 - (config.chamber_target - self.chamber_ratio()).abs()).clamp(0.0, 1.0);
        let rooms = (self.meso_count(MesoKind::TreasureRoom) + self.meso_count(MesoKind::GuardRoom)) as f64;
        let dead_ends = self.meso_count(MesoKind::DeadEnd) as f64;
        let meso = ((rooms - 0.5 * dead_ends) / config.pattern_norm).clamp(0.0, 1.0);
        0.5 * spatial + 0.5 * meso
    }

    pub fn dimension_value(
        &self,
        kind: DimensionKind,
        target: Option<&TileGrid>,
        config: &AnalysisConfig,
    ) -> Result<f64, AnalysisError> {
        dimensions::value(self, kind, target, config)
    }

    pub fn descriptor(
        &self,
        dims: (DimensionKind, DimensionKind),
        target: Option<&TileGrid>,
        config: &AnalysisConfig,
    ) -> Result<BehaviorDescriptor, AnalysisError> {
        Ok(BehaviorDescriptor::new(
            dims,
            (
                self.dimension_value(dims.0, target, config)?,
                self.dimension_value(dims.1, target, config)?,
            ),
        ))
    }
}

pub fn is_feasible(room: &Room) -> bool {
    RoomAnalysis::of_room(room).is_feasible()
}

pub fn infeasibility_fitness(room: &Room) -> f64 {
    RoomAnalysis::of_room(room).infeasibility_fitness()
}

pub fn spatial_patterns(room: &Room) -> SpatialClassification {
    SpatialClassification::classify(room.grid())
}

pub fn meso_patterns(room: &Room) -> Vec<MesoPattern> {
    RoomAnalysis::of_room(room).meso
}

pub fn objective_fitness(room: &Room, config: &AnalysisConfig) -> Result<f64, AnalysisError> {
    RoomAnalysis::of_room(room).objective_fitness(config)
}

pub fn dimension_value(
    room: &Room,
    kind: DimensionKind,
    target: Option<&Room>,
    config: &AnalysisConfig,
) -> Result<f64, AnalysisError> {
    RoomAnalysis::of_room(room).dimension_value(kind, target.map(Room::grid), config)
}
