use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnalysisConfig, AnalysisError, RoomAnalysis, SpatialLabel};
use crate::level::{TileGrid, TileKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionKind {
    Symmetry,
    Similarity,
    Patterns,
    Linearity,
    Leniency,
}

impl DimensionKind {
    pub const ALL: [DimensionKind; 5] = [
        DimensionKind::Symmetry,
        DimensionKind::Similarity,
        DimensionKind::Patterns,
        DimensionKind::Linearity,
        DimensionKind::Leniency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DimensionKind::Symmetry => "symmetry",
            DimensionKind::Similarity => "similarity",
            DimensionKind::Patterns => "patterns",
            DimensionKind::Linearity => "linearity",
            DimensionKind::Leniency => "leniency",
        }
    }
}

impl fmt::Display for DimensionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown dimension {0:?}")]
pub struct ParseDimensionError(pub String);

impl FromStr for DimensionKind {
    type Err = ParseDimensionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DimensionKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ParseDimensionError(s.to_string()))
    }
}

/// A point in the two active behavior dimensions, each value in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorDescriptor {
    pub dims: (DimensionKind, DimensionKind),
    pub values: (f64, f64),
}

impl BehaviorDescriptor {
    pub fn new(dims: (DimensionKind, DimensionKind), values: (f64, f64)) -> Self {
        BehaviorDescriptor {
            dims,
            values: (values.0.clamp(0.0, 1.0), values.1.clamp(0.0, 1.0)),
        }
    }
}

/// Best match fraction of the wall mask under the horizontal mirror,
/// vertical mirror and 180 degree rotation.
fn symmetry(grid: &TileGrid) -> f64 {
    let (w, h) = (grid.width(), grid.height());
    let wall = |x: usize, y: usize| grid.get(x, y) == TileKind::Wall;
    let (mut horizontal, mut vertical, mut rotation) = (0usize, 0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            let here = wall(x, y);
            horizontal += usize::from(here == wall(w - 1 - x, y));
            vertical += usize::from(here == wall(x, h - 1 - y));
            rotation += usize::from(here == wall(w - 1 - x, h - 1 - y));
        }
    }
    horizontal.max(vertical).max(rotation) as f64 / (w * h) as f64
}

fn similarity(grid: &TileGrid, target: &TileGrid) -> Result<f64, AnalysisError> {
    if !grid.same_shape(target) {
        return Err(AnalysisError::ShapeMismatch {
            width: grid.width(),
            height: grid.height(),
            target_width: target.width(),
            target_height: target.height(),
        });
    }
    let hamming = grid.tiles().iter().zip(target.tiles()).filter(|(a, b)| a != b).count();
    Ok(1.0 - hamming as f64 / grid.len() as f64)
}

pub(super) fn value(
    analysis: &RoomAnalysis<'_>,
    kind: DimensionKind,
    target: Option<&TileGrid>,
    config: &AnalysisConfig,
) -> Result<f64, AnalysisError> {
    let grid = analysis.grid();
    let v = match kind {
        DimensionKind::Symmetry => symmetry(grid),
        DimensionKind::Similarity => similarity(grid, target.ok_or(AnalysisError::MissingTarget)?)?,
        DimensionKind::Patterns => (analysis.meso().len() as f64 / config.patterns_cap).min(1.0),
        DimensionKind::Linearity => {
            let walkable = analysis.spatial().walkable_count();
            if walkable == 0 {
                1.0
            } else {
                1.0 - analysis.spatial().count(SpatialLabel::Connector) as f64 / walkable as f64
            }
        }
        DimensionKind::Leniency => {
            let cap = (config.leniency_enemy_fraction * grid.len() as f64).ceil().max(1.0);
            1.0 - (grid.count(TileKind::Enemy) as f64 / cap).min(1.0)
        }
    };
    Ok(v.clamp(0.0, 1.0))
}
