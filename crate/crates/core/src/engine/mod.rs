//! Constrained MAP-Elites with a feasible and an infeasible population per
//! cell, evolving room candidates around the designer's current target room.

mod config;
mod grid;
mod individual;
pub mod operators;
mod runner;
mod snapshot;

use std::sync::Arc;

use thiserror::Error;

pub use config::EngineConfig;
pub use grid::{cell_index, Cell, EliteGrid, Placement, Retarget};
pub use individual::Individual;
pub use runner::{Applied, AppliedSuggestion, CommandOutcome, Engine, EngineHandle, PublishPolicy};
pub use snapshot::{EliteSnapshot, SnapshotElite};

use crate::analysis::{AnalysisError, DimensionKind};
use crate::level::{LevelError, Room};
use crate::preference::PreferenceModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("genotype is {found:?} but the target room is {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("grid is empty and there is no target room to seed from")]
    NoPopulation,
    #[error("dimension {0} selected twice")]
    DuplicateDimension(DimensionKind),
    #[error("cell {0:?} is outside the grid")]
    CellOutOfRange((usize, usize)),
    #[error("cell {0:?} has no elite")]
    EmptyCell((usize, usize)),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("engine thread has stopped")]
    Stopped,
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Requests queued to the engine; each is applied at a generation boundary.
#[derive(Debug, Clone)]
pub enum EngineCommand {
    SetDimensions((DimensionKind, DimensionKind)),
    SetTargetRoom(Room),
    ApplySuggestion((usize, usize)),
    SetLocks(Vec<bool>),
    /// Swaps in a newly trained model and rescores the feasible members.
    SetModel(Arc<PreferenceModel>),
    Pause,
    Resume,
}
