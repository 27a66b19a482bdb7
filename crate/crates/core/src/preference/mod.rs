//! The designer preference model.
//!
//! Each time the designer applies a suggestion, an ad-hoc label matrix is
//! centred on the chosen cell, every feasible individual in the grid is
//! labeled with its cell's value, and a small feed-forward classifier is
//! trained for one short episode on that dataset. Its prediction is blended
//! into individual evaluation with a weight that grows with the model's
//! confidence and test accuracy, capped at one half.

mod adhoc;
mod blend;
mod dataset;
mod encode;
mod model;
mod network;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adhoc::{build_adhoc_matrix, AdHocMatrix, StepMetric};
pub use blend::{combined_fitness, compute_weights, confidence, predicted_preference, BlendMode, Blended};
pub use dataset::{build_dataset, LabeledSample, PreferenceDataset};
pub use encode::{encode_room, encode_tile};
pub use model::{PreferenceModel, TrainConfig, TrainReport};
pub use network::{Gradients, Mlp};
pub use trainer::{run_job_sync, TrainingJob, TrainingOutcome, TrainingQueue};

pub const NUM_CLASSES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreferenceError {
    #[error("expected an input of {expected} tiles, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("cell ({i}, {j}) is outside a {rows}x{cols} grid")]
    OutOfRange {
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
    },
    #[error("the grid holds no feasible individuals")]
    EmptyGrid,
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("{name} = {value} is outside [0, 1]")]
    DomainError { name: &'static str, value: f64 },
    #[error("bad model checkpoint: {0}")]
    Checkpoint(String),
}

/// One of the six discrete preference values 0.0, 0.2, ..., 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PreferenceClass(u8);

impl PreferenceClass {
    pub const ALL: [PreferenceClass; NUM_CLASSES] = [
        PreferenceClass(0),
        PreferenceClass(1),
        PreferenceClass(2),
        PreferenceClass(3),
        PreferenceClass(4),
        PreferenceClass(5),
    ];

    pub fn from_index(index: usize) -> Option<Self> {
        (index < NUM_CLASSES).then_some(PreferenceClass(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// `index / 5`, correctly rounded.
    pub fn value(self) -> f64 {
        self.0 as f64 / 5.0
    }

    /// Class whose value is `max(0, 1 - 0.2 * steps)`.
    pub fn from_steps(steps: usize) -> Self {
        PreferenceClass((NUM_CLASSES - 1).saturating_sub(steps) as u8)
    }
}
