//! Design sessions: one engine, one training queue and one protocol handler
//! per session, an append-only event log, the top-k preference pane, and
//! save/load with deterministic replay.

mod document;
mod events;
mod live;
pub mod protocol;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use document::{replay, DesignState, ReplayOutcome, SessionDocument, SESSION_VERSION};
pub use events::{DesignerEvent, EventKind, EventLog};
pub use live::{Session, SessionHost};

use crate::config::{derive_seed, ConfigError};
use crate::engine::{AppliedSuggestion, EliteSnapshot, EngineError};
use crate::level::{serialize_dungeon, Dungeon, LevelError, Room, RoomEdit, TileGrid};
use crate::preference::{
    build_adhoc_matrix, build_dataset, BlendMode, PreferenceError, PreferenceModel, TrainConfig, TrainingJob,
};
use protocol::{EliteView, PanesPayload, ProtocolError, RankedView};

/// Random stream identifiers passed to [`derive_seed`].
pub mod streams {
    pub const MODEL_INIT: u64 = 1;
    pub const DATASET: u64 = 1 << 32;
    pub const TRAINING: u64 = 2 << 32;
    pub const POLICY: u64 = 3 << 32;
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("room {0:?} does not exist")]
    UnknownRoom(String),
    #[error("no session has been started")]
    NoSession,
    #[error("session file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("malformed session file: {0}")]
    Document(String),
    #[error("replay diverged: {0}")]
    ReplayDiverged(String),
    #[error("invalid session name {0:?}")]
    InvalidName(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SessionError {
    /// Short machine-readable code carried by `error` messages.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Protocol(ProtocolError::Malformed(_)) => "Malformed",
            SessionError::Protocol(ProtocolError::UnknownKind(_)) => "UnknownKind",
            SessionError::Protocol(ProtocolError::Schema { .. }) => "SchemaViolation",
            SessionError::Level(e) => match e {
                LevelError::InvalidDimensions { .. } => "InvalidDimensions",
                LevelError::InvalidDoor(_) => "InvalidDoor",
                LevelError::OutOfBounds { .. } => "OutOfBounds",
                LevelError::LockedTile { .. } => "LockedTile",
                LevelError::DoorTileNotFloor { .. } => "DoorTileNotFloor",
                LevelError::InvalidConnection(_) => "InvalidConnection",
                LevelError::MalformedInput { .. } => "MalformedInput",
                LevelError::UnsupportedVersion(_) => "UnsupportedVersion",
            },
            SessionError::Engine(e) => match e {
                EngineError::EmptyCell(_) => "EmptyCell",
                EngineError::CellOutOfRange(_) => "CellOutOfRange",
                EngineError::DuplicateDimension(_) => "DuplicateDimension",
                EngineError::ShapeMismatch { .. } => "ShapeMismatch",
                _ => "EngineError",
            },
            SessionError::Preference(_) => "PreferenceError",
            SessionError::Config(_) => "ConfigError",
            SessionError::UnknownRoom(_) => "UnknownRoom",
            SessionError::NoSession => "NoSession",
            SessionError::VersionMismatch { .. } => "VersionMismatch",
            SessionError::Document(_) => "MalformedSession",
            SessionError::ReplayDiverged(_) => "ReplayDiverged",
            SessionError::InvalidName(_) => "InvalidName",
            SessionError::Io(_) => "IoError",
        }
    }
}

/// The dungeon being designed and which of its rooms the engine targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    dungeon: Dungeon,
    active_room: String,
}

impl Design {
    pub fn new(dungeon: Dungeon, active_room: impl Into<String>) -> Result<Design, SessionError> {
        let active_room = active_room.into();
        if dungeon.room(&active_room).is_none() {
            return Err(SessionError::UnknownRoom(active_room));
        }
        Ok(Design { dungeon, active_room })
    }

    /// A one-room dungeon holding the default room as `"room-1"`.
    pub fn single(room: Room) -> Design {
        Design {
            dungeon: Dungeon::new().with_room("room-1", room),
            active_room: "room-1".into(),
        }
    }

    pub fn dungeon(&self) -> &Dungeon {
        &self.dungeon
    }

    pub fn active_room_id(&self) -> &str {
        &self.active_room
    }

    pub fn active_room(&self) -> &Room {
        self.dungeon.room(&self.active_room).expect("active room exists")
    }

    fn room(&self, id: &str) -> Result<&Room, SessionError> {
        self.dungeon
            .room(id)
            .ok_or_else(|| SessionError::UnknownRoom(id.to_string()))
    }

    /// Applies a tile or lock edit. Returns the updated design and, when the
    /// active room changed, the room the engine must now target.
    pub fn edit(&self, room_id: &str, edit: RoomEdit) -> Result<(Design, Option<Room>), SessionError> {
        let room = self.room(room_id)?.apply_edit(edit)?;
        let next = Design {
            dungeon: self.dungeon.with_room(room_id, room.clone()),
            active_room: self.active_room.clone(),
        };
        let retarget = (room_id == self.active_room).then_some(room);
        Ok((next, retarget))
    }

    pub fn select(&self, room_id: &str) -> Result<(Design, Room), SessionError> {
        let room = self.room(room_id)?.clone();
        Ok((
            Design {
                dungeon: self.dungeon.clone(),
                active_room: room_id.to_string(),
            },
            room,
        ))
    }

    pub fn replace_active(&self, room: Room) -> Design {
        Design {
            dungeon: self.dungeon.with_room(self.active_room.clone(), room),
            active_room: self.active_room.clone(),
        }
    }

    /// Hex SHA-256 of the serialized dungeon plus the active room id.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(serialize_dungeon(&self.dungeon));
        h.update(self.active_room.as_bytes());
        hex::encode(h.finalize())
    }
}

/// Cold-start model for rooms of `input_len` tiles.
pub fn initial_model(input_len: usize, config: &TrainConfig, seed: u64) -> PreferenceModel {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::MODEL_INIT));
    PreferenceModel::new(input_len, &config.hidden_layers, &mut rng)
}

/// Builds the training job for an applied suggestion. Returns `Ok(None)`
/// (with a warning) when the rooms no longer match the model's input size or
/// the dataset has nothing to train on.
pub fn training_job(
    applied: &AppliedSuggestion,
    granularity: (usize, usize),
    config: &TrainConfig,
    input_len: usize,
    seed: u64,
    episode: u64,
) -> Result<Option<TrainingJob>, PreferenceError> {
    if applied.room.grid().len() != input_len {
        log::warn!(
            "skipping training: room has {} tiles but the model expects {input_len}",
            applied.room.grid().len()
        );
        return Ok(None);
    }
    let matrix = build_adhoc_matrix(applied.cell, granularity, config.step_metric)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::DATASET + episode));
    let dataset = match build_dataset(
        applied.members.iter().map(|(c, g)| (*c, g)),
        &matrix,
        input_len,
        config.test_fraction,
        &mut rng,
    ) {
        Ok(d) => d,
        Err(PreferenceError::EmptyGrid) => {
            log::warn!("skipping training: the grid holds no feasible individuals");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    if dataset.train.is_empty() {
        log::warn!("skipping training: every sample landed in the test split");
        return Ok(None);
    }
    Ok(Some(TrainingJob {
        episode,
        dataset,
        config: config.clone(),
        seed: derive_seed(seed, streams::TRAINING + episode),
    }))
}

/// One entry of the preference pane.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSuggestion {
    pub cell: (usize, usize),
    pub genotype: TileGrid,
    pub predicted_pref: f64,
    pub confidence: f64,
}

/// The `k` elites the model likes best: by predicted preference, then
/// confidence, then row-major cell order. Elites the model cannot read
/// (different room size) are left out.
pub fn rank_top_preference(snapshot: &EliteSnapshot, model: &PreferenceModel, k: usize) -> Vec<RankedSuggestion> {
    let cols = snapshot.granularity.1;
    let mut ranked: Vec<RankedSuggestion> = snapshot
        .cells
        .iter()
        .enumerate()
        .filter_map(|(idx, cell)| {
            let elite = cell.as_ref()?;
            let probs = model.predict(&elite.genotype).ok()?;
            Some(RankedSuggestion {
                cell: (idx / cols, idx % cols),
                genotype: elite.genotype.clone(),
                predicted_pref: crate::preference::predicted_preference(&probs),
                confidence: crate::preference::confidence(&probs),
            })
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.predicted_pref
            .total_cmp(&a.predicted_pref)
            .then(b.confidence.total_cmp(&a.confidence))
    });
    ranked.truncate(k);
    ranked
}

/// Mean confidence and mean blending weight of the model over the elites of
/// a snapshot; zeros when there are none.
pub fn elite_model_stats(snapshot: &EliteSnapshot, model: &PreferenceModel, mode: BlendMode) -> (f64, f64) {
    let mut n = 0usize;
    let (mut conf, mut w1) = (0.0, 0.0);
    for elite in snapshot.cells.iter().flatten() {
        if let Ok(b) = model.blend(&elite.genotype, elite.objective, mode) {
            n += 1;
            conf += b.confidence;
            w1 += b.w1;
        }
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (conf / n as f64, w1 / n as f64)
    }
}

/// Both suggestion panes as sent to the client.
pub fn panes(snapshot: &EliteSnapshot, model: &PreferenceModel, k: usize) -> PanesPayload {
    let cols = snapshot.granularity.1;
    let (width, height) = snapshot
        .cells
        .iter()
        .flatten()
        .next()
        .map_or((0, 0), |e| (e.genotype.width(), e.genotype.height()));
    PanesPayload {
        generation: snapshot.generation,
        dims: snapshot.dims,
        granularity: snapshot.granularity,
        width,
        height,
        elite_grid: snapshot
            .cells
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                c.as_ref().map(|e| EliteView {
                    cell: (idx / cols, idx % cols),
                    tiles: e.genotype.to_tile_string(),
                    objective: e.objective,
                    combined: e.combined,
                })
            })
            .collect(),
        top_preference: rank_top_preference(snapshot, model, k)
            .into_iter()
            .map(|r| RankedView {
                cell: r.cell,
                tiles: r.genotype.to_tile_string(),
                predicted_pref: r.predicted_pref,
                confidence: r.confidence,
            })
            .collect(),
    }
}

/// Publish digests expected at each generation, used to verify a replay.
#[derive(Debug, Default)]
pub(crate) struct PublishLedger {
    expected: BTreeMap<u64, Vec<(String, bool)>>,
}

impl PublishLedger {
    pub(crate) fn from_events(events: &[DesignerEvent]) -> PublishLedger {
        let mut expected: BTreeMap<u64, Vec<(String, bool)>> = BTreeMap::new();
        for e in events {
            if let EventKind::Publish { digest } = &e.event {
                expected.entry(e.generation).or_default().push((digest.clone(), false));
            }
        }
        PublishLedger { expected }
    }

    pub(crate) fn observe(&mut self, snapshot: impl FnOnce() -> EliteSnapshot, generation: u64) {
        if let Some(list) = self.expected.get_mut(&generation) {
            if list.iter().all(|(_, seen)| *seen) {
                return;
            }
            let digest = snapshot().digest();
            for (d, seen) in list.iter_mut() {
                if *d == digest {
                    *seen = true;
                }
            }
        }
    }

    pub(crate) fn totals(&self) -> (usize, usize) {
        let all = self.expected.values().flatten();
        let total = all.clone().count();
        let seen = all.filter(|(_, s)| *s).count();
        (total, seen)
    }

    pub(crate) fn first_unmatched(&self) -> Option<(u64, String)> {
        self.expected
            .iter()
            .find_map(|(g, list)| list.iter().find(|(_, s)| !s).map(|(d, _)| (*g, d.clone())))
    }
}
