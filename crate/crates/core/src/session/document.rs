//! Session files and deterministic replay of an event log.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{initial_model, training_job, Design, DesignerEvent, EventKind, EventLog, PublishLedger, SessionError};
use crate::config::Config;
use crate::engine::{CommandOutcome, Engine, EngineCommand};
use crate::level::format::DungeonDoc;
use crate::level::RoomEdit;
use crate::preference::{PreferenceModel, TrainingJob};

pub const SESSION_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DesignState {
    pub dungeon: DungeonDoc,
    pub active_room: String,
}

impl DesignState {
    pub fn of(design: &Design) -> DesignState {
        DesignState {
            dungeon: DungeonDoc::from(design.dungeon()),
            active_room: design.active_room_id().to_string(),
        }
    }

    pub fn to_design(&self) -> Result<Design, SessionError> {
        Design::new(self.dungeon.to_dungeon()?, self.active_room.clone())
    }
}

/// Everything needed to rebuild a session: its seed, config, starting design
/// and event log. The final design and model are stored too and checked
/// against the replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SessionDocument {
    pub version: u64,
    pub id: String,
    pub seed: u64,
    pub config: Config,
    pub initial: DesignState,
    pub current: DesignState,
    /// Engine generation the session had reached when saved.
    pub generation: u64,
    pub events: EventLog,
    /// Base64 model checkpoint.
    pub model: String,
}

impl SessionDocument {
    pub fn model(&self) -> Result<PreferenceModel, SessionError> {
        let bytes = BASE64
            .decode(&self.model)
            .map_err(|e| SessionError::Document(format!("model: {e}")))?;
        Ok(PreferenceModel::from_bytes(&bytes)?)
    }

    pub fn encode_model(model: &PreferenceModel) -> String {
        BASE64.encode(model.to_bytes())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session document serializes")
    }

    pub fn from_json(text: &str) -> Result<SessionDocument, SessionError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SessionError::Document(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| SessionError::Document("missing numeric `version`".into()))?;
        if version != SESSION_VERSION {
            return Err(SessionError::VersionMismatch {
                found: version,
                expected: SESSION_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| SessionError::Document(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), SessionError> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SessionDocument, SessionError> {
        SessionDocument::from_json(&std::fs::read_to_string(path)?)
    }

    /// Replays the log up to the saved generation and checks the result
    /// against the stored design and model.
    pub fn replay(&self) -> Result<ReplayOutcome, SessionError> {
        let outcome = replay(
            &self.config,
            self.seed,
            &self.initial.to_design()?,
            self.events.events(),
            self.generation,
        )?;
        if outcome.design != self.current.to_design()? {
            return Err(SessionError::ReplayDiverged(
                "final design differs from the saved one".into(),
            ));
        }
        if *outcome.model != self.model()? {
            return Err(SessionError::ReplayDiverged(
                "final model differs from the saved checkpoint".into(),
            ));
        }
        Ok(outcome)
    }
}

/// State reconstructed from an event log.
pub struct ReplayOutcome {
    pub engine: Engine,
    pub design: Design,
    pub model: Arc<PreferenceModel>,
    /// Training jobs scheduled but not completed when the log ends.
    pub pending: VecDeque<TrainingJob>,
    pub next_episode: u64,
    /// Published snapshots in the log and how many the replay reproduced.
    pub publishes: usize,
    pub publishes_verified: usize,
}

fn unexpected(event: &DesignerEvent, what: &str) -> SessionError {
    SessionError::ReplayDiverged(format!("event {} ({}): {what}", event.seq, event.event.name()))
}

/// Re-executes `events` against a fresh engine built from `seed` and the
/// initial design, stepping the engine to each event's generation before
/// applying it, then on to `until`. Every PUBLISH digest in the log must be
/// reproduced.
pub fn replay(
    config: &Config,
    seed: u64,
    initial: &Design,
    events: &[DesignerEvent],
    until: u64,
) -> Result<ReplayOutcome, SessionError> {
    let room = initial.active_room();
    let mut model = Arc::new(initial_model(room.grid().len(), &config.training, seed));
    let mut engine = Engine::new(config.engine.clone(), Arc::clone(&model), room.clone(), seed)?;
    let mut design = initial.clone();
    let mut pending: VecDeque<TrainingJob> = VecDeque::new();
    let mut next_episode = 1;
    let mut ledger = PublishLedger::from_events(events);
    ledger.observe(|| engine.snapshot(), engine.generation());

    let advance = |engine: &mut Engine, ledger: &mut PublishLedger, target: u64| -> Result<(), SessionError> {
        while engine.generation() < target {
            engine.run_until(engine.generation() + 1)?;
            ledger.observe(|| engine.snapshot(), engine.generation());
        }
        Ok(())
    };

    for event in events.iter().filter(|e| e.event.changes_state()) {
        if event.generation < engine.generation() {
            return Err(unexpected(event, "generation went backwards"));
        }
        advance(&mut engine, &mut ledger, event.generation)?;
        match &event.event {
            EventKind::Edit { room, x, y, tile } => {
                let (next, retarget) = design.edit(
                    room,
                    RoomEdit::SetTile {
                        x: *x,
                        y: *y,
                        kind: *tile,
                    },
                )?;
                if let Some(r) = retarget {
                    engine.apply(EngineCommand::SetTargetRoom(r))?;
                }
                design = next;
            }
            EventKind::Lock { room, x, y } => {
                let (next, retarget) = design.edit(room, RoomEdit::ToggleLock { x: *x, y: *y })?;
                if let Some(r) = retarget {
                    engine.apply(EngineCommand::SetTargetRoom(r))?;
                }
                design = next;
            }
            EventKind::SelectRoom { room } => {
                let (next, r) = design.select(room)?;
                engine.apply(EngineCommand::SetTargetRoom(r))?;
                design = next;
            }
            EventKind::SetDims { dims } => {
                engine.apply(EngineCommand::SetDimensions(*dims))?;
            }
            EventKind::ApplySuggestion { cell, episode } => {
                let applied = match engine.apply(EngineCommand::ApplySuggestion(*cell))?.outcome {
                    CommandOutcome::Suggestion(a) => a,
                    CommandOutcome::Done => return Err(unexpected(event, "no suggestion applied")),
                };
                design = design.replace_active(applied.room.clone());
                if let Some(ep) = episode {
                    let job = training_job(
                        &applied,
                        engine.grid().granularity(),
                        &config.training,
                        model.input_len(),
                        seed,
                        *ep,
                    )?
                    .ok_or_else(|| unexpected(event, "logged episode could not be rebuilt"))?;
                    pending.push_back(job);
                    next_episode = ep + 1;
                }
            }
            EventKind::TrainDone { episode, test_acc } => {
                let job = pending
                    .pop_front()
                    .filter(|j| j.episode == *episode)
                    .ok_or_else(|| unexpected(event, "no matching training job"))?;
                let trained = crate::preference::run_job_sync(&model, &job)?;
                if trained.last_test_acc() != *test_acc {
                    return Err(unexpected(event, "test accuracy differs"));
                }
                model = Arc::new(trained);
                engine.apply(EngineCommand::SetModel(Arc::clone(&model)))?;
            }
            EventKind::Publish { .. } | EventKind::Save { .. } => unreachable!(),
        }
        ledger.observe(|| engine.snapshot(), engine.generation());
    }
    advance(&mut engine, &mut ledger, until)?;
    if let Some((generation, digest)) = ledger.first_unmatched() {
        return Err(SessionError::ReplayDiverged(format!(
            "published snapshot {digest} at generation {generation} was not reproduced"
        )));
    }
    let (publishes, publishes_verified) = ledger.totals();
    Ok(ReplayOutcome {
        engine,
        design,
        model,
        pending,
        next_episode,
        publishes,
        publishes_verified,
    })
}
