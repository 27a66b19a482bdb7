//! A running session and the host that routes protocol messages to it.

use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Receiver};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::json;

use super::protocol::{Envelope, Inbound, ModelStatus, Outbound, Request, StartPayload};
use super::{
    elite_model_stats, initial_model, panes, training_job, Design, DesignState, EventKind, EventLog, SessionDocument,
    SessionError, SESSION_VERSION,
};
use crate::config::Config;
use crate::engine::{CommandOutcome, EliteSnapshot, Engine, EngineCommand, EngineHandle, PublishPolicy};
use crate::level::format::RoomDoc;
use crate::level::{Room, RoomEdit};
use crate::preference::{PreferenceModel, TrainingOutcome, TrainingQueue};

/// One design session: an engine loop, a training queue and the event log.
/// The owner of this value is the session's protocol handler.
pub struct Session {
    id: String,
    seed: u64,
    config: Config,
    initial: Design,
    design: Design,
    engine: EngineHandle,
    snapshots: Receiver<Arc<EliteSnapshot>>,
    latest: Arc<EliteSnapshot>,
    last_digest: Option<String>,
    trainer: TrainingQueue,
    model: Arc<PreferenceModel>,
    log: EventLog,
    next_episode: u64,
    clock: Instant,
    clock_offset_ms: u64,
}

fn publish_policy(config: &Config) -> PublishPolicy {
    PublishPolicy {
        every_generations: config.session.publish_every_generations,
        every: Duration::from_millis(config.session.publish_every_ms),
    }
}

impl Session {
    pub fn start(id: impl Into<String>, config: Config, seed: u64, design: Design) -> Result<Session, SessionError> {
        config.validate()?;
        let room = design.active_room().clone();
        let model = Arc::new(initial_model(room.grid().len(), &config.training, seed));
        let engine = Engine::new(config.engine.clone(), Arc::clone(&model), room, seed)?;
        Ok(Session::assemble(
            id.into(),
            config,
            seed,
            design.clone(),
            design,
            engine,
            model,
            EventLog::default(),
            1,
            0,
        ))
    }

    /// Rebuilds a saved session by replaying its log, then keeps it running.
    pub fn resume(doc: &SessionDocument) -> Result<Session, SessionError> {
        doc.config.validate()?;
        let outcome = doc.replay()?;
        let offset = doc.events.events().last().map_or(0, |e| e.timestamp_ms);
        let mut session = Session::assemble(
            doc.id.clone(),
            doc.config.clone(),
            doc.seed,
            doc.initial.to_design()?,
            outcome.design,
            outcome.engine,
            outcome.model,
            doc.events.clone(),
            outcome.next_episode,
            offset,
        );
        for job in outcome.pending {
            session.trainer.submit(job);
        }
        Ok(session)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        id: String,
        config: Config,
        seed: u64,
        initial: Design,
        design: Design,
        engine: Engine,
        model: Arc<PreferenceModel>,
        log: EventLog,
        next_episode: u64,
        clock_offset_ms: u64,
    ) -> Session {
        let latest = Arc::new(engine.snapshot());
        let (tx, snapshots) = mpsc::channel();
        let engine = EngineHandle::spawn(engine, publish_policy(&config), Some(tx));
        Session {
            id,
            seed,
            initial,
            design,
            engine,
            snapshots,
            last_digest: Some(latest.digest()),
            latest,
            trainer: TrainingQueue::spawn(Arc::clone(&model)),
            model,
            log,
            next_episode,
            clock: Instant::now(),
            clock_offset_ms,
            config,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn events(&self) -> &EventLog {
        &self.log
    }

    pub fn model(&self) -> &Arc<PreferenceModel> {
        &self.model
    }

    pub fn latest_snapshot(&self) -> &Arc<EliteSnapshot> {
        &self.latest
    }

    /// Generations the engine has completed.
    pub fn generation(&self) -> u64 {
        self.engine.generation()
    }

    /// Training episodes scheduled but not yet swapped in.
    pub fn training_in_flight(&self) -> u64 {
        self.trainer.pending()
    }

    fn now_ms(&self) -> u64 {
        self.clock_offset_ms + self.clock.elapsed().as_millis() as u64
    }

    fn record(&mut self, generation: u64, event: EventKind) {
        let now = self.now_ms();
        self.log.append(now, generation, event);
    }

    fn request(&self, command: EngineCommand) -> Result<crate::engine::Applied, SessionError> {
        Ok(self.engine.request(command)?)
    }

    fn room_state(&self, id: &str) -> Outbound {
        let room = self.design.dungeon().room(id).expect("room exists");
        Outbound::RoomState {
            id: id.to_string(),
            room: RoomDoc::from(room),
        }
    }

    fn ack(kind: &str, generation: u64, detail: serde_json::Value) -> Outbound {
        Outbound::Ack {
            of: kind.to_string(),
            generation,
            detail,
        }
    }

    fn edit(&mut self, kind: &str, room: Option<String>, edit: RoomEdit) -> Result<Vec<Outbound>, SessionError> {
        let room_id = room.unwrap_or_else(|| self.design.active_room_id().to_string());
        let (next, retarget) = self.design.edit(&room_id, edit)?;
        let generation = match retarget {
            Some(r) => self.request(EngineCommand::SetTargetRoom(r))?.generation,
            None => self.engine.generation(),
        };
        self.design = next;
        let event = match edit {
            RoomEdit::SetTile { x, y, kind } => EventKind::Edit {
                room: room_id.clone(),
                x,
                y,
                tile: kind,
            },
            RoomEdit::ToggleLock { x, y } => EventKind::Lock {
                room: room_id.clone(),
                x,
                y,
            },
        };
        self.record(generation, event);
        Ok(vec![
            Session::ack(kind, generation, serde_json::Value::Null),
            self.room_state(&room_id),
        ])
    }

    /// Routes one in-session message. Session lifecycle messages
    /// (start/save/load) belong to the [`SessionHost`].
    pub fn handle(&mut self, message: Inbound) -> Result<Vec<Outbound>, SessionError> {
        let kind = message.kind();
        match message {
            Inbound::RoomEdit(p) => self.edit(
                kind,
                p.room,
                RoomEdit::SetTile {
                    x: p.x,
                    y: p.y,
                    kind: p.kind,
                },
            ),
            Inbound::RoomLock(p) => self.edit(kind, p.room, RoomEdit::ToggleLock { x: p.x, y: p.y }),
            Inbound::RoomSelect(room_id) => {
                let (next, room) = self.design.select(&room_id)?;
                let generation = self.request(EngineCommand::SetTargetRoom(room))?.generation;
                self.design = next;
                self.record(generation, EventKind::SelectRoom { room: room_id.clone() });
                Ok(vec![
                    Session::ack(kind, generation, serde_json::Value::Null),
                    self.room_state(&room_id),
                ])
            }
            Inbound::DimsSet(dims) => {
                let generation = self.request(EngineCommand::SetDimensions(dims))?.generation;
                self.record(generation, EventKind::SetDims { dims });
                Ok(vec![Session::ack(kind, generation, serde_json::Value::Null)])
            }
            Inbound::SuggestionApply(cell) => self.apply_suggestion(cell),
            Inbound::SessionStart(_) | Inbound::SessionSave(_) | Inbound::SessionLoad(_) => {
                Err(SessionError::Protocol(super::ProtocolError::Schema {
                    kind: kind.to_string(),
                    message: "handled by the session host".into(),
                }))
            }
        }
    }

    fn apply_suggestion(&mut self, cell: (usize, usize)) -> Result<Vec<Outbound>, SessionError> {
        let applied = self.request(EngineCommand::ApplySuggestion(cell))?;
        let CommandOutcome::Suggestion(suggestion) = applied.outcome else {
            unreachable!("apply always yields a suggestion")
        };
        self.design = self.design.replace_active(suggestion.room.clone());
        let job = training_job(
            &suggestion,
            self.config.engine.rows_cols(),
            &self.config.training,
            self.model.input_len(),
            self.seed,
            self.next_episode,
        )?;
        let episode = job.map(|job| {
            let episode = job.episode;
            self.trainer.submit(job);
            self.next_episode += 1;
            episode
        });
        self.record(applied.generation, EventKind::ApplySuggestion { cell, episode });
        let active = self.design.active_room_id().to_string();
        Ok(vec![
            Session::ack("suggestion/apply", applied.generation, json!({ "episode": episode })),
            self.room_state(&active),
        ])
    }

    fn swap_in(&mut self, outcome: TrainingOutcome) -> Result<Option<Outbound>, SessionError> {
        match outcome.result {
            Ok((model, report)) => {
                let generation = self.request(EngineCommand::SetModel(Arc::clone(&model)))?.generation;
                self.model = model;
                self.record(
                    generation,
                    EventKind::TrainDone {
                        episode: outcome.episode,
                        test_acc: report.test_accuracy,
                    },
                );
                log::info!(
                    "episode {} trained in {:?}: testAcc {:.3}",
                    outcome.episode,
                    outcome.wall_time,
                    report.test_accuracy
                );
                Ok(Some(Outbound::ModelStatus(self.model_status())))
            }
            Err(e) => {
                log::warn!("training episode {} failed: {e}", outcome.episode);
                Ok(None)
            }
        }
    }

    pub fn model_status(&self) -> ModelStatus {
        let (_, mean_w1) = elite_model_stats(&self.latest, &self.model, self.config.engine.blend);
        ModelStatus {
            test_acc: self.model.last_test_acc(),
            episodes: self.model.episodes_trained(),
            mean_w1,
        }
    }

    pub fn panes(&self) -> Outbound {
        Outbound::Published(Box::new(panes(&self.latest, &self.model, self.config.session.top_k)))
    }

    /// Collects finished training episodes and new snapshots. Returns the
    /// messages to push to the client: model status updates and, if the
    /// elites changed, the latest panes.
    pub fn poll(&mut self) -> Result<Vec<Outbound>, SessionError> {
        let mut out = Vec::new();
        while let Some(outcome) = self.trainer.try_next() {
            out.extend(self.swap_in(outcome)?);
        }
        out.extend(self.drain_snapshots());
        Ok(out)
    }

    fn drain_snapshots(&mut self) -> Option<Outbound> {
        let mut changed = false;
        while let Ok(snapshot) = self.snapshots.try_recv() {
            let digest = snapshot.digest();
            if self.last_digest.as_deref() != Some(digest.as_str()) {
                self.record(snapshot.generation, EventKind::Publish { digest: digest.clone() });
                self.last_digest = Some(digest);
                changed = true;
            }
            self.latest = snapshot;
        }
        changed.then(|| self.panes())
    }

    /// Blocks until every scheduled training episode has been swapped in.
    pub fn wait_for_training(&mut self) -> Result<Vec<Outbound>, SessionError> {
        let mut out = Vec::new();
        while let Some(outcome) = self.trainer.next_blocking() {
            out.extend(self.swap_in(outcome)?);
        }
        out.extend(self.drain_snapshots());
        Ok(out)
    }

    /// Blocks until the engine has completed at least `generation` generations.
    pub fn wait_for_generation(&self, generation: u64) {
        while self.engine.generation() < generation {
            std::thread::sleep(Duration::from_millis(1));
        }
    }

    /// Logs a SAVE event and captures the session as a document.
    pub fn document(&mut self, name: &str) -> SessionDocument {
        let generation = self.engine.generation();
        self.record(generation, EventKind::Save { name: name.to_string() });
        SessionDocument {
            version: SESSION_VERSION,
            id: self.id.clone(),
            seed: self.seed,
            config: self.config.clone(),
            initial: DesignState::of(&self.initial),
            current: DesignState::of(&self.design),
            generation,
            events: self.log.clone(),
            model: SessionDocument::encode_model(&self.model),
        }
    }
}

/// Routes protocol messages to the current session and owns its lifecycle.
pub struct SessionHost {
    config: Config,
    session: Option<Session>,
    started: u64,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.len() <= 64 && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionHost {
    pub fn new(config: Config) -> SessionHost {
        SessionHost {
            config,
            session: None,
            started: 0,
        }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn session_mut(&mut self) -> Option<&mut Session> {
        self.session.as_mut()
    }

    pub fn session_path(&self, name: &str) -> Result<PathBuf, SessionError> {
        if !valid_name(name) {
            return Err(SessionError::InvalidName(name.to_string()));
        }
        Ok(self.config.session.session_dir.join(format!("{name}.json")))
    }

    fn greeting(session: &Session) -> Vec<Outbound> {
        let active = session.design().active_room_id().to_string();
        vec![
            Outbound::SessionStarted {
                id: session.id().to_string(),
                seed: session.seed(),
                active_room: active.clone(),
            },
            session.room_state(&active),
            session.panes(),
            Outbound::ModelStatus(session.model_status()),
        ]
    }

    pub fn start(&mut self, payload: StartPayload) -> Result<Vec<Outbound>, SessionError> {
        let seed = payload.seed.unwrap_or_else(rand::random);
        let design = match payload.dungeon {
            Some(doc) => {
                let dungeon = doc.to_dungeon()?;
                let active = match payload.active_room {
                    Some(a) => a,
                    None => dungeon
                        .rooms()
                        .keys()
                        .next()
                        .cloned()
                        .ok_or_else(|| SessionError::UnknownRoom(String::new()))?,
                };
                Design::new(dungeon, active)?
            }
            None => Design::single(Room::default_room()),
        };
        self.started += 1;
        let id = format!("session-{}-{seed:x}", self.started);
        self.session = None;
        let session = Session::start(id, self.config.clone(), seed, design)?;
        let out = SessionHost::greeting(&session);
        self.session = Some(session);
        Ok(out)
    }

    /// Saves the current session under `name` (default: its id) in the session directory.
    pub fn save(&mut self, name: Option<String>) -> Result<(PathBuf, u64), SessionError> {
        let session = self.session.as_mut().ok_or(SessionError::NoSession)?;
        let name = name.unwrap_or_else(|| session.id().to_string());
        if !valid_name(&name) {
            return Err(SessionError::InvalidName(name));
        }
        let path = self.config.session.session_dir.join(format!("{name}.json"));
        let doc = session.document(&name);
        doc.save(&path)?;
        Ok((path, doc.generation))
    }

    pub fn load(&mut self, name: &str) -> Result<Vec<Outbound>, SessionError> {
        let path = self.session_path(name)?;
        self.load_path(&path)
    }

    pub fn load_path(&mut self, path: &Path) -> Result<Vec<Outbound>, SessionError> {
        let doc = SessionDocument::load(path)?;
        let session = Session::resume(&doc)?;
        let out = SessionHost::greeting(&session);
        self.session = Some(session);
        Ok(out)
    }

    fn dispatch(&mut self, message: Inbound) -> Result<Vec<Outbound>, SessionError> {
        match message {
            Inbound::SessionStart(p) => self.start(p),
            Inbound::SessionSave(name) => {
                let (path, generation) = self.save(name)?;
                Ok(vec![Outbound::Ack {
                    of: "session/save".into(),
                    generation,
                    detail: json!({ "path": path.display().to_string() }),
                }])
            }
            Inbound::SessionLoad(name) => self.load(&name),
            other => self.session.as_mut().ok_or(SessionError::NoSession)?.handle(other),
        }
    }

    /// Handles one request; every reply carries the request's `seq`.
    pub fn handle(&mut self, request: Request) -> Vec<Envelope> {
        let seq = request.seq;
        let out = self.dispatch(request.message).unwrap_or_else(|e| {
            vec![Outbound::Error {
                code: e.code().into(),
                message: e.to_string(),
            }]
        });
        out.iter().map(|m| m.to_envelope(seq)).collect()
    }

    /// Handles one raw text frame.
    pub fn handle_text(&mut self, text: &str) -> Vec<Envelope> {
        match super::protocol::parse_request(text) {
            Ok(request) => self.handle(request),
            Err((seq, e)) => vec![Outbound::from(&e).to_envelope(seq)],
        }
    }

    /// Unsolicited messages produced since the last poll.
    pub fn poll(&mut self) -> Vec<Envelope> {
        let Some(session) = self.session.as_mut() else {
            return Vec::new();
        };
        match session.poll() {
            Ok(out) => out.iter().map(|m| m.to_envelope(None)).collect(),
            Err(e) => vec![Outbound::Error {
                code: e.code().into(),
                message: e.to_string(),
            }
            .to_envelope(None)],
        }
    }
}
