//! Headless experiments: a scripted designer alternates evolution bursts
//! with applied suggestions while the preference model trains alongside.
//!
//! The driver is deterministic. Training runs on the background queue while
//! the engine keeps stepping, but each trained model is swapped in at a fixed
//! generation (`apply + swap_latency`); the driver waits there only if
//! training has not finished yet. Measured wall times never feed back into
//! the run, so `report.csv`, `digest.txt` and `session.json` are
//! reproducible byte for byte.

mod policy;

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use policy::{synthetic_select, Policy, SyntheticDesigner};

use crate::config::{derive_seed, Config, ConfigError};
use crate::engine::{CommandOutcome, Engine, EngineCommand, EngineError};
use crate::level::{Room, RoomEdit, TileKind};
use crate::preference::{PreferenceError, PreferenceModel, TrainingOutcome, TrainingQueue};
use crate::session::{
    elite_model_stats, initial_model, rank_top_preference, streams, training_job, Design, DesignState, EventKind,
    EventLog, SessionDocument, SessionError, SESSION_VERSION,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("the snapshot has no elites to choose from")]
    EmptySnapshot,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One scripted step of the room draft applied before the first episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DraftStep {
    Paint(usize, usize, TileKind),
    Lock(usize, usize),
}

/// Pillars, two treasures, two enemies and a locked treasure on the default room.
pub const DEFAULT_DRAFT: &[DraftStep] = &[
    DraftStep::Paint(3, 2, TileKind::Wall),
    DraftStep::Paint(3, 4, TileKind::Wall),
    DraftStep::Paint(9, 2, TileKind::Wall),
    DraftStep::Paint(9, 4, TileKind::Wall),
    DraftStep::Paint(6, 1, TileKind::Treasure),
    DraftStep::Paint(6, 5, TileKind::Treasure),
    DraftStep::Paint(2, 1, TileKind::Enemy),
    DraftStep::Paint(10, 5, TileKind::Enemy),
    DraftStep::Lock(6, 1),
];

/// Generations evolved between two draft steps.
const DRAFT_STEP_GENERATIONS: u64 = 10;

#[derive(Debug, Clone)]
pub struct Experiment {
    pub policy: Policy,
    pub episodes: u64,
    pub seed: u64,
    pub config: Config,
}

/// One training episode of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode: u64,
    pub test_acc: f64,
    /// Over the elites right after the trained model was swapped in.
    pub mean_confidence: f64,
    pub mean_w1: f64,
    /// 1-based rank of the designer's pick in the preference pane shown when
    /// it was picked; 0 when absent.
    pub favorite_rank: usize,
    /// Generations evolved while the episode was being trained.
    pub generations: u64,
    pub timing: EpisodeTiming,
}

/// Wall-clock measurements; they vary between runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeTiming {
    pub train: Duration,
    /// Burst start to model swap.
    pub episode: Duration,
    /// Generations stepped before the trainer reported back.
    pub generations_until_trained: u64,
}

pub struct ExperimentReport {
    pub experiment: Experiment,
    pub rows: Vec<EpisodeRow>,
    /// Hex SHA-256 over the `generation digest` lines of every published snapshot.
    pub digest: String,
    pub document: SessionDocument,
}

pub const REPORT_HEADER: &str = "episode,testAcc,meanConfidence,meanW1,favoriteRank,generations,wallMs";

impl ExperimentReport {
    pub fn report_csv(&self, wall_clock: bool) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let wall = if wall_clock { r.timing.episode.as_millis() } else { 0 };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.episode, r.test_acc, r.mean_confidence, r.mean_w1, r.favorite_rank, r.generations, wall
            );
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("episode,trainMs,episodeMs,generationsUntilTrained\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{}",
                r.episode,
                r.timing.train.as_secs_f64() * 1e3,
                r.timing.episode.as_secs_f64() * 1e3,
                r.timing.generations_until_trained
            );
        }
        out
    }

    /// Writes report.csv, timing.csv, digest.txt and session.json into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SimError> {
        std::fs::create_dir_all(dir)?;
        let wall_clock = self.experiment.config.sim.wall_clock;
        std::fs::write(dir.join("report.csv"), self.report_csv(wall_clock))?;
        std::fs::write(dir.join("timing.csv"), self.timing_csv())?;
        std::fs::write(dir.join("digest.txt"), format!("{}\n", self.digest))?;
        self.document.save(&dir.join("session.json"))?;
        Ok(())
    }
}

struct InFlight {
    episode: u64,
    favorite_rank: usize,
    apply_generation: u64,
    swap_generation: u64,
    burst_started: Instant,
    outcome: Option<TrainingOutcome>,
    generations_until_trained: u64,
}

struct Driver<'a> {
    config: &'a Config,
    engine: Engine,
    design: Design,
    model: Arc<PreferenceModel>,
    trainer: TrainingQueue,
    in_flight: VecDeque<InFlight>,
    log: EventLog,
    stream: Sha256,
    last_digest: Option<String>,
    rows: Vec<EpisodeRow>,
}

impl Driver<'_> {
    fn publish(&mut self) {
        let snapshot = self.engine.snapshot();
        let digest = snapshot.digest();
        self.stream.update(format!("{} {}\n", snapshot.generation, digest));
        if self.last_digest.as_deref() != Some(digest.as_str()) {
            self.log
                .append(0, snapshot.generation, EventKind::Publish { digest: digest.clone() });
            self.last_digest = Some(digest);
        }
    }

    /// Steps one generation, collecting trainer results and swapping in any
    /// model whose swap generation has been reached.
    fn step(&mut self) -> Result<(), SimError> {
        self.engine.run_until(self.engine.generation() + 1)?;
        let generation = self.engine.generation();
        while let Some(outcome) = self.trainer.try_next() {
            let slot = self
                .in_flight
                .iter_mut()
                .find(|f| f.outcome.is_none())
                .expect("outcome belongs to an in-flight episode");
            slot.generations_until_trained = generation - slot.apply_generation;
            slot.outcome = Some(outcome);
        }
        if generation.is_multiple_of(self.config.sim.publish_every) {
            self.publish();
        }
        while self.in_flight.front().is_some_and(|f| f.swap_generation <= generation) {
            self.swap()?;
        }
        Ok(())
    }

    fn swap(&mut self) -> Result<(), SimError> {
        let mut flight = self.in_flight.pop_front().expect("in-flight episode");
        let outcome = match flight.outcome.take() {
            Some(o) => o,
            None => {
                flight.generations_until_trained = self.engine.generation() - flight.apply_generation;
                self.trainer.next_blocking().expect("trainer holds the pending episode")
            }
        };
        debug_assert_eq!(outcome.episode, flight.episode);
        let (model, report) = outcome.result?;
        let applied = self.engine.apply(EngineCommand::SetModel(Arc::clone(&model)))?;
        self.model = model;
        self.log.append(
            0,
            applied.generation,
            EventKind::TrainDone {
                episode: flight.episode,
                test_acc: report.test_accuracy,
            },
        );
        let (mean_confidence, mean_w1) =
            elite_model_stats(&self.engine.snapshot(), &self.model, self.config.engine.blend);
        self.rows.push(EpisodeRow {
            episode: flight.episode,
            test_acc: report.test_accuracy,
            mean_confidence,
            mean_w1,
            favorite_rank: flight.favorite_rank,
            generations: applied.generation - flight.apply_generation,
            timing: EpisodeTiming {
                train: outcome.wall_time,
                episode: flight.burst_started.elapsed(),
                generations_until_trained: flight.generations_until_trained,
            },
        });
        Ok(())
    }

    fn run_for(&mut self, generations: u64) -> Result<(), SimError> {
        let end = self.engine.generation() + generations;
        while self.engine.generation() < end {
            self.step()?;
        }
        Ok(())
    }

    fn draft(&mut self, steps: &[DraftStep]) -> Result<(), SimError> {
        for step in steps {
            let room_id = self.design.active_room_id().to_string();
            let (edit, event) = match *step {
                DraftStep::Paint(x, y, kind) => (
                    RoomEdit::SetTile { x, y, kind },
                    EventKind::Edit {
                        room: room_id.clone(),
                        x,
                        y,
                        tile: kind,
                    },
                ),
                DraftStep::Lock(x, y) => (
                    RoomEdit::ToggleLock { x, y },
                    EventKind::Lock {
                        room: room_id.clone(),
                        x,
                        y,
                    },
                ),
            };
            let (next, retarget) = self.design.edit(&room_id, edit).map_err(SimError::from)?;
            let room = retarget.expect("draft edits the active room");
            let applied = self.engine.apply(EngineCommand::SetTargetRoom(room))?;
            self.design = next;
            self.log.append(0, applied.generation, event);
            self.run_for(DRAFT_STEP_GENERATIONS)?;
        }
        Ok(())
    }
}

/// Runs one experiment on the default room.
pub fn run_experiment(experiment: &Experiment) -> Result<ExperimentReport, SimError> {
    run_experiment_on(experiment, Room::default_room(), DEFAULT_DRAFT)
}

pub fn run_experiment_on(
    experiment: &Experiment,
    room: Room,
    draft: &[DraftStep],
) -> Result<ExperimentReport, SimError> {
    let config = &experiment.config;
    config.validate()?;
    let seed = experiment.seed;
    let initial = Design::single(room.clone());
    let model = Arc::new(initial_model(room.grid().len(), &config.training, seed));
    let engine = Engine::new(config.engine.clone(), Arc::clone(&model), room, seed)?;
    let mut driver = Driver {
        config,
        engine,
        design: initial.clone(),
        trainer: TrainingQueue::spawn(Arc::clone(&model)),
        model,
        in_flight: VecDeque::new(),
        log: EventLog::default(),
        stream: Sha256::new(),
        last_digest: None,
        rows: Vec::new(),
    };
    driver.publish();
    if config.sim.draft {
        driver.draft(draft)?;
    }
    let mut designer = SyntheticDesigner::new(experiment.policy, derive_seed(seed, streams::POLICY));
    for episode in 1..=experiment.episodes {
        let burst_started = Instant::now();
        driver.run_for(config.sim.burst_generations)?;
        let snapshot = driver.engine.snapshot();
        let target = driver.design.active_room().clone();
        let cell = designer.select(&snapshot, &target, episode, &config.engine.analysis)?;
        let pane = rank_top_preference(&snapshot, &driver.model, config.session.top_k);
        let favorite_rank = pane.iter().position(|r| r.cell == cell).map_or(0, |p| p + 1);

        let applied = driver.engine.apply(EngineCommand::ApplySuggestion(cell))?;
        let CommandOutcome::Suggestion(suggestion) = applied.outcome else {
            unreachable!("apply always yields a suggestion")
        };
        driver.design = driver.design.replace_active(suggestion.room.clone());
        let job = training_job(
            &suggestion,
            config.engine.rows_cols(),
            &config.training,
            driver.model.input_len(),
            seed,
            episode,
        )?;
        let scheduled = job.is_some();
        if let Some(job) = job {
            driver.trainer.submit(job);
            let swap_generation = driver
                .in_flight
                .back()
                .map_or(0, |f| f.swap_generation)
                .max(applied.generation + config.sim.swap_latency);
            driver.in_flight.push_back(InFlight {
                episode,
                favorite_rank,
                apply_generation: applied.generation,
                swap_generation,
                burst_started,
                outcome: None,
                generations_until_trained: 0,
            });
        }
        driver.log.append(
            0,
            applied.generation,
            EventKind::ApplySuggestion {
                cell,
                episode: scheduled.then_some(episode),
            },
        );
        if config.sim.swap_latency == 0 {
            while !driver.in_flight.is_empty() {
                driver.swap()?;
            }
        }
    }
    while !driver.in_flight.is_empty() {
        driver.step()?;
    }
    driver.publish();

    let generation = driver.engine.generation();
    driver.log.append(0, generation, EventKind::Save { name: "sim".into() });
    let document = SessionDocument {
        version: SESSION_VERSION,
        id: format!("sim-{}-{seed}", experiment.policy),
        seed,
        config: config.clone(),
        initial: DesignState::of(&initial),
        current: DesignState::of(&driver.design),
        generation,
        events: driver.log,
        model: SessionDocument::encode_model(&driver.model),
    };
    Ok(ExperimentReport {
        experiment: experiment.clone(),
        rows: driver.rows,
        digest: hex::encode(driver.stream.finalize()),
        document,
    })
}
