//! The engine loop: a synchronous [`Engine`] and a threaded [`EngineHandle`]
//! that owns one exclusively, fed through an ordered command queue.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EliteGrid, EliteSnapshot, EngineCommand, EngineConfig, EngineError};
use crate::level::{Room, TileGrid};
use crate::preference::PreferenceModel;

/// The applied elite together with the feasible members that existed when it
/// was selected; the latter become the next training dataset.
#[derive(Debug, Clone)]
pub struct AppliedSuggestion {
    pub cell: (usize, usize),
    pub room: Room,
    pub members: Vec<((usize, usize), TileGrid)>,
}

#[derive(Debug, Clone)]
pub enum CommandOutcome {
    Done,
    Suggestion(AppliedSuggestion),
}

/// Result of one command, stamped with the generation boundary it was applied at.
#[derive(Debug, Clone)]
pub struct Applied {
    pub generation: u64,
    pub outcome: CommandOutcome,
}

/// An engine stepped by its caller. Deterministic given the seed and the
/// generation at which each command is applied.
#[derive(Debug, Clone)]
pub struct Engine {
    grid: EliteGrid,
    rng: ChaCha8Rng,
    paused: bool,
}

impl Engine {
    /// Creates an engine around `target` and seeds its populations.
    pub fn new(
        config: EngineConfig,
        model: Arc<PreferenceModel>,
        target: Room,
        seed: u64,
    ) -> Result<Engine, EngineError> {
        let mut grid = EliteGrid::new(config, model)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        grid.set_target_room(target, &mut rng)?;
        Ok(Engine {
            grid,
            rng,
            paused: false,
        })
    }

    pub fn grid(&self) -> &EliteGrid {
        &self.grid
    }

    pub fn generation(&self) -> u64 {
        self.grid.generation()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn snapshot(&self) -> EliteSnapshot {
        self.grid.publish()
    }

    /// Runs one generation unless paused; returns whether it ran.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        if self.paused {
            return Ok(false);
        }
        self.grid.step_generation(&mut self.rng)?;
        Ok(true)
    }

    /// Steps until the generation counter reaches `generation`, ignoring pause.
    pub fn run_until(&mut self, generation: u64) -> Result<(), EngineError> {
        while self.grid.generation() < generation {
            self.grid.step_generation(&mut self.rng)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, command: EngineCommand) -> Result<Applied, EngineError> {
        let generation = self.grid.generation();
        let outcome = match command {
            EngineCommand::SetDimensions(dims) => {
                self.grid.set_dimensions(dims)?;
                CommandOutcome::Done
            }
            EngineCommand::SetTargetRoom(room) => {
                self.grid.set_target_room(room, &mut self.rng)?;
                CommandOutcome::Done
            }
            EngineCommand::SetLocks(locks) => {
                self.grid.set_locks(locks, &mut self.rng)?;
                CommandOutcome::Done
            }
            EngineCommand::ApplySuggestion(cell) => {
                let members = self
                    .grid
                    .feasible_members()
                    .map(|(idx, ind)| (idx, ind.genotype.clone()))
                    .collect();
                let room = self.grid.apply_suggestion(cell, &mut self.rng)?;
                CommandOutcome::Suggestion(AppliedSuggestion { cell, room, members })
            }
            EngineCommand::SetModel(model) => {
                self.grid.set_model(model);
                CommandOutcome::Done
            }
            EngineCommand::Pause => {
                self.paused = true;
                CommandOutcome::Done
            }
            EngineCommand::Resume => {
                self.paused = false;
                CommandOutcome::Done
            }
        };
        Ok(Applied { generation, outcome })
    }
}

/// When the threaded engine publishes a new snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublishPolicy {
    pub every_generations: u64,
    pub every: Duration,
}

impl Default for PublishPolicy {
    fn default() -> Self {
        PublishPolicy {
            every_generations: 50,
            every: Duration::from_millis(500),
        }
    }
}

type Reply = Sender<Result<Applied, EngineError>>;

enum Message {
    Command(EngineCommand, Option<Reply>),
    Stop,
}

struct Shared {
    latest: RwLock<Arc<EliteSnapshot>>,
    generation: AtomicU64,
}

/// An engine running continuously on its own thread.
pub struct EngineHandle {
    tx: Sender<Message>,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<Engine>>,
}

impl EngineHandle {
    /// Starts the loop. Every published snapshot is also sent to `subscriber`
    /// when one is given.
    pub fn spawn(
        engine: Engine,
        policy: PublishPolicy,
        subscriber: Option<Sender<Arc<EliteSnapshot>>>,
    ) -> EngineHandle {
        let (tx, rx) = mpsc::channel();
        let shared = Arc::new(Shared {
            latest: RwLock::new(Arc::new(engine.snapshot())),
            generation: AtomicU64::new(engine.generation()),
        });
        let worker_shared = Arc::clone(&shared);
        let thread = std::thread::Builder::new()
            .name("roomcraft-engine".into())
            .spawn(move || run_loop(engine, rx, worker_shared, policy, subscriber))
            .expect("spawn engine thread");
        EngineHandle {
            tx,
            shared,
            thread: Some(thread),
        }
    }

    /// Queues a command without waiting for it.
    pub fn send(&self, command: EngineCommand) -> Result<(), EngineError> {
        self.tx
            .send(Message::Command(command, None))
            .map_err(|_| EngineError::Stopped)
    }

    /// Queues a command and waits until it has been applied.
    pub fn request(&self, command: EngineCommand) -> Result<Applied, EngineError> {
        let (reply_tx, reply_rx) = mpsc::channel();
        self.tx
            .send(Message::Command(command, Some(reply_tx)))
            .map_err(|_| EngineError::Stopped)?;
        reply_rx.recv().map_err(|_| EngineError::Stopped)?
    }

    pub fn latest(&self) -> Arc<EliteSnapshot> {
        Arc::clone(&self.shared.latest.read().unwrap())
    }

    /// Generations completed so far.
    pub fn generation(&self) -> u64 {
        self.shared.generation.load(Ordering::Acquire)
    }

    /// Stops the loop and hands back the engine.
    pub fn stop(mut self) -> Engine {
        self.shutdown().expect("engine thread present")
    }

    fn shutdown(&mut self) -> Option<Engine> {
        let _ = self.tx.send(Message::Stop);
        self.thread.take().and_then(|t| t.join().ok())
    }
}

impl Drop for EngineHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn run_loop(
    mut engine: Engine,
    rx: Receiver<Message>,
    shared: Arc<Shared>,
    policy: PublishPolicy,
    subscriber: Option<Sender<Arc<EliteSnapshot>>>,
) -> Engine {
    let mut last_publish = (engine.generation(), Instant::now());
    let publish = |engine: &Engine, last: &mut (u64, Instant)| {
        let snapshot = Arc::new(engine.snapshot());
        *shared.latest.write().unwrap() = Arc::clone(&snapshot);
        if let Some(sub) = &subscriber {
            let _ = sub.send(snapshot);
        }
        *last = (engine.generation(), Instant::now());
    };
    loop {
        let message = if engine.is_paused() {
            match rx.recv() {
                Ok(m) => Some(m),
                Err(_) => return engine,
            }
        } else {
            match rx.try_recv() {
                Ok(m) => Some(m),
                Err(TryRecvError::Empty) => None,
                Err(TryRecvError::Disconnected) => return engine,
            }
        };
        match message {
            Some(Message::Stop) => return engine,
            Some(Message::Command(command, reply)) => {
                let result = engine.apply(command);
                if let Err(e) = &result {
                    log::warn!("engine command rejected: {e}");
                }
                if result.is_ok() {
                    publish(&engine, &mut last_publish);
                }
                if let Some(reply) = reply {
                    let _ = reply.send(result);
                }
            }
            None => {
                if let Err(e) = engine.step() {
                    log::error!("engine step failed, pausing: {e}");
                    engine.paused = true;
                    continue;
                }
                shared.generation.store(engine.generation(), Ordering::Release);
                let due = engine.generation() - last_publish.0 >= policy.every_generations
                    || last_publish.1.elapsed() >= policy.every;
                if due {
                    publish(&engine, &mut last_publish);
                }
            }
        }
    }
}
