//! Background training: episodes run serially in FIFO order on a worker
//! thread, each starting from the weights the previous episode produced.

use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{PreferenceDataset, PreferenceError, PreferenceModel, TrainConfig, TrainReport};

#[derive(Debug, Clone)]
pub struct TrainingJob {
    pub episode: u64,
    pub dataset: PreferenceDataset,
    pub config: TrainConfig,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub episode: u64,
    pub result: Result<(Arc<PreferenceModel>, TrainReport), PreferenceError>,
    pub wall_time: Duration,
}

pub struct TrainingQueue {
    jobs: Option<Sender<TrainingJob>>,
    results: Receiver<TrainingOutcome>,
    worker: Option<JoinHandle<()>>,
    submitted: u64,
    received: u64,
}

/// Trains `base` on one job on the calling thread. The worker thread runs
/// exactly this, so replaying a job reproduces its model bit for bit.
pub fn run_job_sync(base: &PreferenceModel, job: &TrainingJob) -> Result<PreferenceModel, PreferenceError> {
    train(base, job).map(|(model, _)| model)
}

fn train(base: &PreferenceModel, job: &TrainingJob) -> Result<(PreferenceModel, TrainReport), PreferenceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
    base.train_episode(&job.dataset, &job.config, &mut rng)
}

pub(crate) fn run_job(base: &PreferenceModel, job: &TrainingJob) -> TrainingOutcome {
    let start = Instant::now();
    let result = train(base, job).map(|(model, report)| (Arc::new(model), report));
    TrainingOutcome {
        episode: job.episode,
        result,
        wall_time: start.elapsed(),
    }
}

impl TrainingQueue {
    pub fn spawn(initial: Arc<PreferenceModel>) -> Self {
        let (job_tx, job_rx) = mpsc::channel::<TrainingJob>();
        let (res_tx, res_rx) = mpsc::channel();
        let worker = thread::Builder::new()
            .name("preference-trainer".into())
            .spawn(move || {
                let mut current = initial;
                for job in job_rx {
                    let outcome = run_job(&current, &job);
                    if let Ok((model, _)) = &outcome.result {
                        current = Arc::clone(model);
                    }
                    if res_tx.send(outcome).is_err() {
                        break;
                    }
                }
            })
            .expect("spawn trainer thread");
        TrainingQueue {
            jobs: Some(job_tx),
            results: res_rx,
            worker: Some(worker),
            submitted: 0,
            received: 0,
        }
    }

    pub fn submit(&mut self, job: TrainingJob) {
        if let Some(tx) = &self.jobs {
            if tx.send(job).is_ok() {
                self.submitted += 1;
            }
        }
    }

    /// Jobs submitted but not yet collected.
    pub fn pending(&self) -> u64 {
        self.submitted - self.received
    }

    pub fn try_next(&mut self) -> Option<TrainingOutcome> {
        match self.results.try_recv() {
            Ok(outcome) => {
                self.received += 1;
                Some(outcome)
            }
            Err(TryRecvError::Empty | TryRecvError::Disconnected) => None,
        }
    }

    pub fn next_blocking(&mut self) -> Option<TrainingOutcome> {
        if self.pending() == 0 {
            return None;
        }
        let outcome = self.results.recv().ok()?;
        self.received += 1;
        Some(outcome)
    }
}

impl Drop for TrainingQueue {
    fn drop(&mut self) {
        self.jobs.take();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}
