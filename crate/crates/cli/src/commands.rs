use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use roomcraft::config::Config;
use roomcraft::session::SessionDocument;
use roomcraft::sim::{run_experiment, Experiment, ExperimentReport, Policy};

pub fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(Config::default()),
    }
}

pub struct RunArgs {
    pub scenario: String,
    pub episodes: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub wall_clock: bool,
}

pub fn run(args: &RunArgs) -> Result<ExperimentReport> {
    let policy: Policy = args.scenario.parse()?;
    let mut config = load_config(args.config.as_deref())?;
    config.sim.wall_clock |= args.wall_clock;
    let experiment = Experiment {
        policy,
        episodes: args.episodes,
        seed: args.seed,
        config,
    };
    let report = run_experiment(&experiment).with_context(|| format!("running {policy} with seed {}", args.seed))?;
    report
        .write(&args.out)
        .with_context(|| format!("writing artifacts to {}", args.out.display()))?;
    Ok(report)
}

pub struct ReplaySummary {
    pub events: usize,
    pub generation: u64,
    pub publishes: usize,
    pub publishes_verified: usize,
    pub episodes: u64,
    pub test_acc: f64,
    pub design_digest: String,
}

/// Replays a saved session (or a run's `session.json`) and checks it
/// reproduces every published snapshot, the final design and the model.
pub fn replay(path: &Path) -> Result<ReplaySummary> {
    let doc = SessionDocument::load(path).with_context(|| format!("loading {}", path.display()))?;
    let outcome = doc.replay().with_context(|| format!("replaying {}", path.display()))?;
    Ok(ReplaySummary {
        events: doc.events.len(),
        generation: outcome.engine.generation(),
        publishes: outcome.publishes,
        publishes_verified: outcome.publishes_verified,
        episodes: outcome.model.episodes_trained(),
        test_acc: outcome.model.last_test_acc(),
        design_digest: outcome.design.digest(),
    })
}
