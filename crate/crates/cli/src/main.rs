use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use roomcraft_cli::commands::{self, RunArgs};

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Synthetic-designer experiments, session replay and the session server"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment with a scripted designer and write its artifacts.
    Run {
        /// max_dimension:<dim>, pattern_seeker, random or drifting:<dim>:<dim>:<episode>
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 10)]
        episodes: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Record measured wall times in report.csv (makes it non-reproducible).
        #[arg(long)]
        wall_clock: bool,
    },
    /// Replay a session file and verify it reproduces its snapshots and model.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Serve the WebSocket protocol and HTTP save/load endpoints.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `session.listen`.
        #[arg(long)]
        listen: Option<String>,
        /// Overrides `session.session_dir`.
        #[arg(long)]
        session_dir: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            scenario,
            episodes,
            seed,
            out,
            config,
            wall_clock,
        } => {
            let report = commands::run(&RunArgs {
                scenario,
                episodes,
                seed,
                out: out.clone(),
                config,
                wall_clock,
            })?;
            if let Some(last) = report.rows.last() {
                println!(
                    "{} episodes, final testAcc {:.3}, meanW1 {:.3}",
                    report.rows.len(),
                    last.test_acc,
                    last.mean_w1
                );
            }
            println!("digest {}", report.digest);
            println!("artifacts in {}", out.display());
        }
        Command::Replay { log } => {
            let s = commands::replay(&log)?;
            println!("events            {}", s.events);
            println!("generation        {}", s.generation);
            println!("publishes         {}/{} reproduced", s.publishes_verified, s.publishes);
            println!("episodes trained  {} (testAcc {:.3})", s.episodes, s.test_acc);
            println!("design digest     {}", s.design_digest);
        }
        Command::Serve {
            config,
            listen,
            session_dir,
        } => {
            let mut config = commands::load_config(config.as_deref())?;
            if let Some(l) = listen {
                config.session.listen = l;
            }
            if let Some(d) = session_dir {
                config.session.session_dir = d;
            }
            let addr: SocketAddr = config
                .session
                .listen
                .parse()
                .with_context(|| format!("invalid listen address {:?}", config.session.listen))?;
            tokio::runtime::Runtime::new()?.block_on(roomcraft_cli::serve::serve(config, addr))?;
        }
    }
    Ok(())
}
