//! `refgame`: generate scenes, run experiments, report metrics, serve sessions.

mod commands;
mod config;
mod failure;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use refgame_core::StrategyKind;

use crate::commands::{CorpusSource, ServeOptions};
use crate::config::ExperimentConfig;
use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "refgame", version, about = "Referential guessing game experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    beam_size: Option<usize>,
    #[arg(long, global = true)]
    turns: Option<usize>,
    /// Repeatable; replaces the configured strategy list.
    #[arg(long = "strategy", global = true, value_parser = parse_strategy)]
    strategies: Vec<StrategyKind>,
    #[arg(long, global = true)]
    scenes: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for batch commands.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded scene file.
    GenScenes {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        min_objects: Option<usize>,
        #[arg(long)]
        max_objects: Option<usize>,
        /// Cap scenes at 6 objects.
        #[arg(long)]
        human_eval: bool,
    },
    /// Play every scene under every strategy.
    Run,
    /// Report metrics per strategy as CSV and aligned text.
    Metrics {
        #[arg(long)]
        episodes: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Build a corpus of consecutive question pairs.
    Corpus {
        /// Take pairs from this run instead of playing the scenes.
        #[arg(long)]
        episodes: Option<PathBuf>,
    },
    /// Print one episode turn by turn.
    Trace {
        #[arg(long)]
        episodes: Option<PathBuf>,
        #[arg(long)]
        scene_id: String,
    },
    /// Start the HTTP session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "records.jsonl")]
        records: PathBuf,
        #[arg(long)]
        human_dialogues: Option<PathBuf>,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    s.parse().map_err(|e: refgame_core::Error| e.to_string())
}

fn resolve(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(b) = common.beam_size {
        cfg.beam_size = b;
    }
    if let Some(t) = common.turns {
        cfg.max_turns = t;
    }
    if !common.strategies.is_empty() {
        cfg.strategies = common.strategies.clone();
    }
    if let Some(p) = &common.scenes {
        cfg.paths.scenes = p.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<String, Failure> {
    let mut cfg = resolve(&cli.common)?;
    let out = cli.common.out.clone();
    if let Command::GenScenes { n, min_objects, max_objects, human_eval } = &cli.command {
        if let Some(n) = n {
            cfg.n_scenes = *n;
        }
        if let Some(m) = min_objects {
            cfg.min_objects = *m;
        }
        if let Some(m) = max_objects {
            cfg.max_objects = *m;
        }
        if *human_eval {
            cfg.human_eval_profile();
        }
    }
    cfg.validate()?;

    let pool = match cli.common.jobs {
        Some(0) => return Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;

    let scenes = cfg.paths.scenes.clone();
    pool.install(|| match cli.command {
        Command::GenScenes { .. } => commands::gen_scenes(&cfg, &out.unwrap_or(scenes)),
        Command::Run => {
            let dest = out.unwrap_or_else(|| cfg.paths.episodes.clone());
            commands::run(&cfg, &scenes, &dest)
        }
        Command::Metrics { episodes, corpus } => commands::metrics(
            &episodes.unwrap_or_else(|| cfg.paths.episodes.clone()),
            &scenes,
            corpus.as_deref(),
            &out.unwrap_or_else(|| cfg.paths.report.clone()),
        ),
        Command::Corpus { episodes } => {
            let dest = out.unwrap_or_else(|| cfg.paths.corpus.clone());
            let only = match cli.common.strategies.as_slice() {
                [s] => Some(*s),
                [] => None,
                _ => return Err(Failure::Usage("corpus takes at most one --strategy".into())),
            };
            let source = match &episodes {
                Some(p) => CorpusSource::Episodes(p, only),
                None => CorpusSource::Scenes(&scenes),
            };
            commands::corpus(&cfg, source, &dest)
        }
        Command::Trace { episodes, scene_id } => {
            let strategy = match cli.common.strategies.as_slice() {
                [s] => *s,
                [] => StrategyKind::ConfirmIt,
                _ => return Err(Failure::Usage("trace takes one --strategy".into())),
            };
            let scenes_flag = cli.common.scenes.as_deref();
            commands::trace(
                &episodes.unwrap_or_else(|| cfg.paths.episodes.clone()),
                &scene_id,
                strategy,
                scenes_flag,
            )
        }
        Command::Serve { addr, records, human_dialogues, static_dir } => {
            tracing_subscriber::fmt().with_target(false).init();
            commands::serve(
                &cfg,
                ServeOptions {
                    addr,
                    scenes: cli.common.scenes.clone(),
                    human_dialogues,
                    records,
                    static_dir,
                },
            )
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(msg) => {
            if !msg.is_empty() {
                println!("{}", msg.trim_end());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("refgame: {f}");
            f.exit_code()
        }
    }
}
