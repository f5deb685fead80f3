use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use refgame_core::episode::{load_episodes, save_episodes};
use refgame_core::metrics::{build_pair_corpus, reports_by_strategy, SceneIndex};
use refgame_core::report::report_table;
use refgame_core::strategy::{run_batch, BatchOutcome};
use refgame_core::trace::render_trace;
use refgame_core::world::{generate_scene_set, load_scenes, save_scenes, SceneGenOptions};
use refgame_core::{AttributeSchema, Episode, PairCorpus, Scene, StrategyKind};
use refgame_service::{AppState, RecordLog, ServiceConfig};

use crate::config::ExperimentConfig;
use crate::failure::Failure;

/// Attaches the file name to core errors.
fn at(path: &Path) -> impl Fn(refgame_core::Error) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Io(m) => Failure::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn gen_scenes(cfg: &ExperimentConfig, out: &Path) -> Result<String, Failure> {
    let schema = AttributeSchema::standard();
    let options = SceneGenOptions {
        p_overlap: cfg.p_overlap,
    };
    let scenes = generate_scene_set(
        &schema,
        cfg.n_scenes,
        cfg.min_objects..=cfg.max_objects,
        &options,
        cfg.seed,
    )?;
    save_scenes(&scenes, out).map_err(at(out))?;
    Ok(format!("wrote {} scenes to {}", scenes.len(), out.display()))
}

fn load_scene_file(path: &Path, schema: &AttributeSchema) -> Result<Vec<Scene>, Failure> {
    load_scenes(path, schema).map_err(at(path))
}

fn load_episode_file(path: &Path) -> Result<Vec<Episode>, Failure> {
    load_episodes(path).map_err(at(path))
}

pub fn run(cfg: &ExperimentConfig, scenes_path: &Path, out: &Path) -> Result<String, Failure> {
    let schema = AttributeSchema::standard();
    let scenes = load_scene_file(scenes_path, &schema)?;
    if scenes.is_empty() {
        return Err(Failure::Data(format!("{} holds no scenes", scenes_path.display())));
    }
    let BatchOutcome { episodes, failures } = run_batch(&scenes, &schema, &cfg.strategies, &cfg.game());
    save_episodes(&episodes, out).map_err(at(out))?;

    let mut summary = Vec::new();
    for s in &cfg.strategies {
        let eps: Vec<&Episode> = episodes.iter().filter(|e| e.strategy == *s).collect();
        let hits = eps.iter().filter(|e| e.success).count();
        let acc = if eps.is_empty() { 0.0 } else { 100.0 * hits as f64 / eps.len() as f64 };
        summary.push(format!("{s}: accuracy {acc:.2}% over {} episodes", eps.len()));
    }
    let summary = summary.join("\n");

    if !failures.is_empty() {
        let first = &failures[0];
        return Err(Failure::Data(format!(
            "{summary}\n{} episodes failed; first: scene {} {} turn {}: {}",
            failures.len(),
            first.scene_id,
            first.strategy,
            first.turn,
            first.message
        )));
    }
    // what was written must read back and satisfy the trace invariants
    let back = load_episode_file(out)?;
    if back.len() != episodes.len() {
        return Err(Failure::Data(format!("{} did not read back whole", out.display())));
    }
    for ep in &back {
        if let Some(problem) = ep.check().into_iter().next() {
            return Err(Failure::Data(format!(
                "episode {} {}: {problem}",
                ep.scene_id, ep.strategy
            )));
        }
    }
    Ok(summary)
}

fn check_scene_ids(episodes: &[Episode], scenes: &[Scene]) -> Result<(), Failure> {
    let known: HashSet<&str> = scenes.iter().map(|s| s.id.as_str()).collect();
    match episodes.iter().find(|e| !known.contains(e.scene_id.as_str())) {
        Some(e) => Err(Failure::Data(format!(
            "episode for scene {} ({}) has no matching scene",
            e.scene_id, e.strategy
        ))),
        None => Ok(()),
    }
}

/// Writes `<prefix>.csv` and `<prefix>.txt` and returns the text table.
pub fn metrics(
    episodes_path: &Path,
    scenes_path: &Path,
    corpus_path: Option<&Path>,
    prefix: &Path,
) -> Result<String, Failure> {
    let schema = AttributeSchema::standard();
    let scenes = load_scene_file(scenes_path, &schema)?;
    let episodes = load_episode_file(episodes_path)?;
    if episodes.is_empty() {
        return Err(Failure::Data(format!("{} holds no episodes", episodes_path.display())));
    }
    check_scene_ids(&episodes, &scenes)?;
    let corpus = corpus_path
        .map(|p| PairCorpus::load(p).map_err(at(p)))
        .transpose()?;
    let index = SceneIndex::new(&scenes);
    let reports = reports_by_strategy(&episodes, &index, &schema, corpus.as_ref())?;
    let labelled: Vec<(&str, _)> = reports.into_iter().map(|(s, r)| (s.name(), r)).collect();
    let table = report_table(&labelled);
    let text = table.to_text();
    let csv_path = with_suffix(prefix, "csv");
    let txt_path = with_suffix(prefix, "txt");
    std::fs::write(&csv_path, table.to_csv()).map_err(|e| Failure::Io(format!("{}: {e}", csv_path.display())))?;
    std::fs::write(&txt_path, &text).map_err(|e| Failure::Io(format!("{}: {e}", txt_path.display())))?;
    Ok(text)
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub enum CorpusSource<'a> {
    /// Consecutive pairs of an existing run, optionally one strategy only.
    Episodes(&'a Path, Option<StrategyKind>),
    /// A fresh reference run of the given strategies over these scenes.
    Scenes(&'a Path),
}

pub fn corpus(cfg: &ExperimentConfig, source: CorpusSource<'_>, out: &Path) -> Result<String, Failure> {
    let episodes = match source {
        CorpusSource::Episodes(path, strategy) => {
            let mut eps = load_episode_file(path)?;
            if let Some(s) = strategy {
                eps.retain(|e| e.strategy == s);
            }
            eps
        }
        CorpusSource::Scenes(path) => {
            let schema = AttributeSchema::standard();
            let scenes = load_scene_file(path, &schema)?;
            let outcome = run_batch(&scenes, &schema, &cfg.strategies, &cfg.game());
            if let Some(f) = outcome.failures.first() {
                return Err(Failure::Data(format!("reference run failed on scene {}: {}", f.scene_id, f.message)));
            }
            outcome.episodes
        }
    };
    let corpus = build_pair_corpus(&episodes);
    corpus.save(out).map_err(at(out))?;
    Ok(format!(
        "wrote {} question pairs from {} episodes to {}",
        corpus.len(),
        episodes.len(),
        out.display()
    ))
}

pub fn trace(
    episodes_path: &Path,
    scene: &str,
    strategy: StrategyKind,
    scenes_path: Option<&Path>,
) -> Result<String, Failure> {
    let episodes = load_episode_file(episodes_path)?;
    let ep = episodes
        .iter()
        .find(|e| e.scene_id == scene && e.strategy == strategy)
        .ok_or_else(|| Failure::Data(format!("no {strategy} episode for scene {scene}")))?;
    let scenes = match scenes_path {
        Some(p) => load_scene_file(p, &AttributeSchema::standard())?,
        None => Vec::new(),
    };
    Ok(render_trace(ep, scenes.iter().find(|s| s.id == scene)))
}

pub struct ServeOptions {
    pub addr: SocketAddr,
    pub scenes: Option<PathBuf>,
    pub human_dialogues: Option<PathBuf>,
    pub records: PathBuf,
    pub static_dir: Option<PathBuf>,
}

pub fn serve(cfg: &ExperimentConfig, opts: ServeOptions) -> Result<String, Failure> {
    let schema = AttributeSchema::standard();
    let scenes = match &opts.scenes {
        Some(p) => load_scene_file(p, &schema)?,
        None => Vec::new(),
    };
    let dialogues = match &opts.human_dialogues {
        Some(p) => load_episode_file(p)?,
        None => Vec::new(),
    };
    let log = RecordLog::open(&opts.records)
        .map_err(|e| Failure::Io(format!("{}: {e}", opts.records.display())))?;
    let config = ServiceConfig {
        game: cfg.game(),
        ..ServiceConfig::default()
    };
    let state = AppState::new(config, schema, scenes, dialogues, log).map_err(|e| match e {
        refgame_service::SetupError::Io(e) => Failure::Io(e.to_string()),
        other => Failure::Data(other.to_string()),
    })?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(refgame_service::serve(state, opts.addr, opts.static_dir.as_deref()))?;
    Ok(String::new())
}
