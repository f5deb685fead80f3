//! Session registry and the operations behind each endpoint.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use refgame_core::strategy::run_episode;
use refgame_core::streams::{stream, Purpose};
use refgame_core::world::{generate_scene, SceneGenOptions, HUMAN_EVAL_MAX_OBJECTS, MIN_OBJECTS};
use refgame_core::{
    Answer, AttributeSchema, Episode, EpisodeSeed, GameConfig, GameEngine, Scene, StrategyKind,
};
use serde::Deserialize;

use crate::error::{ApiError, SetupError};
use crate::records::{
    export_csv, AnnotationRecord, LogRecord, OracleGameRecord, RecordLog, ResultsFilter,
};
use crate::session::{GuessOutcome, Mode, Provenance, Session, SessionKind, SessionView};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// `game.master_seed` seeds every session.
    pub game: GameConfig,
    /// Strategy for live games when the request names none.
    pub oracle_strategy: StrategyKind,
    pub idle_timeout: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            game: GameConfig::default(),
            oracle_strategy: StrategyKind::ConfirmIt,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub mode: Mode,
    pub provenance: Option<Provenance>,
    pub scene_id: Option<String>,
    pub annotator_id: Option<String>,
    pub strategy: Option<StrategyKind>,
    /// Overrides the session's episode index, e.g. to replay a simulated game.
    pub episode_index: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GuessRequest {
    pub object_id: String,
    pub annotator_id: Option<String>,
}

type SessionSlot = Arc<Mutex<Session>>;

#[derive(Debug)]
struct Inner {
    config: ServiceConfig,
    schema: AttributeSchema,
    scenes: Vec<Scene>,
    human_dialogues: Vec<Episode>,
    log: RecordLog,
    sessions: Mutex<HashMap<String, SessionSlot>>,
    counter: AtomicU64,
    assigned: Mutex<HashMap<String, BTreeMap<Provenance, usize>>>,
}

/// Cheaply cloneable handle shared by all request handlers.
#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

const ANONYMOUS: &str = "anonymous";

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    /// `scenes` is the pool sessions draw from; `human_dialogues` must only
    /// reference scenes in it.
    pub fn new(
        config: ServiceConfig,
        schema: AttributeSchema,
        scenes: Vec<Scene>,
        human_dialogues: Vec<Episode>,
        log: RecordLog,
    ) -> Result<Self, SetupError> {
        config.game.validate()?;
        if let Some(d) = human_dialogues
            .iter()
            .find(|d| !scenes.iter().any(|s| s.id == d.scene_id))
        {
            return Err(SetupError::OrphanDialogue(d.scene_id.clone()));
        }
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                schema,
                scenes,
                human_dialogues,
                log,
                sessions: Mutex::new(HashMap::new()),
                counter: AtomicU64::new(0),
                assigned: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn log(&self) -> &RecordLog {
        &self.inner.log
    }

    pub fn session_count(&self) -> usize {
        lock(&self.inner.sessions).len()
    }

    fn seed(&self) -> u64 {
        self.inner.config.game.master_seed
    }

    fn scene_by_id(&self, id: &str) -> Result<&Scene, ApiError> {
        self.inner
            .scenes
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| ApiError::bad_request(format!("unknown scene {id:?}")))
    }

    /// A pooled scene small enough for human play, or a freshly generated one.
    fn sample_scene(&self, n: u64) -> Result<Scene, ApiError> {
        let mut rng = stream(self.seed(), &[Purpose::Service as u64, n]);
        let eligible: Vec<&Scene> = self
            .inner
            .scenes
            .iter()
            .filter(|s| s.objects.len() <= HUMAN_EVAL_MAX_OBJECTS)
            .collect();
        if !eligible.is_empty() {
            return Ok(eligible[rng.gen_range(0..eligible.len())].clone());
        }
        let n_objects = rng.gen_range(MIN_OBJECTS..=HUMAN_EVAL_MAX_OBJECTS);
        generate_scene(
            &self.inner.schema,
            n_objects,
            &SceneGenOptions::default(),
            format!("live-{n:06}"),
            &mut rng,
        )
        .map_err(|e| ApiError::internal(e.to_string()))
    }

    fn available_provenances(&self) -> Vec<Provenance> {
        let mut out = vec![Provenance::ConfirmIt, Provenance::PlainBeam];
        if !self.inner.human_dialogues.is_empty() {
            out.push(Provenance::HumanOrigin);
        }
        out
    }

    /// The least-served provenance for this annotator, earliest on ties.
    fn balanced_provenance(&self, annotator: &str) -> Provenance {
        let assigned = lock(&self.inner.assigned);
        let counts = assigned.get(annotator);
        self.available_provenances()
            .into_iter()
            .min_by_key(|p| counts.and_then(|c| c.get(p)).copied().unwrap_or(0))
            .expect("at least two provenances")
    }

    fn note_assignment(&self, annotator: &str, p: Provenance) {
        if p != Provenance::Practice {
            *lock(&self.inner.assigned)
                .entry(annotator.to_string())
                .or_default()
                .entry(p)
                .or_default() += 1;
        }
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionView, ApiError> {
        let n = self.inner.counter.fetch_add(1, Ordering::Relaxed);
        let id = format!("sess-{n:06}");
        let (scene, kind) = match req.mode {
            Mode::HumanOracle => self.new_oracle(&req, n)?,
            Mode::HumanGuesser => self.new_guesser(&req, n)?,
        };
        let mut session = Session {
            id: id.clone(),
            scene,
            kind,
            last_active: Instant::now(),
        };
        let view = session.view();
        lock(&self.inner.sessions).insert(id, Arc::new(Mutex::new(session)));
        Ok(view)
    }

    fn new_oracle(&self, req: &CreateSession, n: u64) -> Result<(Scene, SessionKind), ApiError> {
        if req.provenance.is_some() {
            return Err(ApiError::bad_request("provenance applies to human-guesser sessions only"));
        }
        let scene = match &req.scene_id {
            Some(id) => self.scene_by_id(id)?.clone(),
            None => self.sample_scene(n)?,
        };
        let strategy = req.strategy.unwrap_or(self.inner.config.oracle_strategy);
        let seed = EpisodeSeed::new(self.seed(), req.episode_index.unwrap_or(n));
        let mut engine = GameEngine::<f64>::new(
            scene.clone(),
            &self.inner.schema,
            strategy,
            &self.inner.config.game,
            seed,
        )
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
        if !engine.is_finished() {
            engine
                .current_question()
                .map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok((scene, SessionKind::Oracle { engine: Box::new(engine) }))
    }

    fn new_guesser(&self, req: &CreateSession, n: u64) -> Result<(Scene, SessionKind), ApiError> {
        if req.strategy.is_some() {
            return Err(ApiError::bad_request("strategy applies to human-oracle sessions only"));
        }
        let annotator = req.annotator_id.as_deref().unwrap_or(ANONYMOUS);
        let provenance = match req.provenance {
            Some(p) => p,
            None => self.balanced_provenance(annotator),
        };
        let (scene, dialogue) = match provenance.strategy() {
            Some(strategy) => {
                let scene = match &req.scene_id {
                    Some(id) => self.scene_by_id(id)?.clone(),
                    None => self.sample_scene(n)?,
                };
                let seed = EpisodeSeed::new(self.seed(), req.episode_index.unwrap_or(n));
                let dialogue =
                    run_episode(&scene, &self.inner.schema, strategy, &self.inner.config.game, seed)
                        .map_err(|f| ApiError::internal(f.message))?;
                (scene, dialogue)
            }
            None => {
                let dialogues = &self.inner.human_dialogues;
                let dialogue = match &req.scene_id {
                    Some(id) => dialogues.iter().find(|d| &d.scene_id == id).ok_or_else(|| {
                        ApiError::bad_request(format!("no human-origin dialogue for scene {id:?}"))
                    })?,
                    None if dialogues.is_empty() => {
                        return Err(ApiError::bad_request("no human-origin dialogues are loaded"))
                    }
                    None => &dialogues[(n % dialogues.len() as u64) as usize],
                };
                let scene = self.scene_by_id(&dialogue.scene_id)?.clone();
                (scene, dialogue.clone())
            }
        };
        self.note_assignment(annotator, provenance);
        Ok((
            scene,
            SessionKind::Guesser {
                dialogue,
                provenance,
                annotator_id: annotator.to_string(),
                outcome: None,
            },
        ))
    }

    fn slot(&self, id: &str) -> Result<SessionSlot, ApiError> {
        lock(&self.inner.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
    }

    pub fn get_session(&self, id: &str) -> Result<SessionView, ApiError> {
        let slot = self.slot(id)?;
        let mut session = lock(&slot);
        session.last_active = Instant::now();
        Ok(session.view())
    }

    pub fn submit_answer(&self, id: &str, answer: Answer) -> Result<SessionView, ApiError> {
        let slot = self.slot(id)?;
        let mut session = lock(&slot);
        session.last_active = Instant::now();
        let session_id = session.id.clone();
        let SessionKind::Oracle { engine } = &mut session.kind else {
            return Err(ApiError::conflict("wrong_mode", "answers go to human-oracle sessions"));
        };
        if engine.is_finished() {
            return Err(ApiError::conflict("session_finished", "the game is over"));
        }
        engine.answer(answer).map_err(|e| match e {
            refgame_core::Error::Contradiction(_) => ApiError::conflict("contradiction", e.to_string()),
            other => ApiError::internal(other.to_string()),
        })?;
        if engine.is_finished() {
            let record = LogRecord::OracleGame(OracleGameRecord {
                session_id,
                episode: engine.to_episode(),
                timestamp: now_secs(),
            });
            self.inner
                .log
                .append(&record)
                .map_err(|e| ApiError::internal(format!("record log: {e}")))?;
        } else {
            engine
                .current_question()
                .map_err(|e| ApiError::internal(e.to_string()))?;
        }
        Ok(session.view())
    }

    pub fn submit_guess(&self, id: &str, req: GuessRequest) -> Result<GuessOutcome, ApiError> {
        let slot = self.slot(id)?;
        let mut session = lock(&slot);
        session.last_active = Instant::now();
        let scene_id = session.scene.id.clone();
        let target = session.scene.target.clone().unwrap_or_default();
        let known = session.scene.object(&req.object_id).is_some();
        let session_id = session.id.clone();
        let SessionKind::Guesser {
            provenance,
            annotator_id,
            outcome,
            ..
        } = &mut session.kind
        else {
            return Err(ApiError::conflict("wrong_mode", "guesses go to human-guesser sessions"));
        };
        if outcome.is_some() {
            return Err(ApiError::conflict("session_finished", "a guess was already submitted"));
        }
        if !known {
            return Err(ApiError::bad_request(format!(
                "object {:?} is not in the scene",
                req.object_id
            )));
        }
        let result = GuessOutcome {
            correct: req.object_id == target,
            object_id: req.object_id,
        };
        let record = AnnotationRecord {
            session_id,
            annotator_id: req.annotator_id.unwrap_or_else(|| annotator_id.clone()),
            scene_id,
            provenance: *provenance,
            object_id: result.object_id.clone(),
            correct: result.correct,
            timestamp: now_secs(),
        };
        self.inner
            .log
            .append(&LogRecord::Annotation(record))
            .map_err(|e| ApiError::internal(format!("record log: {e}")))?;
        *outcome = Some(result.clone());
        Ok(result)
    }

    pub fn export(&self, filter: &ResultsFilter) -> Result<String, ApiError> {
        let records = self
            .inner
            .log
            .annotations()
            .map_err(|e| ApiError::internal(format!("record log: {e}")))?;
        Ok(export_csv(&records, filter))
    }

    /// Drops sessions idle for longer than the configured timeout. Finished
    /// sessions are already on the log. Returns how many were dropped.
    pub fn expire_idle(&self, now: Instant) -> usize {
        let timeout = self.inner.config.idle_timeout;
        let mut sessions = lock(&self.inner.sessions);
        let before = sessions.len();
        sessions.retain(|_, slot| {
            let s = lock(slot);
            now.saturating_duration_since(s.last_active) <= timeout
        });
        before - sessions.len()
    }
}
