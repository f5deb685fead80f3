//! Decoding strategies and the game loop.
//!
//! Each turn the generator proposes a beam, the internal oracle answers every
//! beam question as if the current hypothesis were the target, and the guesser
//! scores the hypothesis under each simulated answer. Confirm-it asks the
//! question with the highest simulated posterior; the baselines ignore it but
//! the diagnostics are logged for every strategy.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{Episode, StrategyKind, Turn};
use crate::error::{Error, Result};
use crate::guesser::{
    hypothesis, init_belief, simulate_update, update_belief, BeliefState, LikelihoodParams,
};
use crate::qa::{answer_external, answer_internal, Answer, NoiseParams, Question};
use crate::qgen::{PolicyParams, QuestionGenerator, ScoredQuestion};
use crate::scalar::Probability;
use crate::streams::{EpisodeSeed, Purpose};
use crate::world::{AttributeSchema, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub beam_size: usize,
    pub max_turns: usize,
    pub noise: NoiseParams,
    pub likelihood: LikelihoodParams<f64>,
    pub policy: PolicyParams,
    pub master_seed: u64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            beam_size: 3,
            max_turns: 5,
            noise: NoiseParams::default(),
            likelihood: LikelihoodParams::default(),
            policy: PolicyParams::default(),
            master_seed: 0,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::Parameter("beam_size must be at least 1".into()));
        }
        if self.max_turns == 0 {
            return Err(Error::Parameter("max_turns must be at least 1".into()));
        }
        self.noise.validate()?;
        LikelihoodParams::new(self.likelihood.eps_g)?;
        self.policy.validate()
    }

    /// Beam width a strategy actually decodes with.
    pub fn effective_beam(&self, strategy: StrategyKind) -> usize {
        match strategy {
            StrategyKind::Greedy => 1,
            _ => self.beam_size,
        }
    }
}

/// Outcome of scoring a beam against the current hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfirmItSelection<S> {
    pub hypothesis: usize,
    pub internal_answers: Vec<Answer>,
    pub simulated_phyp: Vec<S>,
    pub chosen_index: usize,
}

/// Picks the beam question whose internal-oracle answer most increases the
/// probability of the current hypothesis. Lower beam index wins ties.
pub fn select_confirm_it<S: Probability>(
    beam: &[ScoredQuestion],
    belief: &BeliefState<S>,
    scene: &Scene,
    schema: &AttributeSchema,
    noise: &NoiseParams,
    likelihood: &LikelihoodParams<S>,
    rng: &mut impl Rng,
) -> Result<ConfirmItSelection<S>> {
    let h = belief.argmax();
    let hyp = &scene.objects[h];
    let mut internal_answers = Vec::with_capacity(beam.len());
    let mut simulated_phyp = Vec::with_capacity(beam.len());
    for item in beam {
        let a = answer_internal(&item.question, hyp, schema, noise, rng);
        simulated_phyp.push(simulate_update(
            belief,
            &item.question,
            a,
            scene,
            schema,
            likelihood,
        )?);
        internal_answers.push(a);
    }
    let mut chosen_index = 0;
    for (i, p) in simulated_phyp.iter().enumerate().skip(1) {
        if *p > simulated_phyp[chosen_index] {
            chosen_index = i;
        }
    }
    Ok(ConfirmItSelection {
        hypothesis: h,
        internal_answers,
        simulated_phyp,
        chosen_index,
    })
}

pub fn select_plain_beam(_beam: &[ScoredQuestion]) -> usize {
    0
}

pub fn select_random_rerank(beam_len: usize, rng: &mut impl Rng) -> usize {
    rng.gen_range(0..beam_len.max(1))
}

/// The single best question under the generator, i.e. a beam of one.
pub fn select_greedy(
    qgen: &QuestionGenerator,
    history: &[(Question, Answer)],
    scene: &Scene,
    schema: &AttributeSchema,
    rng: &mut impl Rng,
) -> Result<ScoredQuestion> {
    Ok(qgen.propose_beam(history, scene, schema, 1, rng)?.remove(0))
}

/// Where a turn's beam comes from.
pub trait QuestionSource: Send + Sync + fmt::Debug {
    fn universe_len(&self) -> usize;

    #[allow(clippy::too_many_arguments)]
    fn propose_beam(
        &self,
        turn: usize,
        history: &[(Question, Answer)],
        scene: &Scene,
        schema: &AttributeSchema,
        beam_size: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<ScoredQuestion>>;
}

impl QuestionSource for QuestionGenerator {
    fn universe_len(&self) -> usize {
        self.universe().len()
    }

    fn propose_beam(
        &self,
        _turn: usize,
        history: &[(Question, Answer)],
        scene: &Scene,
        schema: &AttributeSchema,
        beam_size: usize,
        mut rng: &mut dyn RngCore,
    ) -> Result<Vec<ScoredQuestion>> {
        QuestionGenerator::propose_beam(self, history, scene, schema, beam_size, &mut rng)
    }
}

/// Fixed beams for the first turns, then the generator. Used to replay hand-worked traces.
#[derive(Debug, Clone)]
pub struct ScriptedBeams {
    pub beams: Vec<Vec<ScoredQuestion>>,
    pub fallback: QuestionGenerator,
}

impl QuestionSource for ScriptedBeams {
    fn universe_len(&self) -> usize {
        self.fallback.universe().len()
    }

    fn propose_beam(
        &self,
        turn: usize,
        history: &[(Question, Answer)],
        scene: &Scene,
        schema: &AttributeSchema,
        beam_size: usize,
        mut rng: &mut dyn RngCore,
    ) -> Result<Vec<ScoredQuestion>> {
        // the generator's draws are consumed either way so later turns line up
        let generated = self
            .fallback
            .propose_beam(history, scene, schema, beam_size, &mut rng)?;
        match self.beams.get(turn) {
            Some(beam) => Ok(beam.iter().take(beam_size).cloned().collect()),
            None => Ok(generated),
        }
    }
}

#[derive(Debug, Clone)]
struct PendingTurn {
    beam: Vec<ScoredQuestion>,
    internal_answers: Vec<Answer>,
    simulated_phyp: Vec<f64>,
    chosen_index: usize,
    hypothesis_before: String,
    gains_tied: bool,
}

/// Incremental game: ask, receive an answer from whoever plays the oracle, repeat.
///
/// `run_episode` drives it with the simulated external oracle; the session
/// service drives it with human answers.
#[derive(Debug, Clone)]
pub struct GameEngine<S: Probability = f64> {
    scene: Scene,
    schema: AttributeSchema,
    source: Arc<dyn QuestionSource>,
    config: GameConfig,
    strategy: StrategyKind,
    seed: EpisodeSeed,
    likelihood: LikelihoodParams<S>,
    belief: BeliefState<S>,
    history: Vec<(Question, Answer)>,
    turns: Vec<Turn>,
    pending: Option<PendingTurn>,
}

impl<S: Probability> GameEngine<S> {
    pub fn new(
        scene: Scene,
        schema: &AttributeSchema,
        strategy: StrategyKind,
        config: &GameConfig,
        seed: EpisodeSeed,
    ) -> Result<Self> {
        let qgen = QuestionGenerator::new(schema, config.policy.clone())?;
        Self::with_source(scene, schema, strategy, config, seed, Arc::new(qgen))
    }

    pub fn with_source(
        scene: Scene,
        schema: &AttributeSchema,
        strategy: StrategyKind,
        config: &GameConfig,
        seed: EpisodeSeed,
        source: Arc<dyn QuestionSource>,
    ) -> Result<Self> {
        config.validate()?;
        scene.target_object()?;
        let beam = config.effective_beam(strategy);
        if beam > source.universe_len() {
            return Err(Error::BeamSize {
                beam,
                universe: source.universe_len(),
            });
        }
        let belief = init_belief(&scene);
        Ok(Self {
            likelihood: config.likelihood.cast(),
            scene,
            schema: schema.clone(),
            source,
            config: config.clone(),
            strategy,
            seed,
            belief,
            history: Vec::new(),
            turns: Vec::new(),
            pending: None,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn strategy(&self) -> StrategyKind {
        self.strategy
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn seed(&self) -> EpisodeSeed {
        self.seed
    }

    pub fn belief(&self) -> &BeliefState<S> {
        &self.belief
    }

    pub fn history(&self) -> &[(Question, Answer)] {
        &self.history
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn turn_index(&self) -> usize {
        self.turns.len()
    }

    pub fn is_finished(&self) -> bool {
        self.turns.len() >= self.config.max_turns
    }

    pub fn current_guess(&self) -> &str {
        hypothesis(&self.belief, &self.scene)
    }

    /// The question for the current turn, computing the beam on first call.
    pub fn current_question(&mut self) -> Result<&Question> {
        if self.is_finished() {
            return Err(Error::GameFinished);
        }
        if self.pending.is_none() {
            self.pending = Some(self.prepare_turn()?);
        }
        let p = self.pending.as_ref().expect("prepared above");
        Ok(&p.beam[p.chosen_index].question)
    }

    fn prepare_turn(&self) -> Result<PendingTurn> {
        let turn = self.turns.len();
        let mut qrng = self.seed.turn_stream(turn, Purpose::QuestionNoise);
        let beam = self.source.propose_beam(
            turn,
            &self.history,
            &self.scene,
            &self.schema,
            self.config.effective_beam(self.strategy),
            &mut qrng,
        )?;
        let mut irng = self.seed.turn_stream(turn, Purpose::InternalOracle);
        let rerank = select_confirm_it(
            &beam,
            &self.belief,
            &self.scene,
            &self.schema,
            &self.config.noise,
            &self.likelihood,
            &mut irng,
        )?;
        let chosen_index = match self.strategy {
            StrategyKind::ConfirmIt => rerank.chosen_index,
            StrategyKind::PlainBeam | StrategyKind::Greedy => select_plain_beam(&beam),
            StrategyKind::RandomReRank => {
                let mut rrng = self.seed.turn_stream(turn, Purpose::ReRank);
                select_random_rerank(beam.len(), &mut rrng)
            }
        };
        let gains_tied = rerank
            .simulated_phyp
            .iter()
            .all(|p| *p == rerank.simulated_phyp[0]);
        Ok(PendingTurn {
            hypothesis_before: self.scene.objects[rerank.hypothesis].id.clone(),
            simulated_phyp: rerank
                .simulated_phyp
                .iter()
                .map(Probability::to_f64_lossy)
                .collect(),
            internal_answers: rerank.internal_answers,
            beam,
            chosen_index,
            gains_tied,
        })
    }

    /// Applies the oracle's answer to the current question and records the turn.
    pub fn answer(&mut self, answer: Answer) -> Result<&Turn> {
        self.current_question()?;
        let pending = self.pending.as_ref().expect("current_question prepared it");
        let q = pending.beam[pending.chosen_index].question.clone();
        let belief = update_belief(
            &self.belief,
            &q,
            answer,
            &self.scene,
            &self.schema,
            &self.likelihood,
        )?;
        let pending = self.pending.take().expect("checked above");
        self.belief = belief;
        self.history.push((q, answer));
        self.turns.push(Turn {
            beam: pending.beam,
            internal_answers: pending.internal_answers,
            simulated_phyp: pending.simulated_phyp,
            chosen_index: pending.chosen_index,
            hypothesis_before: pending.hypothesis_before,
            external_answer: answer,
            belief_after: self.belief.snapshot(),
            hypothesis_after: hypothesis(&self.belief, &self.scene).to_string(),
            gains_tied: pending.gains_tied,
        });
        Ok(self.turns.last().expect("just pushed"))
    }

    /// The simulated external oracle's answer for the current turn.
    pub fn simulated_oracle_answer(&mut self) -> Result<Answer> {
        let q = self.current_question()?.clone();
        let mut rng = self.seed.turn_stream(self.turns.len(), Purpose::ExternalOracle);
        answer_external(&q, &self.scene, &self.schema, &self.config.noise, &mut rng)
    }

    /// The episode record so far. The final guess is the current argmax.
    pub fn to_episode(&self) -> Episode {
        let target_id = self.scene.target.clone().unwrap_or_default();
        let final_guess = self.current_guess().to_string();
        Episode {
            scene_id: self.scene.id.clone(),
            success: final_guess == target_id,
            target_id,
            strategy: self.strategy,
            turns: self.turns.clone(),
            final_guess,
            master_seed: self.seed.master_seed,
            episode_index: self.seed.episode_index,
        }
    }
}

/// Why an episode stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub scene_id: String,
    pub strategy: StrategyKind,
    pub episode_index: u64,
    pub turn: usize,
    pub message: String,
}

/// Plays `max_turns` turns against the simulated external oracle.
pub fn run_episode_with<S: Probability>(
    scene: &Scene,
    schema: &AttributeSchema,
    strategy: StrategyKind,
    config: &GameConfig,
    seed: EpisodeSeed,
) -> Result<Episode, EpisodeFailure> {
    let fail = |turn: usize, e: Error| EpisodeFailure {
        scene_id: scene.id.clone(),
        strategy,
        episode_index: seed.episode_index,
        turn,
        message: e.to_string(),
    };
    let engine =
        GameEngine::<S>::new(scene.clone(), schema, strategy, config, seed).map_err(|e| fail(0, e))?;
    play_out(engine)
}

/// Finishes a game against the simulated external oracle.
pub fn play_out<S: Probability>(mut engine: GameEngine<S>) -> Result<Episode, EpisodeFailure> {
    let fail = |engine: &GameEngine<S>, e: Error| EpisodeFailure {
        scene_id: engine.scene.id.clone(),
        strategy: engine.strategy,
        episode_index: engine.seed.episode_index,
        turn: engine.turn_index(),
        message: e.to_string(),
    };
    while !engine.is_finished() {
        let answer = engine
            .simulated_oracle_answer()
            .map_err(|e| fail(&engine, e))?;
        if let Err(e) = engine.answer(answer) {
            return Err(fail(&engine, e));
        }
    }
    Ok(engine.to_episode())
}

pub fn run_episode(
    scene: &Scene,
    schema: &AttributeSchema,
    strategy: StrategyKind,
    config: &GameConfig,
    seed: EpisodeSeed,
) -> Result<Episode, EpisodeFailure> {
    run_episode_with::<f64>(scene, schema, strategy, config, seed)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    /// Ordered by scene index, then by the order of the requested strategies.
    pub episodes: Vec<Episode>,
    pub failures: Vec<EpisodeFailure>,
}

impl BatchOutcome {
    pub fn for_strategy(&self, strategy: StrategyKind) -> Vec<&Episode> {
        self.episodes
            .iter()
            .filter(|e| e.strategy == strategy)
            .collect()
    }
}

/// Every scene under every strategy. The episode index is the scene index, so
/// all strategies share the generator noise of a scene.
pub fn run_batch(
    scenes: &[Scene],
    schema: &AttributeSchema,
    strategies: &[StrategyKind],
    config: &GameConfig,
) -> BatchOutcome {
    let jobs: Vec<(usize, StrategyKind)> = (0..scenes.len())
        .flat_map(|i| strategies.iter().map(move |s| (i, *s)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(i, strategy)| {
            run_episode(
                &scenes[*i],
                schema,
                *strategy,
                config,
                EpisodeSeed::new(config.master_seed, *i as u64),
            )
        })
        .collect();
    let mut out = BatchOutcome::default();
    for r in results {
        match r {
            Ok(ep) => out.episodes.push(ep),
            Err(f) => out.failures.push(f),
        }
    }
    out
}
