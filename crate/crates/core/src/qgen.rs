//! Stochastic question policy.
//!
//! Scores every question in the closed universe from key popularity, a bonus
//! for questions some object satisfies, and a penalty per earlier occurrence,
//! then perturbs the scores with Gumbel noise. The beam is the top-B questions
//! under the perturbed scores. Repeats and questions about absent values stay
//! possible on purpose.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guesser::round_to;
use crate::qa::{evaluate_truth, question_universe, Answer, Question};
use crate::world::{AttributeSchema, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    pub key_weights: BTreeMap<String, f64>,
    pub w_presence: f64,
    pub w_repeat: f64,
    pub tau: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            key_weights: BTreeMap::from([
                ("category".to_string(), 2.0),
                ("color".to_string(), 1.8),
                ("size".to_string(), 1.2),
                ("side".to_string(), 1.4),
                ("row".to_string(), 0.6),
            ]),
            w_presence: 2.75,
            w_repeat: 0.5,
            tau: 1.0,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        let finite = self.key_weights.values().all(|w| w.is_finite())
            && self.w_presence.is_finite()
            && self.w_repeat.is_finite()
            && self.tau.is_finite();
        if !finite {
            return Err(Error::Parameter("policy weights must be finite".into()));
        }
        if self.tau < 0.0 {
            return Err(Error::Parameter(format!("tau {} < 0", self.tau)));
        }
        Ok(())
    }

    pub fn key_weight(&self, key: &str) -> f64 {
        self.key_weights.get(key).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredQuestion {
    pub question: Question,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct ScoredWire {
    q: Question,
    score: f64,
}

impl Serialize for ScoredQuestion {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ScoredWire {
            q: self.question.clone(),
            score: round_to(self.score, 3),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ScoredQuestion {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = ScoredWire::deserialize(deserializer)?;
        Ok(ScoredQuestion {
            question: wire.q,
            score: wire.score,
        })
    }
}

/// One Gumbel(0, tau) draw per universe entry, in universe order.
pub fn gumbel_noise(len: usize, tau: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            if tau == 0.0 {
                0.0
            } else {
                -tau * (-u.ln()).ln()
            }
        })
        .collect()
}

pub fn is_present(q: &Question, scene: &Scene, schema: &AttributeSchema) -> bool {
    scene
        .objects
        .iter()
        .any(|o| evaluate_truth(q, o, schema) == Answer::Yes)
}

/// Deterministic part of the score plus a pre-drawn noise term.
pub fn score_question(
    q: &Question,
    history: &[(Question, Answer)],
    scene: &Scene,
    schema: &AttributeSchema,
    params: &PolicyParams,
    noise: f64,
) -> f64 {
    let presence = if is_present(q, scene, schema) { 1.0 } else { 0.0 };
    let repeats = history.iter().filter(|(h, _)| h == q).count() as f64;
    params.key_weight(&q.key) + params.w_presence * presence - params.w_repeat * repeats + noise
}

/// The question generator: a fixed universe and a scoring policy.
#[derive(Debug, Clone)]
pub struct QuestionGenerator {
    universe: Vec<Question>,
    params: PolicyParams,
}

impl QuestionGenerator {
    pub fn new(schema: &AttributeSchema, params: PolicyParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            universe: question_universe(schema),
            params,
        })
    }

    pub fn universe(&self) -> &[Question] {
        &self.universe
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    /// The `beam_size` best distinct questions, best first; ties keep universe order.
    /// Draws one noise value per universe question from `rng`.
    pub fn propose_beam(
        &self,
        history: &[(Question, Answer)],
        scene: &Scene,
        schema: &AttributeSchema,
        beam_size: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<ScoredQuestion>> {
        if beam_size == 0 {
            return Err(Error::Parameter("beam size must be at least 1".into()));
        }
        if beam_size > self.universe.len() {
            return Err(Error::BeamSize {
                beam: beam_size,
                universe: self.universe.len(),
            });
        }
        let noise = gumbel_noise(self.universe.len(), self.params.tau, rng);
        let mut scored: Vec<ScoredQuestion> = self
            .universe
            .iter()
            .zip(noise)
            .map(|(q, n)| ScoredQuestion {
                question: q.clone(),
                score: score_question(q, history, scene, schema, &self.params, n),
            })
            .collect();
        // stable sort keeps universe order among equal scores
        scored.sort_by(|a, b| b.score.total_cmp(&a.score));
        scored.truncate(beam_size);
        Ok(scored)
    }
}
