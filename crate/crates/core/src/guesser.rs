//! Bayesian guesser over the scene's candidates.
//!
//! The belief is a probability vector in scene order plus a ledger of answered
//! facts. Each fact contributes a likelihood of `1 - eps_g` to candidates whose
//! true answer matches and `eps_g / 2` to the rest. Re-asserting a ledger fact
//! is a no-op; a conflicting answer replaces the old one and the posterior is
//! recomputed from the uniform prior.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qa::{evaluate_truth, Answer, Question};
use crate::scalar::Probability;
use crate::world::{AttributeSchema, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodParams<S> {
    pub eps_g: S,
}

impl<S: Probability> LikelihoodParams<S> {
    pub fn new(eps_g: S) -> Result<Self> {
        if eps_g < S::zero() || eps_g > S::one() {
            return Err(Error::Parameter(format!("eps_g {eps_g:?} outside [0, 1]")));
        }
        Ok(Self { eps_g })
    }

    pub fn cast<T: Probability>(&self) -> LikelihoodParams<T> {
        LikelihoodParams {
            eps_g: T::from_param(self.eps_g.to_f64_lossy()),
        }
    }

    /// L(observed | q, c) given the candidate's true answer.
    pub fn likelihood(&self, truth: Answer, observed: Answer) -> S {
        if truth == observed {
            S::one() - self.eps_g.clone()
        } else {
            self.eps_g.clone() / S::from_count(2)
        }
    }
}

impl<S: Probability> Default for LikelihoodParams<S> {
    fn default() -> Self {
        Self {
            eps_g: S::from_param(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState<S> {
    ids: Arc<[String]>,
    probs: Vec<S>,
    ledger: BTreeMap<Question, Answer>,
}

impl<S: Probability> BeliefState<S> {
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Probabilities in scene object order.
    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn prob_of(&self, id: &str) -> Option<&S> {
        self.ids.iter().position(|x| x == id).map(|i| &self.probs[i])
    }

    pub fn ledger(&self) -> &BTreeMap<Question, Answer> {
        &self.ledger
    }

    /// Index of the most probable candidate; the earliest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn snapshot(&self) -> BeliefSnapshot {
        BeliefSnapshot {
            probs: self
                .ids
                .iter()
                .cloned()
                .zip(self.probs.iter().map(|p| round_to(p.to_f64_lossy(), 6)))
                .collect(),
            ledger: self
                .ledger
                .iter()
                .map(|(q, a)| LedgerEntry {
                    q: q.clone(),
                    a: *a,
                })
                .collect(),
        }
    }

    fn matches_scene(&self, scene: &Scene) -> bool {
        self.ids.len() == scene.objects.len()
            && self.ids.iter().zip(&scene.objects).all(|(a, o)| *a == o.id)
    }
}

pub fn init_belief<S: Probability>(scene: &Scene) -> BeliefState<S> {
    let n = scene.objects.len();
    let p = S::one() / S::from_count(n);
    BeliefState {
        ids: scene.objects.iter().map(|o| o.id.clone()).collect(),
        probs: vec![p; n],
        ledger: BTreeMap::new(),
    }
}

fn normalize<S: Probability>(weights: Vec<S>, q: &Question) -> Result<Vec<S>> {
    let total = weights.iter().cloned().fold(S::zero(), |acc, w| acc + w);
    if total.is_zero() {
        return Err(Error::Contradiction(q.clone()));
    }
    Ok(weights.into_iter().map(|w| w / total.clone()).collect())
}

pub fn update_belief<S: Probability>(
    belief: &BeliefState<S>,
    q: &Question,
    a: Answer,
    scene: &Scene,
    schema: &AttributeSchema,
    params: &LikelihoodParams<S>,
) -> Result<BeliefState<S>> {
    if !belief.matches_scene(scene) {
        return Err(Error::BeliefMismatch(scene.id.clone()));
    }
    match belief.ledger.get(q) {
        Some(prev) if *prev == a => Ok(belief.clone()),
        Some(_) => {
            let mut ledger = belief.ledger.clone();
            ledger.insert(q.clone(), a);
            let n = scene.objects.len();
            let mut weights = vec![S::one() / S::from_count(n); n];
            for (fq, fa) in &ledger {
                for (w, obj) in weights.iter_mut().zip(&scene.objects) {
                    *w = w.clone() * params.likelihood(evaluate_truth(fq, obj, schema), *fa);
                }
            }
            Ok(BeliefState {
                ids: belief.ids.clone(),
                probs: normalize(weights, q)?,
                ledger,
            })
        }
        None => {
            let likelihoods: Vec<S> = scene
                .objects
                .iter()
                .map(|obj| params.likelihood(evaluate_truth(q, obj, schema), a))
                .collect();
            // a constant likelihood leaves the posterior exactly where it was
            let probs = if likelihoods.iter().all(|l| *l == likelihoods[0]) {
                if likelihoods[0].is_zero() {
                    return Err(Error::Contradiction(q.clone()));
                }
                belief.probs.clone()
            } else {
                let weights = belief
                    .probs
                    .iter()
                    .zip(likelihoods)
                    .map(|(p, l)| p.clone() * l)
                    .collect();
                normalize(weights, q)?
            };
            let mut ledger = belief.ledger.clone();
            ledger.insert(q.clone(), a);
            Ok(BeliefState {
                ids: belief.ids.clone(),
                probs,
                ledger,
            })
        }
    }
}

/// The current hypothesis: argmax of the belief, ties to the earliest scene object.
pub fn hypothesis<'a, S: Probability>(belief: &BeliefState<S>, scene: &'a Scene) -> &'a str {
    &scene.objects[belief.argmax()].id
}

/// Probability the updated belief would give the current hypothesis, leaving `belief` as is.
pub fn simulate_update<S: Probability>(
    belief: &BeliefState<S>,
    q: &Question,
    a: Answer,
    scene: &Scene,
    schema: &AttributeSchema,
    params: &LikelihoodParams<S>,
) -> Result<S> {
    let h = belief.argmax();
    let updated = update_belief(belief, q, a, scene, schema, params)?;
    Ok(updated.probs[h].clone())
}

pub(crate) fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub q: Question,
    pub a: Answer,
}

/// Serialized view of a belief: probabilities rounded to six decimals, in scene order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    #[serde(with = "ordered_probs")]
    pub probs: Vec<(String, f64)>,
    pub ledger: Vec<LedgerEntry>,
}

impl BeliefSnapshot {
    pub fn prob_of(&self, id: &str) -> Option<f64> {
        self.probs.iter().find(|(k, _)| k == id).map(|(_, p)| *p)
    }
}

mod ordered_probs {
    use super::*;

    pub fn serialize<Ser: Serializer>(
        probs: &[(String, f64)],
        serializer: Ser,
    ) -> Result<Ser::Ok, Ser::Error> {
        let mut map = serializer.serialize_map(Some(probs.len()))?;
        for (k, v) in probs {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Vec<(String, f64)>, D::Error> {
        struct OrderedVisitor;

        impl<'de> Visitor<'de> for OrderedVisitor {
            type Value = Vec<(String, f64)>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of object id to probability")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::with_capacity(access.size_hint().unwrap_or(0));
                while let Some((k, v)) = access.next_entry()? {
                    out.push((k, v));
                }
                Ok(out)
            }
        }

        deserializer.deserialize_map(OrderedVisitor)
    }
}
