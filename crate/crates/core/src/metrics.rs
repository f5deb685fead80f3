//! Dialogue statistics over batches of episodes.
//!
//! A question counts as hallucinated when no object in its scene satisfies it
//! while its key still applies to at least one object. Questions that are
//! inapplicable to everything are not counted.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::episode::{Episode, StrategyKind};
use crate::error::{Error, Result};
use crate::qa::{evaluate_truth, render_question, Answer, Question};
use crate::qgen::is_present;
use crate::world::{AttributeSchema, Scene};

/// Scene lookup by id.
#[derive(Debug, Clone, Default)]
pub struct SceneIndex<'a> {
    by_id: HashMap<&'a str, &'a Scene>,
}

impl<'a> SceneIndex<'a> {
    pub fn new(scenes: &'a [Scene]) -> Self {
        Self {
            by_id: scenes.iter().map(|s| (s.id.as_str(), s)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&'a Scene> {
        self.by_id.get(id).copied()
    }

    fn for_episode(&self, ep: &Episode) -> Result<&'a Scene> {
        self.get(&ep.scene_id).ok_or_else(|| Error::SceneLookup {
            episode: format!("{}/{}#{}", ep.scene_id, ep.strategy, ep.episode_index),
            scene: ep.scene_id.clone(),
        })
    }
}

fn non_empty<E>(episodes: &[E], what: &str) -> Result<()> {
    if episodes.is_empty() {
        Err(Error::Argument(format!("{what}: no episodes")))
    } else {
        Ok(())
    }
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn task_accuracy<E: Borrow<Episode>>(episodes: &[E]) -> Result<f64> {
    non_empty(episodes, "task accuracy")?;
    let wins = episodes.iter().filter(|e| (*e).borrow().success).count();
    Ok(fraction(wins, episodes.len()))
}

pub fn has_repetition(ep: &Episode) -> bool {
    let mut seen = BTreeSet::new();
    ep.questions().any(|q| !seen.insert(render_question(q)))
}

/// Share of games in which some question text occurs at least twice.
pub fn repetition_game_rate<E: Borrow<Episode>>(episodes: &[E]) -> Result<f64> {
    non_empty(episodes, "repetition rate")?;
    let n = episodes.iter().filter(|e| has_repetition((*e).borrow())).count();
    Ok(fraction(n, episodes.len()))
}

pub fn is_hallucinated(q: &Question, scene: &Scene, schema: &AttributeSchema) -> bool {
    let applicable = scene
        .objects
        .iter()
        .any(|o| evaluate_truth(q, o, schema) != Answer::NA);
    applicable && !is_present(q, scene, schema)
}

/// CHAIR-s: share of dialogues with at least one hallucinated question.
pub fn chair_s<E: Borrow<Episode>>(
    episodes: &[E],
    scenes: &SceneIndex,
    schema: &AttributeSchema,
) -> Result<f64> {
    non_empty(episodes, "CHAIR-s")?;
    let mut hit = 0;
    for ep in episodes {
        let ep = ep.borrow();
        let scene = scenes.for_episode(ep)?;
        if ep.questions().any(|q| is_hallucinated(q, scene, schema)) {
            hit += 1;
        }
    }
    Ok(fraction(hit, episodes.len()))
}

/// CHAIR-i: hallucinated questions over all questions, pooled.
pub fn chair_i<E: Borrow<Episode>>(
    episodes: &[E],
    scenes: &SceneIndex,
    schema: &AttributeSchema,
) -> Result<f64> {
    non_empty(episodes, "CHAIR-i")?;
    let (mut bad, mut total) = (0, 0);
    for ep in episodes {
        let ep = ep.borrow();
        let scene = scenes.for_episode(ep)?;
        for q in ep.questions() {
            total += 1;
            if is_hallucinated(q, scene, schema) {
                bad += 1;
            }
        }
    }
    Ok(fraction(bad, total))
}

pub fn yes_last_turn_rate<E: Borrow<Episode>>(episodes: &[E]) -> Result<f64> {
    non_empty(episodes, "yes-last-turn rate")?;
    let n = episodes
        .iter()
        .filter(|e| {
            (*e).borrow()
                .turns
                .last()
                .is_some_and(|t| t.external_answer == Answer::Yes)
        })
        .count();
    Ok(fraction(n, episodes.len()))
}

/// Consecutive question pairs, by rendered text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCorpus {
    pairs: BTreeSet<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    prev: String,
    next: String,
}

impl PairCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, prev: &str, next: &str) -> bool {
        self.pairs.contains(&(prev.to_string(), next.to_string()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for (prev, next) in &self.pairs {
            serde_json::to_writer(
                &mut out,
                &PairRecord {
                    prev: prev.clone(),
                    next: next.clone(),
                },
            )?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut pairs = BTreeSet::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PairRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            pairs.insert((rec.prev, rec.next));
        }
        Ok(Self { pairs })
    }
}

fn consecutive_pairs(ep: &Episode) -> Vec<(String, String)> {
    let texts: Vec<String> = ep.questions().map(render_question).collect();
    texts
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect()
}

pub fn build_pair_corpus<E: Borrow<Episode>>(episodes: &[E]) -> PairCorpus {
    PairCorpus {
        pairs: episodes
            .iter()
            .flat_map(|e| consecutive_pairs(e.borrow()))
            .collect(),
    }
}

/// Share of consecutive pairs (with multiplicity) that the corpus has not seen.
pub fn novel_pair_rate<E: Borrow<Episode>>(episodes: &[E], corpus: &PairCorpus) -> f64 {
    let (mut novel, mut total) = (0, 0);
    for ep in episodes {
        for (a, b) in consecutive_pairs(ep.borrow()) {
            total += 1;
            if !corpus.pairs.contains(&(a, b)) {
                novel += 1;
            }
        }
    }
    fraction(novel, total)
}

/// Share of asked questions whose internal-oracle answer was Yes.
pub fn expected_yes_rate<E: Borrow<Episode>>(episodes: &[E]) -> f64 {
    let (mut yes, mut total) = (0, 0);
    for ep in episodes {
        for t in &ep.borrow().turns {
            total += 1;
            if t.chosen_internal_answer() == Answer::Yes {
                yes += 1;
            }
        }
    }
    fraction(yes, total)
}

/// Over turns where the external answer contradicts the internal one, the share
/// after which a different candidate leads. `None` when nothing was contradicted.
pub fn disconfirm_switch_rate<E: Borrow<Episode>>(episodes: &[E]) -> Option<f64> {
    let (mut switched, mut total) = (0, 0);
    for ep in episodes {
        for t in &ep.borrow().turns {
            if t.external_answer != t.chosen_internal_answer() {
                total += 1;
                if t.hypothesis_after != t.hypothesis_before {
                    switched += 1;
                }
            }
        }
    }
    (total > 0).then(|| fraction(switched, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub repetition_game_rate: f64,
    pub chair_s: f64,
    pub chair_i: f64,
    pub yes_last_turn_rate: f64,
    pub novel_pair_rate: Option<f64>,
    pub expected_yes_rate: f64,
    pub disconfirm_switch_rate: Option<f64>,
    pub n_episodes: usize,
}

impl MetricsReport {
    pub fn compute<E: Borrow<Episode>>(
        episodes: &[E],
        scenes: &SceneIndex,
        schema: &AttributeSchema,
        corpus: Option<&PairCorpus>,
    ) -> Result<Self> {
        Ok(Self {
            accuracy: task_accuracy(episodes)?,
            repetition_game_rate: repetition_game_rate(episodes)?,
            chair_s: chair_s(episodes, scenes, schema)?,
            chair_i: chair_i(episodes, scenes, schema)?,
            yes_last_turn_rate: yes_last_turn_rate(episodes)?,
            novel_pair_rate: corpus.map(|c| novel_pair_rate(episodes, c)),
            expected_yes_rate: expected_yes_rate(episodes),
            disconfirm_switch_rate: disconfirm_switch_rate(episodes),
            n_episodes: episodes.len(),
        })
    }
}

/// One report per strategy present in `episodes`, in canonical strategy order.
pub fn reports_by_strategy(
    episodes: &[Episode],
    scenes: &SceneIndex,
    schema: &AttributeSchema,
    corpus: Option<&PairCorpus>,
) -> Result<Vec<(StrategyKind, MetricsReport)>> {
    let mut out = Vec::new();
    for strategy in StrategyKind::ALL {
        let subset: Vec<&Episode> = episodes.iter().filter(|e| e.strategy == strategy).collect();
        if !subset.is_empty() {
            out.push((
                strategy,
                MetricsReport::compute(&subset, scenes, schema, corpus)?,
            ));
        }
    }
    Ok(out)
}
