//! Game traces and their JSON Lines log format.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guesser::BeliefSnapshot;
use crate::qa::{Answer, Question};
use crate::qgen::ScoredQuestion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "confirm-it")]
    ConfirmIt,
    #[serde(rename = "plain-beam")]
    PlainBeam,
    #[serde(rename = "random-rerank")]
    RandomReRank,
    #[serde(rename = "greedy")]
    Greedy,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::ConfirmIt,
        StrategyKind::PlainBeam,
        StrategyKind::RandomReRank,
        StrategyKind::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::ConfirmIt => "confirm-it",
            StrategyKind::PlainBeam => "plain-beam",
            StrategyKind::RandomReRank => "random-rerank",
            StrategyKind::Greedy => "greedy",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "confirm-it" | "confirmit" => Ok(StrategyKind::ConfirmIt),
            "plain-beam" | "beam" => Ok(StrategyKind::PlainBeam),
            "random-rerank" | "random-re-rank" | "random" => Ok(StrategyKind::RandomReRank),
            "greedy" => Ok(StrategyKind::Greedy),
            other => Err(Error::Argument(format!("unknown strategy {other:?}"))),
        }
    }
}

/// One loop iteration: beam, internal-oracle diagnostics, the choice, and the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub beam: Vec<ScoredQuestion>,
    pub internal_answers: Vec<Answer>,
    /// Simulated posterior of the hypothesis for each beam item.
    pub simulated_phyp: Vec<f64>,
    pub chosen_index: usize,
    pub hypothesis_before: String,
    pub external_answer: Answer,
    pub belief_after: BeliefSnapshot,
    pub hypothesis_after: String,
    /// Every beam item had the same simulated posterior.
    pub gains_tied: bool,
}

impl Turn {
    pub fn question(&self) -> &Question {
        &self.beam[self.chosen_index].question
    }

    pub fn chosen_internal_answer(&self) -> Answer {
        self.internal_answers[self.chosen_index]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub scene_id: String,
    pub target_id: String,
    pub strategy: StrategyKind,
    pub turns: Vec<Turn>,
    pub final_guess: String,
    pub success: bool,
    pub master_seed: u64,
    pub episode_index: u64,
}

impl Episode {
    pub fn questions(&self) -> impl Iterator<Item = &Question> {
        self.turns.iter().map(Turn::question)
    }

    /// Invariants that can be checked from the record alone.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (t, turn) in self.turns.iter().enumerate() {
            let b = turn.beam.len();
            if b == 0 || turn.internal_answers.len() != b || turn.simulated_phyp.len() != b {
                problems.push(format!("turn {t}: beam/diagnostic lengths differ"));
                continue;
            }
            if turn.chosen_index >= b {
                problems.push(format!("turn {t}: chosen index {} out of range", turn.chosen_index));
                continue;
            }
            if self.strategy == StrategyKind::ConfirmIt {
                if let Some(v) = rerank_violation(turn) {
                    problems.push(format!("turn {t}: {v}"));
                }
            }
            if t > 0 && turn.hypothesis_before != self.turns[t - 1].hypothesis_after {
                problems.push(format!("turn {t}: hypothesis does not follow previous belief"));
            }
        }
        if self.success != (self.final_guess == self.target_id) {
            problems.push("success flag disagrees with final guess".into());
        }
        if let Some(last) = self.turns.last() {
            if last.hypothesis_after != self.final_guess {
                problems.push("final guess is not the last belief's argmax".into());
            }
        }
        problems
    }
}

/// Describes how a turn's choice departs from "first index of the maximal
/// simulated posterior", if it does.
pub fn rerank_violation(turn: &Turn) -> Option<String> {
    let p = &turn.simulated_phyp;
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first_max = p.iter().position(|x| *x == max)?;
    (turn.chosen_index != first_max).then(|| {
        format!(
            "chose index {} but the first maximum is at {first_max}",
            turn.chosen_index
        )
    })
}

pub fn save_episodes<'a>(episodes: impl IntoIterator<Item = &'a Episode>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for ep in episodes {
        serde_json::to_writer(&mut out, ep)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_episodes(path: &Path) -> Result<Vec<Episode>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
