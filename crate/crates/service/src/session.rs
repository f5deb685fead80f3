//! Live sessions and the JSON views sent to clients.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use refgame_core::{Answer, Episode, GameEngine, Question, Scene, StrategyKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "human-oracle", alias = "HumanOracle")]
    HumanOracle,
    #[default]
    #[serde(rename = "human-guesser", alias = "HumanGuesser")]
    HumanGuesser,
}

/// Where a dialogue shown to an annotator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "confirm-it")]
    ConfirmIt,
    #[serde(rename = "plain-beam")]
    PlainBeam,
    #[serde(rename = "human-origin")]
    HumanOrigin,
    #[serde(rename = "practice")]
    Practice,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::ConfirmIt,
        Provenance::PlainBeam,
        Provenance::HumanOrigin,
        Provenance::Practice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Provenance::ConfirmIt => "confirm-it",
            Provenance::PlainBeam => "plain-beam",
            Provenance::HumanOrigin => "human-origin",
            Provenance::Practice => "practice",
        }
    }

    /// Strategy that generates dialogues of this provenance, if any.
    pub fn strategy(self) -> Option<StrategyKind> {
        match self {
            Provenance::ConfirmIt => Some(StrategyKind::ConfirmIt),
            Provenance::PlainBeam | Provenance::Practice => Some(StrategyKind::PlainBeam),
            Provenance::HumanOrigin => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Provenance::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown provenance {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Finished,
}

/// One numbered candidate card.
#[derive(Debug, Clone, Serialize)]
pub struct CardView {
    pub number: usize,
    pub id: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SceneView {
    pub id: String,
    pub objects: Vec<CardView>,
}

impl SceneView {
    pub fn of(scene: &Scene) -> Self {
        Self {
            id: scene.id.clone(),
            objects: scene
                .objects
                .iter()
                .enumerate()
                .map(|(i, o)| CardView {
                    number: i + 1,
                    id: o.id.clone(),
                    attributes: o.attrs.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Exchange {
    pub question: Question,
    pub answer: Answer,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleView {
    pub session_id: String,
    pub mode: Mode,
    pub status: Status,
    pub strategy: StrategyKind,
    pub scene: SceneView,
    pub target_id: String,
    /// 1-based number of the turn awaiting an answer.
    pub turn: usize,
    pub max_turns: usize,
    pub question: Option<Question>,
    pub transcript: Vec<Exchange>,
    pub current_guess: String,
    pub final_guess: Option<String>,
    pub success: Option<bool>,
}

/// What an annotator sees. Carries neither the target nor the provenance.
#[derive(Debug, Clone, Serialize)]
pub struct GuesserView {
    pub session_id: String,
    pub mode: Mode,
    pub status: Status,
    pub scene: SceneView,
    pub dialogue: Vec<Exchange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<GuessOutcome>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GuessOutcome {
    pub object_id: String,
    pub correct: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum SessionView {
    Oracle(OracleView),
    Guesser(GuesserView),
}

#[derive(Debug)]
pub enum SessionKind {
    Oracle {
        engine: Box<GameEngine<f64>>,
    },
    Guesser {
        dialogue: Episode,
        provenance: Provenance,
        annotator_id: String,
        outcome: Option<GuessOutcome>,
    },
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub scene: Scene,
    pub kind: SessionKind,
    pub last_active: Instant,
}

impl Session {
    pub fn mode(&self) -> Mode {
        match self.kind {
            SessionKind::Oracle { .. } => Mode::HumanOracle,
            SessionKind::Guesser { .. } => Mode::HumanGuesser,
        }
    }

    pub fn status(&self) -> Status {
        let done = match &self.kind {
            SessionKind::Oracle { engine } => engine.is_finished(),
            SessionKind::Guesser { outcome, .. } => outcome.is_some(),
        };
        if done {
            Status::Finished
        } else {
            Status::Active
        }
    }

    pub fn view(&mut self) -> SessionView {
        let status = self.status();
        let scene = SceneView::of(&self.scene);
        match &mut self.kind {
            SessionKind::Oracle { engine } => {
                let question = if status == Status::Active {
                    engine.current_question().ok().cloned()
                } else {
                    None
                };
                let transcript = engine
                    .history()
                    .iter()
                    .map(|(q, a)| Exchange {
                        question: q.clone(),
                        answer: *a,
                    })
                    .collect();
                let finished = status == Status::Finished;
                let guess = engine.current_guess().to_string();
                let target = self.scene.target.clone().unwrap_or_default();
                SessionView::Oracle(OracleView {
                    session_id: self.id.clone(),
                    mode: Mode::HumanOracle,
                    status,
                    strategy: engine.strategy(),
                    scene,
                    turn: engine.turn_index() + usize::from(!finished),
                    max_turns: engine.config().max_turns,
                    question,
                    transcript,
                    success: finished.then(|| guess == target),
                    final_guess: finished.then(|| guess.clone()),
                    current_guess: guess,
                    target_id: target,
                })
            }
            SessionKind::Guesser {
                dialogue, outcome, ..
            } => SessionView::Guesser(GuesserView {
                session_id: self.id.clone(),
                mode: Mode::HumanGuesser,
                status,
                scene,
                dialogue: dialogue
                    .turns
                    .iter()
                    .map(|t| Exchange {
                        question: t.question().clone(),
                        answer: t.external_answer,
                    })
                    .collect(),
                result: outcome.clone(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_names_round_trip() {
        for p in Provenance::ALL {
            assert_eq!(p.name().parse::<Provenance>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
        assert!("beam".parse::<Provenance>().is_err());
    }

    #[test]
    fn mode_accepts_both_spellings() {
        let a: Mode = serde_json::from_str("\"human-oracle\"").unwrap();
        let b: Mode = serde_json::from_str("\"HumanOracle\"").unwrap();
        assert_eq!(a, b);
    }
}
