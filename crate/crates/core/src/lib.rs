//! Symbolic referential guessing games.
//!
//! A questioner asks polar attribute questions about a scene of candidate
//! objects, a Bayesian guesser tracks which candidate is the target, and a
//! decoding strategy picks each question from a stochastic generator's beam.
//! The confirm-it strategy re-ranks the beam by how much the internal
//! oracle's answer would raise the probability of the current hypothesis.
//!
//! Belief arithmetic is generic over [`Probability`]; the aliases below fix
//! the common choices.

pub mod episode;
pub mod error;
pub mod guesser;
pub mod metrics;
pub mod qa;
pub mod qgen;
pub mod report;
pub mod scalar;
pub mod strategy;
pub mod streams;
pub mod trace;
pub mod world;

pub use episode::{Episode, StrategyKind, Turn};
pub use error::{Error, Result};
pub use metrics::{MetricsReport, PairCorpus};
pub use guesser::{BeliefSnapshot, BeliefState, LikelihoodParams};
pub use qa::{Answer, NoiseParams, Question};
pub use qgen::{PolicyParams, QuestionGenerator, ScoredQuestion};
pub use scalar::Probability;
pub use strategy::{GameConfig, GameEngine};
pub use streams::EpisodeSeed;
pub use world::{AttributeSchema, Scene, SceneObject};

pub use num_rational::BigRational;

/// Floating-point belief used by the simulator.
pub type Belief = BeliefState<f64>;
/// Exact rational belief.
pub type ExactBelief = BeliefState<BigRational>;
pub type Likelihood = LikelihoodParams<f64>;
pub type ExactLikelihood = LikelihoodParams<BigRational>;
pub type ExactEngine = GameEngine<BigRational>;
