use std::path::{Path, PathBuf};

use refgame_core::qa::question_universe;
use refgame_core::world::{HUMAN_EVAL_MAX_OBJECTS, MAX_OBJECTS, MIN_OBJECTS};
use refgame_core::{AttributeSchema, GameConfig, LikelihoodParams, NoiseParams, PolicyParams, StrategyKind};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub scenes: PathBuf,
    pub episodes: PathBuf,
    pub corpus: PathBuf,
    /// Report prefix; `.csv` and `.txt` are appended.
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            scenes: "scenes.jsonl".into(),
            episodes: "episodes.jsonl".into(),
            corpus: "corpus.jsonl".into(),
            report: "report".into(),
        }
    }
}

/// Everything an experiment depends on. Loaded from TOML; flags override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_scenes: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub p_overlap: f64,
    pub strategies: Vec<StrategyKind>,
    pub beam_size: usize,
    pub max_turns: usize,
    pub noise: NoiseParams,
    pub likelihood: LikelihoodParams<f64>,
    pub policy: PolicyParams,
    pub paths: Paths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let game = GameConfig::default();
        Self {
            seed: 42,
            n_scenes: 500,
            min_objects: 3,
            max_objects: 9,
            p_overlap: 0.8,
            strategies: StrategyKind::ALL.to_vec(),
            beam_size: game.beam_size,
            max_turns: game.max_turns,
            noise: game.noise,
            likelihood: game.likelihood,
            policy: game.policy,
            paths: Paths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }

    pub fn game(&self) -> GameConfig {
        GameConfig {
            beam_size: self.beam_size,
            max_turns: self.max_turns,
            noise: self.noise,
            likelihood: self.likelihood.clone(),
            policy: self.policy.clone(),
            master_seed: self.seed,
        }
    }

    /// Restricts scenes to the size used for human evaluation.
    pub fn human_eval_profile(&mut self) {
        self.max_objects = self.max_objects.min(HUMAN_EVAL_MAX_OBJECTS);
        self.min_objects = self.min_objects.min(self.max_objects);
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let usage = |m: String| Err(Failure::Usage(m));
        if self.n_scenes == 0 {
            return usage("n_scenes must be at least 1".into());
        }
        if self.min_objects < MIN_OBJECTS
            || self.max_objects > MAX_OBJECTS
            || self.min_objects > self.max_objects
        {
            return usage(format!(
                "object range {}..={} must lie within {MIN_OBJECTS}..={MAX_OBJECTS}",
                self.min_objects, self.max_objects
            ));
        }
        if !(0.0..=1.0).contains(&self.p_overlap) {
            return usage(format!("p_overlap {} outside [0, 1]", self.p_overlap));
        }
        if self.strategies.is_empty() {
            return usage("at least one strategy is required".into());
        }
        let p = &self.paths;
        let all = [&p.scenes, &p.episodes, &p.corpus, &p.report];
        for (i, a) in all.iter().enumerate() {
            if all[i + 1..].contains(a) {
                return usage(format!("path {} is used twice", a.display()));
            }
        }
        let universe = question_universe(&AttributeSchema::standard()).len();
        if self.beam_size > universe {
            return usage(format!("beam_size {} exceeds the {universe} askable questions", self.beam_size));
        }
        self.game()
            .validate()
            .map_err(|e| Failure::Usage(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.game(), GameConfig { master_seed: 42, ..GameConfig::default() });
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let c: ExperimentConfig = toml::from_str(
            r#"
            seed = 7
            strategies = ["confirm-it", "greedy"]
            [policy]
            tau = 0.0
            [paths]
            scenes = "s.jsonl"
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.strategies, vec![StrategyKind::ConfirmIt, StrategyKind::Greedy]);
        assert_eq!(c.policy.tau, 0.0);
        assert_eq!(c.policy.w_repeat, PolicyParams::default().w_repeat);
        assert_eq!(c.paths.episodes, PathBuf::from("episodes.jsonl"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("beam = 3").is_err());
    }

    #[test]
    fn invariants() {
        let mut c = ExperimentConfig { n_scenes: 0, ..Default::default() };
        assert!(c.validate().is_err());
        c.n_scenes = 1;
        c.paths.corpus = c.paths.scenes.clone();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig { min_objects: 2, ..Default::default() };
        assert!(c.validate().is_err());
        c.min_objects = 7;
        c.human_eval_profile();
        assert_eq!((c.min_objects, c.max_objects), (6, 6));
        c.validate().unwrap();
    }
}
