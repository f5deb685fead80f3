//! Polar attribute questions, their truth semantics, and the two answerers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{AttributeSchema, Scene, SceneObject, CATEGORY};

/// "Is the attribute `key` equal to `value`?"
///
/// `value` comes from the global vocabulary, so a question may name a value
/// that no object in the scene has.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Question {
    pub key: String,
    pub value: String,
}

impl Question {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
        }
    }

    pub fn text(&self) -> String {
        render_question(self)
    }

    pub fn is_valid(&self, schema: &AttributeSchema) -> bool {
        schema.values(&self.key).contains(&self.value)
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.value)
    }
}

#[derive(Serialize, Deserialize)]
struct QuestionWire {
    key: String,
    value: String,
    #[serde(default, skip_deserializing)]
    text: String,
}

impl Serialize for Question {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        QuestionWire {
            key: self.key.clone(),
            value: self.value.clone(),
            text: self.text(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Question {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = QuestionWire::deserialize(deserializer)?;
        Ok(Question::new(wire.key, wire.value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    #[serde(rename = "na")]
    NA,
}

impl Answer {
    pub const ALL: [Answer; 3] = [Answer::Yes, Answer::No, Answer::NA];

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::NA => "na",
        }
    }

    /// The two answers other than `self`, in canonical order.
    pub fn others(self) -> [Answer; 2] {
        match self {
            Answer::Yes => [Answer::No, Answer::NA],
            Answer::No => [Answer::Yes, Answer::NA],
            Answer::NA => [Answer::Yes, Answer::No],
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Answer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(Answer::Yes),
            "no" => Ok(Answer::No),
            "na" | "n/a" => Ok(Answer::NA),
            other => Err(Error::Argument(format!("unknown answer {other:?}"))),
        }
    }
}

/// Corruption rates of the two answerers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    pub eps_internal: f64,
    pub eps_external: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            eps_internal: 0.05,
            eps_external: 0.0,
        }
    }
}

impl NoiseParams {
    pub fn noiseless() -> Self {
        Self {
            eps_internal: 0.0,
            eps_external: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eps) in [
            ("eps_internal", self.eps_internal),
            ("eps_external", self.eps_external),
        ] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Parameter(format!("{name} = {eps} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Every (key, value) pair of the schema, in key order then value order.
pub fn question_universe(schema: &AttributeSchema) -> Vec<Question> {
    schema
        .keys()
        .iter()
        .flat_map(|key| {
            schema
                .values(key)
                .iter()
                .map(move |value| Question::new(key.clone(), value.clone()))
        })
        .collect()
}

pub fn evaluate_truth(q: &Question, obj: &SceneObject, schema: &AttributeSchema) -> Answer {
    let applicable = obj
        .category()
        .is_some_and(|c| q.key == CATEGORY || schema.applies(&q.key, c));
    if !applicable {
        return Answer::NA;
    }
    match obj.attr(&q.key) {
        Some(v) if v == q.value => Answer::Yes,
        Some(_) => Answer::No,
        None => Answer::NA,
    }
}

/// Symmetric channel: keeps `truth` with probability `1 - eps`, otherwise
/// returns one of the other two answers uniformly.
pub fn corrupt(truth: Answer, eps: f64, rng: &mut impl Rng) -> Answer {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        truth.others()[rng.gen_range(0..2)]
    } else {
        truth
    }
}

/// The target-aware external Oracle.
pub fn answer_external(
    q: &Question,
    scene: &Scene,
    schema: &AttributeSchema,
    noise: &NoiseParams,
    rng: &mut impl Rng,
) -> Result<Answer> {
    let target = scene.target_object()?;
    Ok(corrupt(
        evaluate_truth(q, target, schema),
        noise.eps_external,
        rng,
    ))
}

/// The questioner's internal Oracle, answering as if `hypothesis` were the target.
pub fn answer_internal(
    q: &Question,
    hypothesis: &SceneObject,
    schema: &AttributeSchema,
    noise: &NoiseParams,
    rng: &mut impl Rng,
) -> Answer {
    corrupt(
        evaluate_truth(q, hypothesis, schema),
        noise.eps_internal,
        rng,
    )
}

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

pub fn render_question(q: &Question) -> String {
    let v = &q.value;
    match q.key.as_str() {
        CATEGORY => format!("is it {} {v}?", article(v)),
        "color" => format!("is it {v}?"),
        "size" => format!("is it {v}?"),
        "side" => format!("is it on the {v}?"),
        "row" => format!("is it in the {v}?"),
        key => format!("is its {key} {v}?"),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashSet};

    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brown_dog() -> SceneObject {
        SceneObject::new(
            "o1",
            [
                ("category", "dog"),
                ("color", "brown"),
                ("size", "large"),
                ("side", "left"),
                ("row", "front"),
            ],
        )
    }

    fn scene_with_target(target: SceneObject) -> Scene {
        let other = |id: &str, cat: &str| {
            SceneObject::new(
                id,
                [
                    ("category", cat),
                    ("color", "red"),
                    ("size", "small"),
                    ("side", "right"),
                ],
            )
        };
        Scene {
            id: "s".into(),
            target: Some(target.id.clone()),
            objects: vec![target, other("o2", "umbrella"), other("o3", "bicycle")],
        }
    }

    #[test]
    fn universe_sizes() {
        let universe = question_universe(&AttributeSchema::standard());
        assert_eq!(universe.len(), 12 + 8 + 2 + 2 + 2);
        let distinct: HashSet<_> = universe.iter().collect();
        assert_eq!(distinct.len(), universe.len());
        assert!(universe.contains(&Question::new("category", "cat")));
        assert_eq!(universe[0], Question::new("category", "dog"));

        let schema = AttributeSchema::new(
            vec!["category".into()],
            BTreeMap::from([("category".into(), vec!["a".into(), "b".into()])]),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(question_universe(&schema).len(), 2);
    }

    #[test]
    fn truth_semantics() {
        let schema = AttributeSchema::standard();
        let dog = brown_dog();
        assert_eq!(evaluate_truth(&Question::new("color", "brown"), &dog, &schema), Answer::Yes);
        assert_eq!(evaluate_truth(&Question::new("color", "black"), &dog, &schema), Answer::No);
        let umbrella = SceneObject::new(
            "o2",
            [("category", "umbrella"), ("color", "red"), ("size", "small"), ("side", "left")],
        );
        assert_eq!(
            evaluate_truth(&Question::new("row", "front"), &umbrella, &schema),
            Answer::NA
        );
    }

    #[test]
    fn exactly_one_truth_value_per_question() {
        let schema = AttributeSchema::standard();
        let dog = brown_dog();
        for q in question_universe(&schema) {
            let a = evaluate_truth(&q, &dog, &schema);
            assert_eq!(Answer::ALL.iter().filter(|x| **x == a).count(), 1);
        }
    }

    #[test]
    fn external_oracle() {
        let schema = AttributeSchema::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let clean = NoiseParams::noiseless();
        let scene = scene_with_target(brown_dog());
        let q = Question::new("color", "brown");
        assert_eq!(answer_external(&q, &scene, &schema, &clean, &mut rng).unwrap(), Answer::Yes);

        let mut black = brown_dog();
        black.attrs.insert("color".into(), "black".into());
        let scene_black = scene_with_target(black);
        assert_eq!(
            answer_external(&q, &scene_black, &schema, &clean, &mut rng).unwrap(),
            Answer::No
        );

        let full = NoiseParams {
            eps_internal: 0.0,
            eps_external: 1.0,
        };
        for _ in 0..200 {
            let a = answer_external(&q, &scene, &schema, &full, &mut rng).unwrap();
            assert!(matches!(a, Answer::No | Answer::NA));
        }

        let mut untargeted = scene.clone();
        untargeted.target = None;
        assert!(matches!(
            answer_external(&q, &untargeted, &schema, &clean, &mut rng),
            Err(Error::MissingTarget(_))
        ));
    }

    #[test]
    fn internal_oracle() {
        let schema = AttributeSchema::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let clean = NoiseParams::noiseless();
        let dog = brown_dog();
        assert_eq!(
            answer_internal(&Question::new("color", "brown"), &dog, &schema, &clean, &mut rng),
            Answer::Yes
        );
        assert_eq!(
            answer_internal(&Question::new("category", "cat"), &dog, &schema, &clean, &mut rng),
            Answer::No
        );
        for q in question_universe(&schema) {
            assert_eq!(
                answer_internal(&q, &dog, &schema, &clean, &mut rng),
                evaluate_truth(&q, &dog, &schema)
            );
        }
    }

    #[test]
    fn internal_corruption_frequency() {
        let schema = AttributeSchema::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let noise = NoiseParams {
            eps_internal: 0.05,
            eps_external: 0.0,
        };
        let dog = brown_dog();
        let q = Question::new("color", "brown");
        let corrupted = (0..10_000)
            .filter(|_| answer_internal(&q, &dog, &schema, &noise, &mut rng) != Answer::Yes)
            .count();
        let freq = corrupted as f64 / 10_000.0;
        assert!((0.04..=0.06).contains(&freq), "{freq}");
    }

    #[test]
    fn rendering() {
        assert_eq!(render_question(&Question::new("category", "dog")), "is it a dog?");
        assert_eq!(render_question(&Question::new("category", "umbrella")), "is it an umbrella?");
        assert_eq!(render_question(&Question::new("side", "left")), "is it on the left?");
        let texts: HashSet<String> = question_universe(&AttributeSchema::standard())
            .iter()
            .map(render_question)
            .collect();
        assert_eq!(texts.len(), 26);
    }

    #[test]
    fn wire_forms() {
        let q = Question::new("category", "dog");
        assert_eq!(
            serde_json::to_string(&q).unwrap(),
            r#"{"key":"category","value":"dog","text":"is it a dog?"}"#
        );
        let back: Question = serde_json::from_str(r#"{"key":"category","value":"dog"}"#).unwrap();
        assert_eq!(back, q);
        assert_eq!(serde_json::to_string(&Answer::NA).unwrap(), r#""na""#);
        assert_eq!("Yes".parse::<Answer>().unwrap(), Answer::Yes);
        assert!("maybe".parse::<Answer>().is_err());
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseParams::default().validate().is_ok());
        let bad = NoiseParams {
            eps_internal: 1.5,
            eps_external: 0.0,
        };
        assert!(bad.validate().is_err());
    }
}
