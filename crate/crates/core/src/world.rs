//! Attribute schemas and symbolic scenes.
//!
//! A scene is a small ordered set of candidate objects described by
//! attribute maps, plus an optional target. Object order is the candidate
//! index order used by every tie-break downstream.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::streams::{stream, Purpose};

pub const MIN_OBJECTS: usize = 3;
pub const MAX_OBJECTS: usize = 20;
/// Largest candidate count in the human-evaluation profile.
pub const HUMAN_EVAL_MAX_OBJECTS: usize = 6;

pub const CATEGORY: &str = "category";

/// Attribute keys, their global vocabularies, and which categories each key applies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    keys: Vec<String>,
    vocab: BTreeMap<String, Vec<String>>,
    /// Keys missing from this map apply to every category.
    applicability: BTreeMap<String, BTreeSet<String>>,
}

impl AttributeSchema {
    pub fn new(
        keys: Vec<String>,
        vocab: BTreeMap<String, Vec<String>>,
        applicability: BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Self> {
        let schema = Self {
            keys,
            vocab,
            applicability,
        };
        schema.check()?;
        Ok(schema)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Schema(m));
        if self.keys.is_empty() {
            return bad("no keys".into());
        }
        if !self.keys.iter().any(|k| k == CATEGORY) {
            return bad("\"category\" is not a key".into());
        }
        let mut seen = HashSet::new();
        for key in &self.keys {
            if !seen.insert(key) {
                return bad(format!("duplicate key {key}"));
            }
            let Some(values) = self.vocab.get(key) else {
                return bad(format!("no vocabulary for {key}"));
            };
            if values.is_empty() {
                return bad(format!("empty vocabulary for {key}"));
            }
            let distinct: HashSet<_> = values.iter().collect();
            if distinct.len() != values.len() {
                return bad(format!("duplicate value in vocabulary of {key}"));
            }
        }
        if self.vocab.len() != self.keys.len() {
            return bad("vocabulary names an unknown key".into());
        }
        for (key, cats) in &self.applicability {
            if !self.vocab.contains_key(key) {
                return bad(format!("applicability names unknown key {key}"));
            }
            if key == CATEGORY {
                return bad("\"category\" applicability cannot be restricted".into());
            }
            for cat in cats {
                if !self.vocab[CATEGORY].contains(cat) {
                    return bad(format!("applicability of {key} names unknown category {cat}"));
                }
            }
        }
        Ok(())
    }

    /// Twelve categories, eight colours, binary size/side/row.
    /// `row` applies to the first eight categories only, so some questions get NA.
    pub fn standard() -> Self {
        Self::standard_with_row_categories(&STANDARD_CATEGORIES[..8])
    }

    pub fn standard_with_row_categories(row_categories: &[&str]) -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let keys = owned(&[CATEGORY, "color", "size", "side", "row"]);
        let vocab = BTreeMap::from([
            (CATEGORY.to_string(), owned(&STANDARD_CATEGORIES)),
            (
                "color".to_string(),
                owned(&["red", "blue", "green", "yellow", "black", "white", "brown", "gray"]),
            ),
            ("size".to_string(), owned(&["small", "large"])),
            ("side".to_string(), owned(&["left", "right"])),
            ("row".to_string(), owned(&["front", "back"])),
        ]);
        let applicability = BTreeMap::from([(
            "row".to_string(),
            row_categories.iter().map(|s| s.to_string()).collect(),
        )]);
        Self::new(keys, vocab, applicability).expect("standard schema is valid")
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn values(&self, key: &str) -> &[String] {
        self.vocab.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_key(&self, key: &str) -> bool {
        self.vocab.contains_key(key)
    }

    pub fn applies(&self, key: &str, category: &str) -> bool {
        match self.applicability.get(key) {
            Some(cats) => cats.contains(category),
            None => self.vocab.contains_key(key),
        }
    }
}

impl Default for AttributeSchema {
    fn default() -> Self {
        Self::standard()
    }
}

const STANDARD_CATEGORIES: [&str; 12] = [
    "dog", "cat", "person", "car", "chair", "cup", "bottle", "book", "bowl", "laptop", "bicycle",
    "umbrella",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub attrs: BTreeMap<String, String>,
}

impl SceneObject {
    pub fn new<I, K, V>(id: impl Into<String>, attrs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            id: id.into(),
            attrs: attrs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn category(&self) -> Option<&str> {
        self.attrs.get(CATEGORY).map(String::as_str)
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub objects: Vec<SceneObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl Scene {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn target_object(&self) -> Result<&SceneObject> {
        self.target
            .as_deref()
            .and_then(|t| self.object(t))
            .ok_or_else(|| Error::MissingTarget(self.id.clone()))
    }
}

/// A single way in which a scene fails its invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TooFewObjects(usize),
    TooManyObjects(usize),
    DuplicateObjectId(String),
    MissingCategory { object: String },
    UnknownKey { object: String, key: String },
    ValueOutsideVocab { object: String, key: String, value: String },
    MissingApplicableKey { object: String, key: String },
    InapplicableKey { object: String, key: String },
    UnknownTarget(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewObjects(n) => write!(f, "object count < {MIN_OBJECTS} ({n})"),
            Violation::TooManyObjects(n) => write!(f, "object count > {MAX_OBJECTS} ({n})"),
            Violation::DuplicateObjectId(id) => write!(f, "duplicate object id {id}"),
            Violation::MissingCategory { object } => write!(f, "object {object} has no category"),
            Violation::UnknownKey { object, key } => {
                write!(f, "object {object} has unknown key {key}")
            }
            Violation::ValueOutsideVocab { object, key, value } => {
                write!(f, "object {object} key {key}: value {value} not in vocabulary")
            }
            Violation::MissingApplicableKey { object, key } => {
                write!(f, "object {object} is missing applicable key {key}")
            }
            Violation::InapplicableKey { object, key } => {
                write!(f, "object {object} carries key {key} not applicable to its category")
            }
            Violation::UnknownTarget(t) => write!(f, "target {t} is not a scene object"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

pub fn validate_scene(scene: &Scene, schema: &AttributeSchema) -> ValidationReport {
    let mut violations = Vec::new();
    let n = scene.objects.len();
    if n < MIN_OBJECTS {
        violations.push(Violation::TooFewObjects(n));
    }
    if n > MAX_OBJECTS {
        violations.push(Violation::TooManyObjects(n));
    }
    let mut ids = HashSet::new();
    for obj in &scene.objects {
        if !ids.insert(obj.id.as_str()) {
            violations.push(Violation::DuplicateObjectId(obj.id.clone()));
        }
        for (key, value) in &obj.attrs {
            if !schema.has_key(key) {
                violations.push(Violation::UnknownKey {
                    object: obj.id.clone(),
                    key: key.clone(),
                });
            } else if !schema.values(key).contains(value) {
                violations.push(Violation::ValueOutsideVocab {
                    object: obj.id.clone(),
                    key: key.clone(),
                    value: value.clone(),
                });
            }
        }
        let Some(category) = obj.category() else {
            violations.push(Violation::MissingCategory {
                object: obj.id.clone(),
            });
            continue;
        };
        for key in schema.keys() {
            let applies = schema.applies(key, category);
            let present = obj.attrs.contains_key(key);
            if applies && !present {
                violations.push(Violation::MissingApplicableKey {
                    object: obj.id.clone(),
                    key: key.clone(),
                });
            } else if !applies && present {
                violations.push(Violation::InapplicableKey {
                    object: obj.id.clone(),
                    key: key.clone(),
                });
            }
        }
    }
    if let Some(target) = &scene.target {
        if !ids.contains(target.as_str()) {
            violations.push(Violation::UnknownTarget(target.clone()));
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGenOptions {
    /// Probability that a scene is forced to contain a same-category distractor.
    pub p_overlap: f64,
}

impl Default for SceneGenOptions {
    fn default() -> Self {
        Self { p_overlap: 0.8 }
    }
}

fn has_category_overlap(objects: &[SceneObject]) -> bool {
    let mut seen = HashSet::new();
    objects
        .iter()
        .filter_map(SceneObject::category)
        .any(|c| !seen.insert(c))
}

fn sample_object(schema: &AttributeSchema, id: String, rng: &mut impl Rng) -> SceneObject {
    let category = schema
        .values(CATEGORY)
        .choose(rng)
        .expect("non-empty vocabulary")
        .clone();
    let mut attrs = BTreeMap::new();
    for key in schema.keys() {
        if key == CATEGORY {
            continue;
        }
        if schema.applies(key, &category) {
            let value = schema.values(key).choose(rng).expect("non-empty vocabulary");
            attrs.insert(key.clone(), value.clone());
        }
    }
    attrs.insert(CATEGORY.to_string(), category);
    SceneObject { id, attrs }
}

/// Samples a scene with objects `o1..oN` and a uniformly drawn target.
pub fn generate_scene(
    schema: &AttributeSchema,
    n_objects: usize,
    options: &SceneGenOptions,
    id: impl Into<String>,
    rng: &mut impl Rng,
) -> Result<Scene> {
    if !(MIN_OBJECTS..=MAX_OBJECTS).contains(&n_objects) {
        return Err(Error::ObjectCount(n_objects));
    }
    if !(0.0..=1.0).contains(&options.p_overlap) {
        return Err(Error::Parameter(format!(
            "p_overlap {} outside [0, 1]",
            options.p_overlap
        )));
    }
    let want_overlap = rng.gen_bool(options.p_overlap);
    let objects = loop {
        let objects: Vec<SceneObject> = (1..=n_objects)
            .map(|i| sample_object(schema, format!("o{i}"), rng))
            .collect();
        if !want_overlap || has_category_overlap(&objects) {
            break objects;
        }
    };
    let target = objects[rng.gen_range(0..n_objects)].id.clone();
    Ok(Scene {
        id: id.into(),
        objects,
        target: Some(target),
    })
}

pub fn scene_id(index: usize) -> String {
    format!("s-{index:06}")
}

/// `n_scenes` scenes whose sizes are uniform over `objects`. Scene `i`
/// depends only on `(seed, i)`.
pub fn generate_scene_set(
    schema: &AttributeSchema,
    n_scenes: usize,
    objects: RangeInclusive<usize>,
    options: &SceneGenOptions,
    seed: u64,
) -> Result<Vec<Scene>> {
    (0..n_scenes)
        .map(|i| {
            let mut rng = stream(seed, &[Purpose::Scene as u64, i as u64]);
            let n = rng.gen_range(objects.clone());
            generate_scene(schema, n, options, scene_id(i), &mut rng)
        })
        .collect()
}

pub fn save_scenes(scenes: &[Scene], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for scene in scenes {
        serde_json::to_writer(&mut out, scene)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a JSON Lines scene file, validating each scene against `schema`.
/// Blank lines are skipped.
pub fn load_scenes(path: &Path, schema: &AttributeSchema) -> Result<Vec<Scene>> {
    let reader = BufReader::new(File::open(path)?);
    let mut scenes = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let scene: Scene = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let report = validate_scene(&scene, schema);
        if !report.is_ok() {
            return Err(Error::InvalidScene {
                scene: scene.id.clone(),
                message: report.to_string(),
            });
        }
        scenes.push(scene);
    }
    Ok(scenes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scene_sets_are_prefix_stable() {
        let schema = AttributeSchema::standard();
        let opts = SceneGenOptions::default();
        let big = generate_scene_set(&schema, 40, 3..=9, &opts, 42).unwrap();
        let small = generate_scene_set(&schema, 10, 3..=9, &opts, 42).unwrap();
        assert_eq!(&big[..10], &small[..]);
        assert_eq!(big[7].id, "s-000007");
        assert!(big.iter().all(|s| (3..=9).contains(&s.objects.len())));
        assert_ne!(big, generate_scene_set(&schema, 40, 3..=9, &opts, 43).unwrap());
        assert!(generate_scene_set(&schema, 1, 2..=2, &opts, 0).is_err());
    }

    fn gen(n: usize, seed: u64) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        generate_scene(
            &AttributeSchema::standard(),
            n,
            &SceneGenOptions::default(),
            "s-000000",
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        let a = serde_json::to_string(&gen(3, 7)).unwrap();
        let b = serde_json::to_string(&gen(3, 7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(gen(3, 7).objects.len(), 3);
    }

    #[test]
    fn single_category_schema_forces_shared_category() {
        let keys = vec![CATEGORY.to_string(), "color".to_string()];
        let vocab = BTreeMap::from([
            (CATEGORY.to_string(), vec!["dog".to_string()]),
            ("color".to_string(), vec!["red".to_string(), "blue".to_string()]),
        ]);
        let schema = AttributeSchema::new(keys, vocab, BTreeMap::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scene =
            generate_scene(&schema, 4, &SceneGenOptions::default(), "s", &mut rng).unwrap();
        assert!(scene.objects.iter().all(|o| o.category() == Some("dog")));
    }

    #[test]
    fn target_is_member_and_scene_validates() {
        let scene = gen(6, 11);
        let target = scene.target.clone().unwrap();
        assert!(scene.objects.iter().any(|o| o.id == target));
        assert!(validate_scene(&scene, &AttributeSchema::standard()).is_ok());
    }

    #[test]
    fn bounds_are_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let schema = AttributeSchema::standard();
        let opts = SceneGenOptions::default();
        assert!(matches!(
            generate_scene(&schema, 2, &opts, "s", &mut rng),
            Err(Error::ObjectCount(2))
        ));
        assert!(generate_scene(&schema, 21, &opts, "s", &mut rng).is_err());
        assert!(generate_scene(&schema, 20, &opts, "s", &mut rng).is_ok());
    }

    #[test]
    fn many_generated_scenes_validate() {
        let schema = AttributeSchema::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for i in 0..300 {
            let n = rng.gen_range(MIN_OBJECTS..=MAX_OBJECTS);
            let s = generate_scene(&schema, n, &SceneGenOptions::default(), scene_id(i), &mut rng)
                .unwrap();
            let report = validate_scene(&s, &schema);
            assert!(report.is_ok(), "{report}");
        }
    }

    #[test]
    fn validation_reports_each_violation() {
        let schema = AttributeSchema::standard();
        let mut scene = gen(3, 7);
        assert!(validate_scene(&scene, &schema).is_ok());

        let mut small = scene.clone();
        small.objects.truncate(2);
        let report = validate_scene(&small, &schema);
        assert!(report.to_string().contains("object count < 3"));

        scene.objects[1]
            .attrs
            .insert("color".into(), "chartreuse".into());
        let report = validate_scene(&scene, &schema);
        assert_eq!(report.violations.len(), 1);
        let msg = report.to_string();
        assert!(msg.contains(&scene.objects[1].id) && msg.contains("color"), "{msg}");
    }

    #[test]
    fn applicability_violations() {
        let schema = AttributeSchema::standard();
        // "umbrella" is outside the row subset.
        let obj = SceneObject::new(
            "o1",
            [
                ("category", "umbrella"),
                ("color", "red"),
                ("size", "small"),
                ("side", "left"),
                ("row", "front"),
            ],
        );
        let mut scene = gen(3, 7);
        scene.objects[0] = obj;
        let report = validate_scene(&scene, &schema);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::InapplicableKey { key, .. } if key == "row")));
    }

    #[test]
    fn schema_rejects_missing_category() {
        let keys = vec!["color".to_string()];
        let vocab = BTreeMap::from([("color".to_string(), vec!["red".to_string()])]);
        assert!(AttributeSchema::new(keys, vocab, BTreeMap::new()).is_err());
    }

    #[test]
    fn file_round_trip_and_errors() {
        let schema = AttributeSchema::standard();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenes.jsonl");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scenes: Vec<Scene> = (0..100)
            .map(|i| {
                let n = rng.gen_range(3..=9);
                generate_scene(&schema, n, &SceneGenOptions::default(), scene_id(i), &mut rng)
                    .unwrap()
            })
            .collect();
        save_scenes(&scenes, &path).unwrap();
        assert_eq!(load_scenes(&path, &schema).unwrap(), scenes);

        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.contains(r#""attrs":{"category":"#));

        let mut lines: Vec<&str> = text.lines().take(5).collect();
        lines[2] = "{not json";
        std::fs::write(&path, lines.join("\n")).unwrap();
        let err = load_scenes(&path, &schema).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains(":3:"));

        std::fs::write(&path, "").unwrap();
        assert!(load_scenes(&path, &schema).unwrap().is_empty());

        let mut bad = scenes[0].clone();
        bad.target = Some("o99".into());
        save_scenes(&[bad], &path).unwrap();
        let err = load_scenes(&path, &schema).unwrap_err();
        assert!(err.to_string().contains("s-000000"), "{err}");
    }
}
