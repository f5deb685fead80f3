use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use refgame_core::episode::{load_episodes, save_episodes};
use refgame_core::guesser::{init_belief, simulate_update, update_belief};
use refgame_core::qa::question_universe;
use refgame_core::scalar::ratio;
use refgame_core::strategy::{run_episode, select_confirm_it};
use refgame_core::streams::{stream, Purpose};
use refgame_core::world::{generate_scene, SceneGenOptions};
use refgame_core::{
    Answer, AttributeSchema, Belief, EpisodeSeed, ExactBelief, GameConfig, LikelihoodParams,
    NoiseParams, PolicyParams, Question, QuestionGenerator, Scene, StrategyKind,
};

fn scene(seed: u64, n: usize) -> Scene {
    let mut rng = stream(seed, &[Purpose::Scene as u64]);
    generate_scene(&AttributeSchema::standard(), n, &SceneGenOptions::default(), "p", &mut rng).unwrap()
}

fn facts(picks: &[(usize, usize)]) -> Vec<(Question, Answer)> {
    let universe = question_universe(&AttributeSchema::standard());
    picks
        .iter()
        .map(|(q, a)| (universe[q % universe.len()].clone(), Answer::ALL[a % 3]))
        .collect()
}

fn apply(
    scene: &Scene,
    facts: &[(Question, Answer)],
    params: &LikelihoodParams<f64>,
) -> Belief {
    let schema = AttributeSchema::standard();
    facts.iter().fold(init_belief(scene), |b, (q, a)| {
        update_belief(&b, q, *a, scene, &schema, params).unwrap()
    })
}

fn fact_picks() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..64, 0usize..3), 0..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distinct_facts_commute_exactly(
        seed in any::<u64>(),
        n in 3usize..=6,
        picks in fact_picks(),
        shift in 0usize..6,
    ) {
        let s = scene(seed, n);
        let schema = AttributeSchema::standard();
        let mut fs = facts(&picks);
        fs.sort_by(|a, b| a.0.cmp(&b.0));
        fs.dedup_by(|a, b| a.0 == b.0);
        let params = LikelihoodParams::new(ratio(1, 10)).unwrap();
        let run = |order: &[(Question, Answer)]| -> ExactBelief {
            order.iter().fold(init_belief(&s), |b, (q, a)| {
                update_belief(&b, q, *a, &s, &schema, &params).unwrap()
            })
        };
        let forward = run(&fs);
        let mut rotated = fs.clone();
        if !rotated.is_empty() {
            let k = shift % rotated.len();
            rotated.rotate_left(k);
        }
        rotated.reverse();
        let backward = run(&rotated);
        prop_assert_eq!(forward.probs(), backward.probs());
    }

    #[test]
    fn beliefs_stay_normalized(
        seed in any::<u64>(),
        n in 3usize..=9,
        picks in fact_picks(),
        eps in 0.01f64..0.6,
    ) {
        let b = apply(&scene(seed, n), &facts(&picks), &LikelihoodParams::new(eps).unwrap());
        let total: f64 = b.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "sum {}", total);
        prop_assert!(b.probs().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn repeated_fact_is_a_no_op(
        seed in any::<u64>(),
        n in 3usize..=9,
        picks in prop::collection::vec((0usize..64, 0usize..3), 1..6),
    ) {
        let params = LikelihoodParams::new(0.1).unwrap();
        let s = scene(seed, n);
        let fs = facts(&picks);
        let once = apply(&s, &fs, &params);
        let (q, a) = fs.last().unwrap();
        let again = update_belief(&once, q, *a, &s, &AttributeSchema::standard(), &params).unwrap();
        prop_assert_eq!(once, again);
    }

    #[test]
    fn simulation_matches_the_real_update(
        seed in any::<u64>(),
        n in 3usize..=9,
        picks in fact_picks(),
        probe in (0usize..64, 0usize..3),
    ) {
        let params = LikelihoodParams::new(0.1).unwrap();
        let schema = AttributeSchema::standard();
        let s = scene(seed, n);
        let b = apply(&s, &facts(&picks), &params);
        let (q, a) = facts(&[probe]).pop().unwrap();
        let simulated = simulate_update(&b, &q, a, &s, &schema, &params).unwrap();
        let h = b.argmax();
        let updated = update_belief(&b, &q, a, &s, &schema, &params).unwrap();
        prop_assert_eq!(simulated.to_bits(), updated.probs()[h].to_bits());
    }

    #[test]
    fn beams_are_sorted_distinct_and_full(
        seed in any::<u64>(),
        n in 3usize..=9,
        picks in fact_picks(),
        beam in 1usize..=26,
        tau in 0.0f64..2.0,
    ) {
        let schema = AttributeSchema::standard();
        let policy = PolicyParams { tau, ..PolicyParams::default() };
        let qgen = QuestionGenerator::new(&schema, policy).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items = qgen.propose_beam(&facts(&picks), &scene(seed, n), &schema, beam, &mut rng).unwrap();
        prop_assert_eq!(items.len(), beam);
        prop_assert!(items.windows(2).all(|w| w[0].score >= w[1].score));
        let mut qs: Vec<&Question> = items.iter().map(|i| &i.question).collect();
        qs.sort();
        qs.dedup();
        prop_assert_eq!(qs.len(), beam);
    }

    #[test]
    fn rerank_takes_the_first_maximum(
        seed in any::<u64>(),
        n in 3usize..=9,
        picks in fact_picks(),
        beam in 1usize..=8,
    ) {
        let schema = AttributeSchema::standard();
        let s = scene(seed, n);
        let params = LikelihoodParams::new(0.1).unwrap();
        let b = apply(&s, &facts(&picks), &params);
        let qgen = QuestionGenerator::new(&schema, PolicyParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items = qgen.propose_beam(&[], &s, &schema, beam, &mut rng).unwrap();
        let sel = select_confirm_it(&items, &b, &s, &schema, &NoiseParams::default(), &params, &mut rng).unwrap();
        let best = sel.simulated_phyp[sel.chosen_index];
        prop_assert!(sel.simulated_phyp.iter().all(|p| *p <= best));
        prop_assert!(sel.simulated_phyp[..sel.chosen_index].iter().all(|p| *p < best));
        prop_assert_eq!(sel.hypothesis, b.argmax());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn episodes_round_trip_bit_exact(seed in any::<u64>(), n in 3usize..=9, k in 0usize..4) {
        let schema = AttributeSchema::standard();
        let strategy = StrategyKind::ALL[k];
        let config = GameConfig { master_seed: seed, ..GameConfig::default() };
        let ep = run_episode(&scene(seed, n), &schema, strategy, &config, EpisodeSeed::new(seed, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        save_episodes([&ep], &path).unwrap();
        let back = load_episodes(&path).unwrap();
        prop_assert_eq!(back.len(), 1);
        for (a, b) in ep.turns.iter().zip(&back[0].turns) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.simulated_phyp), bits(&b.simulated_phyp));
        }
        // beam scores are written rounded, so the file is the fixed point
        let again = dir.path().join("again.jsonl");
        save_episodes(&back, &again).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
        let mut rounded = ep.clone();
        for t in &mut rounded.turns {
            for item in &mut t.beam {
                item.score = (item.score * 1e3).round() / 1e3;
            }
        }
        prop_assert_eq!(&back[0], &rounded);
    }
}
