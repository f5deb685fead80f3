//! Human-readable per-turn trace of an episode.

use std::fmt::Write;

use crate::episode::Episode;
use crate::qa::render_question;
use crate::world::Scene;

fn describe(scene: Option<&Scene>, id: &str) -> String {
    let Some(obj) = scene.and_then(|s| s.object(id)) else {
        return id.to_string();
    };
    let attrs: Vec<&str> = obj.attrs.values().map(String::as_str).collect();
    format!("{id} ({})", attrs.join(" "))
}

/// Per turn: the beam with scores, internal answers and simulated posteriors,
/// a marker on the asked question, then the answer and the resulting leader.
pub fn render_trace(ep: &Episode, scene: Option<&Scene>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "episode {} [{}] target {} seed {}#{}",
        ep.scene_id,
        ep.strategy,
        describe(scene, &ep.target_id),
        ep.master_seed,
        ep.episode_index
    );
    for (t, turn) in ep.turns.iter().enumerate() {
        let _ = writeln!(
            out,
            "\nturn {}  hypothesis {}",
            t + 1,
            describe(scene, &turn.hypothesis_before)
        );
        let width = turn
            .beam
            .iter()
            .map(|b| render_question(&b.question).len())
            .max()
            .unwrap_or(0)
            .max("question".len());
        let _ = writeln!(
            out,
            "     #  {:<width$}  {:>7}  {:<8}  {:>8}",
            "question", "score", "internal", "p*"
        );
        for (i, item) in turn.beam.iter().enumerate() {
            let mark = if i == turn.chosen_index { ">" } else { " " };
            let _ = writeln!(
                out,
                "   {mark} {i}  {:<width$}  {:>7.3}  {:<8}  {:>8.4}",
                render_question(&item.question),
                item.score,
                turn.internal_answers[i].as_str(),
                turn.simulated_phyp[i],
            );
        }
        let p_after = turn
            .belief_after
            .prob_of(&turn.hypothesis_after)
            .unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "   asked \"{}\" -> {}; leader {} p={p_after:.4}{}",
            render_question(turn.question()),
            turn.external_answer,
            turn.hypothesis_after,
            if turn.gains_tied { "  [tied gains]" } else { "" }
        );
    }
    let _ = writeln!(
        out,
        "\nfinal guess {} -> {}",
        describe(scene, &ep.final_guess),
        if ep.success { "success" } else { "failure" }
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::StrategyKind;
    use crate::strategy::{run_episode, GameConfig};
    use crate::streams::EpisodeSeed;
    use crate::world::{generate_scene, AttributeSchema, SceneGenOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trace_has_one_block_per_turn() {
        let schema = AttributeSchema::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scene = generate_scene(&schema, 4, &SceneGenOptions::default(), "s", &mut rng).unwrap();
        for strategy in [StrategyKind::ConfirmIt, StrategyKind::Greedy] {
            let ep = run_episode(&scene, &schema, strategy, &GameConfig::default(), EpisodeSeed::new(1, 0)).unwrap();
            let text = render_trace(&ep, Some(&scene));
            assert_eq!(text.matches("\nturn ").count(), 5);
            assert_eq!(text, render_trace(&ep, Some(&scene)));
            let beam_rows = text.lines().filter(|l| l.starts_with("   > ") || l.starts_with("     0") || l.starts_with("     1") || l.starts_with("     2")).count();
            let width = if strategy == StrategyKind::Greedy { 1 } else { 3 };
            assert_eq!(beam_rows, 5 * width);
        }
    }
}
