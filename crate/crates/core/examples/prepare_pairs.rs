//! NLI binarization, entailment pair generation and translation mixing.
//!
//! `cargo run -p agenda-core --example prepare_pairs`

use agenda_core::backends::MockTranslator;
use agenda_core::dataprep::{binarize_nli, make_pairs, mix_translations, MixConfig, NliExample, PairGenConfig};
use agenda_core::{LabelSchema, Message};

fn main() -> agenda_core::Result<()> {
    let nli: Vec<NliExample> = serde_json::from_str(
        r#"[
            {"premise": "A man plays guitar on stage.", "hypothesis": "Someone makes music.", "label": "entailment", "lang": "en"},
            {"premise": "A man plays guitar on stage.", "hypothesis": "The man is asleep.", "label": "contradiction", "lang": "en"},
            {"premise": "Deux enfants courent.", "hypothesis": "Les enfants sont frères.", "label": "neutral", "lang": "fr"}
        ]"#,
    )
    .expect("literal NLI rows");
    for pair in nli.into_iter().map(binarize_nli) {
        println!("{:?}\t{}", pair.verdict, pair.hypothesis);
    }

    let schema = LabelSchema::agenda_default();
    let msgs = vec![
        Message::new("m1", "Every vote counts. Register before Friday!", "en").with_gold(["Engagement"]),
        Message::new("m2", "Boycott the hearings, they are rigged.", "en").with_gold(["Disengagement", "ViolentAction"]),
        Message::new("m3", "Nice weather for the parade today.", "en").with_gold(["Other"]),
    ];
    let pairs = make_pairs(&msgs, &schema, &PairGenConfig { negatives_per_positive: 2, seed: 42 })?;
    println!("\n{} pairs from {} messages", pairs.len(), msgs.len());
    for p in &pairs {
        println!("{:<14} {:?}\t{}", p.label_id.as_deref().unwrap_or("-"), p.verdict, p.hypothesis);
    }

    let mt = MockTranslator::with_pairs([("en", "fr")])
        .with_translation("Every vote counts. Register before Friday!", "en", "fr", "Chaque vote compte. Inscrivez-vous avant vendredi !");
    let (mixed, report) = mix_translations(&pairs, &mt, &MixConfig::new("fr", 7))?;
    println!("\nreplaced {} of {} pairs with French translations", report.selected.len(), mixed.len());
    for i in &report.selected {
        println!("  #{i}: {}", mixed[*i].premise);
    }
    Ok(())
}
