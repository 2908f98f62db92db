//! Score messages against every label hypothesis, calibrate tau on a dev
//! set, then predict with fallback to `Other`.
//!
//! `cargo run -p agenda-core --example zero_shot`

use agenda_core::backends::MockScorer;
use agenda_core::classify::{calibrate_threshold, predict, score_messages};
use agenda_core::dataprep::render_hypothesis;
use agenda_core::{Dataset, LabelSchema, Message};

fn main() -> agenda_core::Result<()> {
    let schema = LabelSchema::agenda_default();
    let hyp = |label: &str| render_hypothesis(&schema, label, "en").unwrap();

    let dev = vec![
        Message::new("d1", "Go vote on Sunday, every ballot matters.", "en").with_gold(["Engagement"]),
        Message::new("d2", "Stay home, the election is a farce.", "en").with_gold(["Disengagement"]),
        Message::new("d3", "Lovely sunset over the harbour.", "en").with_gold(["Other"]),
    ];
    // Pinned scores stand in for what a trained entailment model would say;
    // anything unpinned falls back to a hash of (premise, hypothesis).
    let pinned = [(0, "Engagement", 0.91), (1, "Disengagement", 0.84), (1, "Other", 0.40), (2, "Other", 0.55)];
    let mut scorer = MockScorer::new(0);
    for (i, m) in dev.iter().enumerate() {
        for label in schema.ids() {
            let s = pinned.iter().find(|p| p.0 == i && p.1 == label).map_or(0.05, |p| p.2);
            scorer = scorer.with_score(&m.text, &hyp(label), s);
        }
    }

    let dev = Dataset::new(dev, &schema)?;
    let matrix = score_messages(dev.messages(), &schema, &scorer)?;
    let cal = calibrate_threshold(&matrix, &dev.gold_sets()?, &schema, 0.01)?;
    println!("calibrated tau {:.2} (dev weighted F1 {:.3})", cal.tau, cal.objective);

    for p in predict(&matrix, &schema, cal.tau)? {
        println!("{}\t{:?}", p.id, p.labels);
    }
    Ok(())
}
