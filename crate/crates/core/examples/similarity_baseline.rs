//! Embedding similarity baseline: cosine between the message and each
//! label's hypothesis, thresholded like entailment scores.
//!
//! `cargo run -p agenda-core --example similarity_baseline`

use agenda_core::backends::MockEmbedder;
use agenda_core::classify::{classify_by_similarity, SimilaritySource};
use agenda_core::{LabelSchema, Message};

fn main() -> agenda_core::Result<()> {
    let schema = LabelSchema::agenda_default();
    let msgs = vec![
        Message::new("m1", "Join the march downtown at noon.", "en"),
        Message::new("m2", "Rejoignez la marche à midi.", "fr"),
    ];
    let embedder = MockEmbedder::new(64, 3);
    for source in [SimilaritySource::Hypothesis, SimilaritySource::LabelName] {
        let (matrix, preds) = classify_by_similarity(&msgs, &schema, &embedder, source, 0.30)?;
        println!("{source:?}");
        for (row, p) in matrix.rows().iter().zip(&preds) {
            let best = row.scores.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            println!("  {} best {} ({:.3}) -> {:?}", row.id, best.0, best.1, p.labels);
        }
    }
    Ok(())
}
