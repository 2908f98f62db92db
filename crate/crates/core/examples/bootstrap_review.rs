//! Rank unlabeled messages by similarity to each label, then walk the
//! two-annotator review queue through disagreement, consensus and export.
//!
//! `cargo run -p agenda-core --example bootstrap_review`

use agenda_core::backends::MockEmbedder;
use agenda_core::bootstrap::{rank_candidates, BootstrapConfig, ConsensusInput, DecisionInput, ReviewStore};
use agenda_core::{LabelSchema, Message};

fn main() -> agenda_core::Result<()> {
    let schema = LabelSchema::agenda_default();
    let corpus: Vec<Message> = (0..40).map(|i| Message::new(format!("u{i}"), format!("unlabeled post {i}"), "en")).collect();

    let cfg = BootstrapConfig { k_per_label: 3, sample_fraction: 1.0, ..BootstrapConfig::new(11) };
    let ranking = rank_candidates(&corpus, &schema, &MockEmbedder::new(32, 5), &cfg)?;
    println!("{} candidates queued, {} below the cutoff", ranking.selected.len(), ranking.below_cutoff.len());

    let dir = tempfile_dir();
    let mut store = ReviewStore::open(&dir, schema.clone())?;
    let round = store.add_round(&ranking, &corpus)?;

    let mut t = 0;
    for who in ["ana", "ben"] {
        while let Some(c) = store.queue().next_for(who).cloned() {
            let labels = if who == "ben" && c.id % 4 == 0 { vec!["Other".into()] } else { vec![c.suggested_label.clone()] };
            t += 1;
            store.record_decision(c.id, &DecisionInput { annotator: who.into(), labels, round: None, version: c.version }, t)?;
        }
    }
    let open = store.queue().disagreements(round);
    println!("disagreements: {open:?}");
    for id in open {
        let c = store.queue().get(id).unwrap().clone();
        let input = ConsensusInput { annotator: "ana".into(), labels: vec![c.suggested_label], discard: false, version: c.version };
        t += 1;
        store.resolve(id, &input, t)?;
    }

    let stats = store.queue().stats(round)?;
    if let Some(a) = &stats.agreement {
        println!("kappa {:.3} over {} items", a.kappa, a.n_items);
    }
    let export = store.queue().export_labeled(round)?;
    println!("exported {} labeled messages (log in {})", export.messages.len(), dir.display());
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("agenda-review-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}
