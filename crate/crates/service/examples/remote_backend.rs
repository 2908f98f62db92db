//! Expose a scorer over the `/v1` backend protocol and consume it through
//! the remote client, as a model server and a classifier would.
//!
//! `cargo run -p agenda-service --example remote_backend`

use std::sync::{mpsc, Arc};

use agenda_core::backends::{BackendDescriptor, MockEmbedder, MockScorer, MockTranslator};
use agenda_core::classify::{predict, score_messages};
use agenda_core::{LabelSchema, Message};
use agenda_service::{backend_router, Backends};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let backends = Backends {
        scorer: Some(Arc::new(MockScorer::new(9))),
        embedder: Some(Arc::new(MockEmbedder::new(16, 9))),
        translator: Some(Arc::new(
            MockTranslator::with_pairs([("en", "fr")]).with_translation("Every vote counts.", "en", "fr", "Chaque vote compte."),
        )),
    };
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, backend_router(backends)).await.unwrap();
        });
    });
    let addr = rx.recv()?;
    println!("backend protocol on http://{addr}");

    let remote = BackendDescriptor::remote(format!("http://{addr}"));
    let scorer = remote.build_scorer()?;
    let schema = LabelSchema::agenda_default();
    let msgs = vec![
        Message::new("m1", "Sign the petition before midnight.", "en"),
        Message::new("m2", "Ne votez pas, tout est joué d'avance.", "fr"),
    ];
    let matrix = score_messages(&msgs, &schema, scorer.as_ref())?;
    for p in predict(&matrix, &schema, 0.6)? {
        println!("{}\t{:?}", p.id, p.labels);
    }
    let fr = remote.build_translator()?.translate("Every vote counts.", "en", "fr")?;
    println!("translated: {fr}");
    Ok(())
}
