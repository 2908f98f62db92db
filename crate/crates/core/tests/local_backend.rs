#![cfg(feature = "local")]

use std::path::PathBuf;

use agenda_core::backends::local::LocalModel;
use agenda_core::backends::{
    BackendDescriptor, BackendError, EmbedRequest, Embedder, ScoreRequest, Scorer,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

// Reference values come from running the same graphs through the ONNX
// reference evaluator with the Python `tokenizers` package.
const EN_PAIR: (&str, &str, f64) = (
    "Every vote counts. Go vote on behalf of a citizen.",
    "The text is about something else.",
    0.5442995442045058,
);
const FR_PAIR: (&str, &str, f64) = (
    "Chaque vote compte.",
    "Le texte parle d'autre chose.",
    0.5084154925568733,
);
const EMBED_TEXT: &str = "every vote counts";
const EMBED_REF: [f64; 8] = [
    -0.7862127423286438,
    0.4117003381252289,
    -0.007260489277541637,
    0.22499620914459229,
    -0.9725781679153442,
    -0.9454463720321655,
    0.004560327623039484,
    -0.08924131840467453,
];

#[test]
fn scorer_matches_reference_runtime() {
    let model = LocalModel::load(fixture("tiny_nli"), 4).unwrap();
    for (p, h, want) in [EN_PAIR, FR_PAIR] {
        let got = model.score(p, h, "en").unwrap().value();
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }
}

#[test]
fn padded_batches_equal_single_calls() {
    let model = LocalModel::load(fixture("tiny_nli"), 2).unwrap();
    let reqs = vec![
        ScoreRequest::new(EN_PAIR.0, EN_PAIR.1, "en"),
        ScoreRequest::new(FR_PAIR.0, FR_PAIR.1, "fr"),
        ScoreRequest::new("go vote", "The text is about something else.", "en"),
    ];
    let batch = model.score_batch(&reqs).unwrap();
    assert_eq!(batch.len(), 3);
    for (r, b) in reqs.iter().zip(&batch) {
        let single = model.score(&r.premise, &r.hypothesis, &r.lang).unwrap().value();
        assert!((single - b.value()).abs() < 1e-6);
    }
    assert!(model.score_batch(&[]).unwrap().is_empty());
}

#[test]
fn embedder_mean_pools_token_embeddings() {
    let model = LocalModel::load(fixture("tiny_embed"), 8).unwrap();
    let v = model.embed(EMBED_TEXT, "en").unwrap();
    assert_eq!(v.dim(), 8);
    for (g, w) in v.values().iter().zip(EMBED_REF) {
        assert!((g - w).abs() < 1e-5, "{g} vs {w}");
    }
    let batch = model
        .embed_batch(&[
            EmbedRequest { text: EMBED_TEXT.into(), lang: "en".into() },
            EmbedRequest { text: "le texte parle d autre chose".into(), lang: "fr".into() },
        ])
        .unwrap();
    for (g, w) in batch[0].values().iter().zip(EMBED_REF) {
        assert!((g - w).abs() < 1e-5);
    }
}

#[test]
fn task_mismatch_and_bad_dirs() {
    let nli = LocalModel::load(fixture("tiny_nli"), 1).unwrap();
    assert!(matches!(nli.embed("x", "en"), Err(BackendError::Unsupported(_))));
    assert!(matches!(
        LocalModel::load(fixture("missing"), 1),
        Err(BackendError::Unavailable(_))
    ));
    assert!(nli.score("", "h", "en").is_err());
}

#[test]
fn descriptor_builds_local_backends() {
    let d = BackendDescriptor::local(fixture("tiny_nli"));
    let scorer = d.build_scorer().unwrap();
    let p = scorer.score(EN_PAIR.0, EN_PAIR.1, "en").unwrap().value();
    assert!((p - EN_PAIR.2).abs() < 1e-5);
    assert!(d.build_translator().is_err());
}
