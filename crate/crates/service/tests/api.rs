use std::sync::Arc;

use agenda_core::backends::{MockEmbedder, MockScorer, MockTranslator};
use agenda_core::dataprep::render_hypothesis;
use agenda_core::LabelSchema;
use agenda_service::{app, backend_router, Backends, ServiceConfig};
use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

const FIXTURE: &str = "Every vote counts. Go vote on behalf of a citizen.";

fn backends() -> Backends {
    let s = LabelSchema::agenda_default();
    let mut scorer = MockScorer::new(7).failing_on("backend down");
    for l in s.ids() {
        let h = render_hypothesis(&s, l, "en").unwrap();
        scorer = scorer.with_score(FIXTURE, &h, if l == "Engagement" { 0.92 } else { 0.05 });
    }
    Backends {
        scorer: Some(Arc::new(scorer)),
        embedder: Some(Arc::new(MockEmbedder::new(32, 7))),
        translator: Some(Arc::new(
            MockTranslator::new().with_translation("Every vote counts.", "en", "fr", "Chaque vote compte."),
        )),
    }
}

fn service(dir: &std::path::Path) -> Router {
    let mut cfg = ServiceConfig::new(dir, LabelSchema::agenda_default());
    cfg.backends = backends();
    app(cfg).unwrap()
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, if b.is_empty() { Value::Null } else { serde_json::from_slice(&b).unwrap() })
}

fn corpus() -> Value {
    let texts = [
        ("c01", "Go vote on Sunday, every vote counts for the candidate.", "en"),
        ("c02", "Share this post and change your profile picture in support.", "en"),
        ("c03", "Join the peaceful march downtown this Saturday.", "en"),
        ("c04", "Boycott the election, stay home to protest the status quo.", "en"),
        ("c05", "Nice weather today.", "en"),
        ("c06", "Votez dimanche, chaque vote compte.", "fr"),
    ];
    json!(texts
        .iter()
        .map(|(id, text, lang)| json!({ "id": id, "text": text, "lang": lang }))
        .collect::<Vec<_>>())
}

async fn seeded(app: &Router) {
    let (s, v) = json_call(
        app,
        "POST",
        "/bootstrap/run",
        Some(json!({ "k_per_label": 2, "sample_fraction": 1.0, "seed": 3, "messages": corpus() })),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["round"], 1);
    assert_eq!(v["n_candidates"], 10);
}

#[tokio::test]
async fn health_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let app = service(dir.path());
    let (s, v) = json_call(&app, "GET", "/healthz", None).await;
    assert_eq!((s, v["status"].as_str()), (StatusCode::OK, Some("ok")));
    let (_, v) = json_call(&app, "GET", "/schema", None).await;
    assert_eq!(v["labels"].as_array().unwrap().len(), 6);
}

#[tokio::test]
async fn classify_contract() {
    let dir = tempfile::tempdir().unwrap();
    let app = service(dir.path());
    let (s, v) = json_call(&app, "POST", "/classify", Some(json!({ "messages": [], "tau": 0.5 }))).await;
    assert_eq!((s, v), (StatusCode::OK, json!([])));

    let msg = json!({ "id": "m1", "text": FIXTURE, "lang": "en" });
    let (s, v) = json_call(&app, "POST", "/classify", Some(json!({ "messages": [msg], "tau": 0.5 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["labels"], json!(["Engagement"]));
    assert_eq!(v[0]["confidences"]["Engagement"], 0.92);

    let cal = json!({ "messages": [msg], "calibration": {
        "tau": 0.95, "objective": 1.0, "sweep_step": 0.01, "grid_min": 0.3, "grid_max": 0.99,
        "tie_break": "smallest", "n_messages": 1, "curve": [] } });
    let (_, v) = json_call(&app, "POST", "/classify", Some(cal)).await;
    assert_eq!(v[0]["labels"], json!(["Other"]));

    let (s, _) = json_call(&app, "POST", "/classify", Some(json!({ "messages": [msg], "tau": 0.2 }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = json_call(&app, "POST", "/classify", Some(json!({ "messages": [msg] }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = json_call(&app, "POST", "/classify", Some(json!({ "msgs": [] }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", "/classify", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let bad_gold = json!({ "id": "m1", "text": "x", "lang": "en", "gold": ["Voting"] });
    let (s, v) = json_call(&app, "POST", "/classify", Some(json!({ "messages": [bad_gold], "tau": 0.5 }))).await;
    assert_eq!((s, v["kind"].as_str()), (StatusCode::BAD_REQUEST, Some("unknown_label")));

    let down = json!({ "id": "m1", "text": "backend down", "lang": "en" });
    let (s, v) = json_call(&app, "POST", "/classify", Some(json!({ "messages": [down], "tau": 0.5 }))).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert!(v["error"].as_str().unwrap().contains("`m1`"));

    let sim = json!({ "messages": [msg], "tau": 0.3, "mode": "similarity", "source": "label_name" });
    let (s, v) = json_call(&app, "POST", "/classify", Some(sim)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert!(!v[0]["labels"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn missing_backend_is_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(ServiceConfig::new(dir.path(), LabelSchema::agenda_default())).unwrap();
    let msg = json!({ "id": "m1", "text": "x", "lang": "en" });
    let (s, _) = json_call(&app, "POST", "/classify", Some(json!({ "messages": [msg], "tau": 0.5 }))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    let (s, _) = json_call(&app, "POST", "/bootstrap/run", Some(json!({ "messages": corpus() }))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
}

async fn next(app: &Router, who: &str) -> (StatusCode, Value) {
    json_call(app, "GET", &format!("/annotation/next?annotator={who}"), None).await
}

async fn post_decision(app: &Router, c: &Value, who: &str, labels: Value) -> (StatusCode, Value) {
    let id = c["id"].as_u64().unwrap();
    json_call(
        app,
        "POST",
        &format!("/annotation/{id}/decision"),
        Some(json!({ "annotator": who, "labels": labels, "version": c["version"] })),
    )
    .await
}

#[tokio::test]
async fn review_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let app = service(dir.path());
    let (s, _) = next(&app, "ann1").await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    seeded(&app).await;

    let (s, first) = next(&app, "ann1").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(first["rank"], 1);
    assert_eq!(first["status"], "pending");
    assert!(first["definition"].as_str().unwrap().starts_with("The message encourages"));
    let (_, same) = next(&app, "ann2").await;
    assert_eq!(same["id"], first["id"]);

    // ann1 confirms everything; ann2 reassigns the first candidate
    let suggested = first["suggested_label"].clone();
    let (s, v) = post_decision(&app, &first, "ann1", json!([suggested])).await;
    assert_eq!((s, v["status"].as_str()), (StatusCode::OK, Some("confirmed")));
    let (s, _) = post_decision(&app, &first, "ann2", json!(["Other"])).await;
    assert_eq!(s, StatusCode::CONFLICT, "stale version");
    let (s, _) = json_call(
        &app,
        "POST",
        &format!("/annotation/{}/decision", first["id"]),
        Some(json!({ "annotator": "ann1", "labels": ["Other"], "version": v["version"] })),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT, "duplicate decision");
    let (s, _) = json_call(
        &app,
        "POST",
        "/annotation/999/decision",
        Some(json!({ "annotator": "ann1", "labels": ["Other"], "version": 0 })),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (_, c) = next(&app, "ann2").await;
    let (s, _) = post_decision(&app, &c, "ann2", json!(["Voting"])).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post_decision(&app, &c, "ann2", json!(["Other"])).await;
    assert_eq!(s, StatusCode::OK);

    loop {
        let (s, c) = next(&app, "ann1").await;
        if s == StatusCode::NO_CONTENT {
            break;
        }
        let (s, _) = post_decision(&app, &c, "ann1", json!([c["suggested_label"]])).await;
        assert_eq!(s, StatusCode::OK);
    }
    loop {
        let (s, c) = next(&app, "ann2").await;
        if s == StatusCode::NO_CONTENT {
            break;
        }
        let (s, _) = post_decision(&app, &c, "ann2", json!([c["suggested_label"]])).await;
        assert_eq!(s, StatusCode::OK);
    }

    let (_, d) = json_call(&app, "GET", "/annotation/disagreements", None).await;
    assert_eq!(d["ids"], json!([first["id"]]));
    let (s, v) = json_call(&app, "GET", "/export", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["disagreements"], json!([first["id"]]));

    let (_, st) = json_call(&app, "GET", "/stats/agreement", None).await;
    assert_eq!(st["agreement"]["n_items"], 10);
    assert_eq!(st["agreement"]["percent_agreement"], 0.9);
    assert_eq!(st["disagreements"], 1);

    let cand = &d["candidates"][0];
    let (s, _) = json_call(
        &app,
        "POST",
        &format!("/annotation/{}/consensus", first["id"]),
        Some(json!({ "annotator": "ann1", "labels": [suggested], "version": cand["version"] })),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let (_, d) = json_call(&app, "GET", "/annotation/disagreements", None).await;
    assert_eq!(d["ids"], json!([]));

    let (s, ex) = json_call(&app, "GET", "/export?round=1", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ex["agreement"]["percent_agreement"], 0.9);
    let msgs = ex["messages"].as_array().unwrap();
    assert!(!msgs.is_empty());
    assert!(msgs.iter().all(|m| !m["gold"].as_array().unwrap().is_empty()));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn racing_decisions_admit_one() {
    let dir = tempfile::tempdir().unwrap();
    let app = service(dir.path());
    seeded(&app).await;
    let (_, c) = next(&app, "ann1").await;
    let tasks: Vec<_> = (0..8)
        .map(|i| {
            let app = app.clone();
            let c = c.clone();
            let label = if i % 2 == 0 { json!(["Other"]) } else { json!([c["suggested_label"]]) };
            tokio::spawn(async move { post_decision(&app, &c, "ann1", label).await.0 })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        let s = t.await.unwrap();
        if s.is_success() {
            ok += 1;
        } else {
            assert_eq!(s, StatusCode::CONFLICT);
        }
    }
    assert_eq!(ok, 1);
}

#[tokio::test]
async fn restart_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (stats, export) = {
        let app = service(dir.path());
        seeded(&app).await;
        for who in ["ann1", "ann2"] {
            while let (StatusCode::OK, c) = next(&app, who).await {
                post_decision(&app, &c, who, json!([c["suggested_label"]])).await;
            }
        }
        (call(&app, "GET", "/stats/agreement", None).await, call(&app, "GET", "/export", None).await)
    };
    let app = service(dir.path());
    assert_eq!(call(&app, "GET", "/stats/agreement", None).await, stats);
    assert_eq!(call(&app, "GET", "/export", None).await, export);
    assert_eq!(stats.0, StatusCode::OK);
}

#[tokio::test]
async fn backend_protocol_routes() {
    let app = backend_router(backends());
    let body = json!({ "pairs": [
        { "premise": FIXTURE, "hypothesis": "The text is about something else.", "lang": "en" },
        { "premise": "backend down", "hypothesis": "h", "lang": "en" } ] });
    let (s, v) = json_call(&app, "POST", "/v1/score", Some(body)).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(v["index"], 1);
    let ok = json!({ "pairs": [{ "premise": FIXTURE, "hypothesis": "The text is about something else.", "lang": "en" }] });
    let (s, v) = json_call(&app, "POST", "/v1/score", Some(ok)).await;
    assert_eq!((s, v["scores"][0].as_f64()), (StatusCode::OK, Some(0.05)));
    let (s, v) = json_call(&app, "POST", "/v1/translate", Some(json!({ "texts": ["Every vote counts."], "src": "en", "tgt": "fr" }))).await;
    assert_eq!((s, v["translations"][0].as_str()), (StatusCode::OK, Some("Chaque vote compte.")));
    let (s, v) = json_call(&app, "POST", "/v1/embed", Some(json!({ "texts": [{ "text": "a b", "lang": "en" }] }))).await;
    assert_eq!((s, v["embeddings"][0].as_array().unwrap().len()), (StatusCode::OK, 32));
    let (s, _) = json_call(&app, "POST", "/v1/embed", Some(json!({ "texts": [{ "text": " ", "lang": "en" }] }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}
