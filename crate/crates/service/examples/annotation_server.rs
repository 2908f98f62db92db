//! The annotation API on mock backends.
//!
//! Without arguments this drives one bootstrap round in-process and prints
//! each response. With an address it serves until Ctrl-C:
//!
//! ```text
//! cargo run -p agenda-service --example annotation_server
//! cargo run -p agenda-service --example annotation_server -- 127.0.0.1:8080
//! curl -s localhost:8080/annotation/next?annotator=ana
//! ```

use std::sync::Arc;

use agenda_core::backends::{MockEmbedder, MockScorer};
use agenda_core::LabelSchema;
use agenda_service::{app, serve_blocking, Backends, ServiceConfig};
use axum::body::{to_bytes, Body};
use axum::http::Request;
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let v = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    println!("{method} {uri} -> {status}");
    v
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data_dir = std::env::temp_dir().join(format!("agenda-service-{}", std::process::id()));
    let mut cfg = ServiceConfig::new(&data_dir, LabelSchema::agenda_default());
    cfg.backends = Backends {
        scorer: Some(Arc::new(MockScorer::new(1))),
        embedder: Some(Arc::new(MockEmbedder::new(32, 1))),
        translator: None,
    };
    cfg.cors = true;
    let router = app(cfg)?;

    if let Some(addr) = std::env::args().nth(1) {
        println!("serving {} on {addr}", data_dir.display());
        return Ok(serve_blocking(addr.parse()?, router)?);
    }

    tokio::runtime::Runtime::new()?.block_on(async {
        let corpus: Vec<Value> =
            (0..30).map(|i| json!({ "id": format!("c{i}"), "text": format!("post number {i}"), "lang": "en" })).collect();
        let run = call(&router, "POST", "/bootstrap/run",
            json!({ "k_per_label": 2, "sample_fraction": 1.0, "seed": 3, "messages": corpus }).into()).await;
        println!("  {run}");

        for who in ["ana", "ben"] {
            loop {
                let c = call(&router, "GET", &format!("/annotation/next?annotator={who}"), None).await;
                if c.is_null() {
                    break;
                }
                let labels = if who == "ben" && c["id"].as_u64() == Some(1) { json!(["Other"]) } else { json!([c["suggested_label"]]) };
                call(&router, "POST", &format!("/annotation/{}/decision", c["id"]),
                    json!({ "annotator": who, "labels": labels, "version": c["version"] }).into()).await;
            }
        }
        let open = call(&router, "GET", "/annotation/disagreements", None).await;
        for c in open["candidates"].as_array().into_iter().flatten() {
            call(&router, "POST", &format!("/annotation/{}/consensus", c["id"]),
                json!({ "annotator": "ana", "discard": true, "version": c["version"] }).into()).await;
        }
        println!("  {}", call(&router, "GET", "/stats/agreement", None).await);
        let export = call(&router, "GET", "/export", None).await;
        println!("  exported {} messages", export["messages"].as_array().map_or(0, Vec::len));
        println!("  {}", call(&router, "POST", "/classify",
            json!({ "messages": [{ "id": "x", "text": "Vote tomorrow!", "lang": "en" }], "tau": 0.5 }).into()).await);
    });
    Ok(())
}
