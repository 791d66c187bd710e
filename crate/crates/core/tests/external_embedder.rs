//! The HTTP embedding client against the stub server.

use narrative_forecast::embed::{Embedder, EmbedderSpec, ExternalEmbedderConfig};
use narrative_forecast::narrative::stub::{StubReply, StubServer};
use narrative_forecast::retry::RetryPolicy;
use serde_json::{json, Value};

/// Embeds each text as `[len, 1]`.
fn length_server() -> StubServer {
    StubServer::start(|_, body: &Value| {
        let vectors: Vec<Value> = body["texts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| json!([t.as_str().unwrap().len() as f64, 1.0]))
            .collect();
        StubReply::ok(json!({ "vectors": vectors }))
    })
    .unwrap()
}

fn config(url: String) -> ExternalEmbedderConfig {
    ExternalEmbedderConfig {
        batch_size: 2,
        retry: RetryPolicy::none(),
        ..ExternalEmbedderConfig::new(url, 2)
    }
}

#[test]
fn batches_preserve_order() {
    let stub = length_server();
    let embedder = EmbedderSpec::External(config(stub.url("/embed")))
        .build()
        .unwrap();
    let texts = ["a", "bbb", "cc", "dddd", "e"];
    let out = embedder.embed_batch(&texts).unwrap();
    let lens: Vec<f64> = out.iter().map(|v| v.as_slice()[0]).collect();
    assert_eq!(lens, [1.0, 3.0, 2.0, 4.0, 1.0]);
    assert_eq!(stub.request_count(), 3);
    assert_eq!(embedder.dimension(), 2);
}

#[test]
fn wrong_dimension_is_rejected() {
    let stub = length_server();
    let embedder = Embedder::External(
        narrative_forecast::embed::ExternalEmbedder::new(ExternalEmbedderConfig {
            dimension: 3,
            ..config(stub.url("/embed"))
        })
        .unwrap(),
    );
    assert!(embedder.embed_text("hello").is_err());
}

#[test]
fn unreachable_service_errors() {
    let embedder = EmbedderSpec::External(config("http://127.0.0.1:9/embed".into()))
        .build()
        .unwrap();
    assert!(embedder.embed_text("hello").is_err());
}
