//! The chat client against the local stub server: caching, retries,
//! refusals and parse failures.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::*;
use narrative_forecast::ingest::Indicator;
use narrative_forecast::narrative::predict::{llm_predict_weekly_average, PromptMode};
use narrative_forecast::narrative::stub::{StubReply, StubServer};
use narrative_forecast::narrative::NarrativeError;
use serde_json::json;

#[test]
fn second_identical_request_is_served_from_cache() {
    let stub = StubServer::chat(|_| WELL_FORMED.to_owned()).unwrap();
    let cache = tempfile::tempdir().unwrap();
    let prompt = golden_analysis_prompt();

    let first = client(stub.url("/v1/chat/completions"), Some(cache.path()));
    let a = first.request_analysis(&prompt).unwrap();
    assert_eq!(stub.request_count(), 1);
    assert_eq!(a.tweet_analysis, "Calm tone overall.");
    assert_eq!(a.impact_analysis, "Stable index expected.");

    // A fresh client shares only the directory.
    let second = client(stub.url("/v1/chat/completions"), Some(cache.path()));
    let b = second.request_analysis(&prompt).unwrap();
    assert_eq!(second.network_calls(), 0);
    assert_eq!(stub.request_count(), 1);
    assert_eq!(a, b);
}

#[test]
fn request_carries_model_temperature_and_prompt() {
    let stub = StubServer::chat(|_| WELL_FORMED.to_owned()).unwrap();
    let c = client(stub.url("/chat"), None);
    c.request_analysis(&golden_analysis_prompt()).unwrap();
    let body = &stub.bodies()[0];
    assert_eq!(body["temperature"], json!(0.5));
    assert_eq!(body["model"], json!(c.config().model));
    assert_eq!(
        body["messages"][0]["content"],
        json!(golden("analysis_prompt.txt"))
    );
}

#[test]
fn malformed_tags_are_persisted_under_failed() {
    let stub =
        StubServer::chat(|_| "<Analysis of Tweets>only half</Analysis of Tweets>".into()).unwrap();
    let cache = tempfile::tempdir().unwrap();
    let err = client(stub.url("/chat"), Some(cache.path()))
        .request_analysis(&golden_analysis_prompt())
        .unwrap_err();
    let NarrativeError::Parse { raw, persisted, .. } = err else {
        panic!("expected a parse error, got {err:?}")
    };
    assert!(raw.contains("only half"));
    let path = persisted.expect("cache configured");
    assert!(path.starts_with(cache.path().join("failed")));
    let saved = std::fs::read_to_string(path).unwrap();
    assert!(saved.contains("only half"));
}

#[test]
fn refused_analysis_is_a_persisted_parse_error() {
    let stub = StubServer::chat(|_| "As an AI I cannot analyse these tweets.".into()).unwrap();
    let cache = tempfile::tempdir().unwrap();
    let err = client(stub.url("/chat"), Some(cache.path()))
        .request_analysis(&golden_analysis_prompt())
        .unwrap_err();
    assert!(matches!(
        err,
        NarrativeError::Parse {
            persisted: Some(_),
            ..
        }
    ));
}

#[test]
fn refused_prediction_is_a_refusal() {
    let stub =
        StubServer::chat(|_| "As a language model I cannot provide financial advice.".into())
            .unwrap();
    let c = client(stub.url("/chat"), None);
    let tweets = [tweet("1", "2022-03-01", "Volatility ahead.")];
    let values = [(date("2022-03-01"), 25.0)];
    let err = llm_predict_weekly_average(
        &c,
        &tweets,
        &values,
        &Indicator::Vix,
        PromptMode::ZeroShot,
        &[],
    )
    .unwrap_err();
    assert!(matches!(err, NarrativeError::Refusal { .. }), "{err:?}");
}

#[test]
fn range_answer_parses_to_midpoint() {
    let stub =
        StubServer::chat(|_| "Prediction: I predict the VIX will average 18-20".into()).unwrap();
    let c = client(stub.url("/chat"), None);
    let tweets = [tweet("1", "2022-03-01", "Volatility ahead.")];
    let values = [(date("2022-03-01"), 25.0)];
    let p = llm_predict_weekly_average(&c, &tweets, &values, &Indicator::Vix, PromptMode::Cot, &[])
        .unwrap();
    assert_eq!(p.value, 19.0);
    assert_eq!(p.bounds, Some((18.0, 20.0)));
}

#[test]
fn server_errors_are_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let stub = StubServer::start(move |_, _| {
        if seen.fetch_add(1, Ordering::SeqCst) < 2 {
            StubReply {
                status: 503,
                body: json!({"error": "busy"}),
            }
        } else {
            StubReply::chat(WELL_FORMED)
        }
    })
    .unwrap();
    let c = client(stub.url("/chat"), None);
    c.request_analysis(&golden_analysis_prompt()).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let stub = StubServer::start(|_, _| StubReply {
        status: 401,
        body: json!({"error": "bad key"}),
    })
    .unwrap();
    let err = client(stub.url("/chat"), None)
        .request_analysis(&golden_analysis_prompt())
        .unwrap_err();
    assert!(matches!(err, NarrativeError::Status { status: 401, .. }));
    assert_eq!(stub.request_count(), 1);
}

#[test]
fn batch_results_keep_input_order() {
    let stub = StubServer::chat(|prompt| {
        let day = if prompt.contains("2022-04-01") { "April" } else { "March" };
        format!("<Analysis of Tweets>{day}</Analysis of Tweets><Potential Effects on S&P 500>x</Potential Effects on S&P 500>")
    })
    .unwrap();
    let c = client(stub.url("/chat"), None);
    let april = narrative_forecast::narrative::build_analysis_prompt(
        &[tweet("9", "2022-04-01", "Spring.")],
        &[(date("2022-04-01"), 1.0)],
        &Indicator::Sp500,
    )
    .unwrap();
    let prompts = vec![golden_analysis_prompt(), april, golden_analysis_prompt()];
    let out: Vec<String> = c
        .request_analyses(&prompts)
        .into_iter()
        .map(|r| r.unwrap().tweet_analysis)
        .collect();
    assert_eq!(out, ["March", "April", "March"]);
}
