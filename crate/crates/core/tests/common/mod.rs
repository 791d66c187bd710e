//! Fixtures shared by the integration test targets.

#![allow(dead_code)]

use std::path::Path;

use chrono::NaiveDate;
use narrative_forecast::ingest::{Indicator, TweetRecord};
use narrative_forecast::narrative::{
    build_analysis_prompt, AnalysisPrompt, LlmAnalysis, LlmClient, LlmClientConfig,
};
use narrative_forecast::retry::RetryPolicy;

pub fn date(s: &str) -> NaiveDate {
    s.parse().expect("fixture date")
}

pub fn tweet(id: &str, day: &str, text: &str) -> TweetRecord {
    TweetRecord {
        id: id.into(),
        date: date(day),
        text: text.into(),
        followers: 1000,
        topic: None,
        user_id: String::new(),
    }
}

/// The two-tweet, two-value window behind `golden/analysis_prompt.txt`.
pub fn golden_analysis_prompt() -> AnalysisPrompt {
    let tweets = [
        tweet("1", "2022-03-01", "Markets are nervous about inflation."),
        tweet("2", "2022-03-02", "Fed signals a steady path."),
    ];
    let values = [(date("2022-03-01"), 4306.26), (date("2022-03-02"), 4386.54)];
    build_analysis_prompt(&tweets, &values, &Indicator::Sp500).expect("non-empty window")
}

pub fn analysis(summary: &str) -> LlmAnalysis {
    LlmAnalysis {
        tweet_analysis: summary.into(),
        impact_analysis: "Little effect.".into(),
        window: None,
        cache_key: None,
    }
}

pub fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Client pointed at a stub, with fast retries and an optional cache.
pub fn client(endpoint: String, cache: Option<&Path>) -> LlmClient {
    LlmClient::new(LlmClientConfig {
        endpoint,
        cache_dir: cache.map(Path::to_path_buf),
        retry: RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 1,
            multiplier: 2.0,
            max_backoff_ms: 5,
        },
        timeout_secs: 5,
        ..LlmClientConfig::default()
    })
    .expect("client builds")
}

pub const WELL_FORMED: &str = "<Analysis of Tweets>Calm tone overall.</Analysis of Tweets>\n\
<Potential Effects on S&P 500>Stable index expected.</Potential Effects on S&P 500>";
