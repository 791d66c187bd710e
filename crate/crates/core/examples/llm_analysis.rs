//! Narrative analysis against a local chat-completions stub: build the
//! analysis prompt for a window, request it (cached on disk), then build
//! the prompt that combines the summary with recent directions.
//!
//!     cargo run --example llm_analysis

use chrono::NaiveDate;
use narrative_forecast::ingest::{align, FinancialSeries, Indicator, TweetCorpus, TweetRecord};
use narrative_forecast::narrative::stub::StubServer;
use narrative_forecast::narrative::{
    build_integration_prompt, window_analysis_prompt, LlmClient, LlmClientConfig,
};
use narrative_forecast::Direction;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let day = |d: u32| NaiveDate::from_ymd_opt(2022, 3, d).unwrap();
    let series = FinancialSeries::new(
        Indicator::Sp500,
        vec![(day(1), 4306.26), (day(2), 4386.54), (day(3), 4363.49)],
    )?;
    let tweets = TweetCorpus::new(vec![
        TweetRecord {
            id: "1".into(),
            date: day(1),
            text: "Markets are nervous about inflation.".into(),
            followers: 1000,
            topic: None,
            user_id: String::new(),
        },
        TweetRecord {
            id: "2".into(),
            date: day(2),
            text: "Fed signals a steady path.".into(),
            followers: 1000,
            topic: None,
            user_id: String::new(),
        },
    ])?;
    let data = align(&tweets, &series)?;

    let server = StubServer::chat(|_| {
        "<Analysis of Tweets>Worry about inflation, eased by a calm Fed.</Analysis of Tweets>\n\
         <Potential Effects on S&P 500>Mild upward pressure.</Potential Effects on S&P 500>"
            .into()
    })?;
    let cache = std::env::temp_dir().join("narrative-example-cache");
    let client = LlmClient::new(LlmClientConfig {
        endpoint: server.url("/v1/chat/completions"),
        cache_dir: Some(cache),
        ..LlmClientConfig::default()
    })?;

    let prompt = window_analysis_prompt(&data, 1, 2, &Indicator::Sp500)?;
    println!("--- prompt ---\n{}\n", prompt.render());
    let analysis = client.request_analysis(&prompt)?;
    println!(
        "tweets: {}\nimpact: {}",
        analysis.tweet_analysis, analysis.impact_analysis
    );
    println!(
        "network calls: {} (0 when the cache was warm)\n",
        client.network_calls()
    );

    let recent = [
        Direction::Increase,
        Direction::Decrease,
        Direction::Increase,
    ];
    println!(
        "{}",
        build_integration_prompt(&analysis, &recent, &Indicator::Sp500, 1)?
    );
    Ok(())
}
