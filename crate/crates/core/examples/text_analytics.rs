//! Lexicon sentiment and term timelines over a small tweet corpus.
//!
//!     cargo run --example text_analytics

use std::io::Cursor;

use narrative_forecast::ingest::{parse_tweets, preprocess, PreprocessRules};
use narrative_forecast::sentiment::{
    score, sentiment_histogram, word_frequency_timeline, Granularity, SentimentLexicon,
};

const TWEETS: &str = r#"{"id":"1","date":"2022-01-03","text":"Inflation is terrible news for markets","followers":5000}
{"id":"2","date":"2022-01-04","text":"Not a bad start to the year, stocks look great","followers":1200}
{"id":"3","date":"2022-01-20","text":"Inflation fears again https://t.co/x","followers":800}
{"id":"4","date":"2022-02-02","text":"Inflation inflation inflation, the Fed must act","followers":300}
{"id":"5","date":"2022-02-14","text":"Happy to see rates steady 🙂","followers":50}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = preprocess(
        &parse_tweets(Cursor::new(TWEETS), 0)?,
        PreprocessRules::default(),
    );
    let lexicon = SentimentLexicon::bundled();

    println!("compound scores");
    for t in corpus.records() {
        println!("  {:+.3}  {}", score(&t.text, lexicon).compound, t.text);
    }

    println!("\nmonthly mentions of \"inflation\"");
    for (month, n) in word_frequency_timeline(&corpus, "inflation", Granularity::Month)? {
        println!("  {}  {n}", Granularity::Month.label(month));
    }

    println!("\nsentiment histogram (width 0.5)");
    for bin in sentiment_histogram(&corpus, 0.5, lexicon)?.bins {
        println!(
            "  [{:+.1}, {:+.1})  {}",
            bin.lo,
            bin.hi,
            "#".repeat(bin.count)
        );
    }
    Ok(())
}
