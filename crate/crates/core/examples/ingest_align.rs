//! Loading a price series and a tweet dump, cleaning the tweets and
//! attaching each one to the trading day it can first influence.
//!
//!     cargo run --example ingest_align

use std::io::Cursor;

use narrative_forecast::ingest::{
    align, parse_series, parse_tweets, preprocess, Indicator, PreprocessRules,
};

const PRICES: &str =
    "Date,Close\n2022-03-03,4363.49\n2022-03-04,4328.87\n2022-03-07,4201.09\n2022-03-08,4170.70\n";

// Weekend tweets land on Monday 2022-03-07; the repeated one is dropped
// as a same-day duplicate and the 3-follower account is filtered on load.
const TWEETS: &str = r#"{"id":"a","date":"2022-03-03","text":"Oil spikes again https://t.co/abc","followers":900}
{"id":"b","date":"2022-03-04","text":"Payrolls beat expectations","followers":4000}
{"id":"c","date":"2022-03-05","text":"Weekend worries about the war","followers":2500}
{"id":"d","date":"2022-03-05","text":"Weekend worries about the war","followers":10}
{"id":"e","date":"2022-03-06","text":"tiny account","followers":3}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = parse_series(Cursor::new(PRICES), "Close", Indicator::Sp500)?;
    let raw = parse_tweets(Cursor::new(TWEETS), 10)?;
    let clean = preprocess(&raw, PreprocessRules::default());
    println!(
        "{} tweets loaded, {} after cleaning",
        raw.len(),
        clean.len()
    );

    let data = align(&clean, &series)?;
    for (i, date) in data.dates().iter().enumerate() {
        println!("{date}  {:>8.2}", data.values()[i]);
        for t in data.tweets_on(i) {
            println!("    ({}) {}", t.date, t.text.trim());
        }
    }
    Ok(())
}
