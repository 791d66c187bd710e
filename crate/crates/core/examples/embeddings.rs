//! Text embeddings and the three ways of turning a day of tweets into
//! one vector.
//!
//!     cargo run --example embeddings

use chrono::NaiveDate;
use narrative_forecast::embed::{daily_embedding, DailyMode, Embedder};
use narrative_forecast::ingest::TweetRecord;

fn tweet(id: &str, text: &str, followers: u64) -> TweetRecord {
    TweetRecord {
        id: id.into(),
        date: NaiveDate::from_ymd_opt(2022, 5, 2).unwrap(),
        text: text.into(),
        followers,
        topic: None,
        user_id: String::new(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let embedder = Embedder::hashing(64, 0)?;
    let a = embedder.embed_text("stocks rally as inflation cools")?;
    let b = embedder.embed_text("inflation cools and stocks rally")?;
    let c = embedder.embed_text("central bank meeting next week")?;
    println!(
        "cos(a, b) = {:.3}   cos(a, c) = {:.3}",
        a.cosine(&b),
        a.cosine(&c)
    );

    let day = [
        tweet("1", "stocks rally as inflation cools", 100),
        tweet("2", "bond yields drop", 5000),
        tweet("3", "tech leads the gains", 20),
    ];
    for mode in ["individual-mean", "joint", "individual-concat:2"] {
        let mode: DailyMode = mode.parse()?;
        let v = daily_embedding(&embedder, &day, mode)?;
        println!("{mode:?}: dim {} norm {:.3}", v.dim(), v.norm());
    }
    Ok(())
}
