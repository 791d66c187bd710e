//! Counterfactual text generators and synthetic price series.
//!
//! * random texts: sentences of uniformly drawn words, carrying no signal;
//! * shuffled dates: a real corpus with its dates permuted;
//! * synthetic narratives: one cue sentence per day whose sentiment sign
//!   agrees, with probability `alignment`, with the upcoming move of the
//!   target;
//! * random walks: log-normal steps, a target with no predictable direction.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direction::Direction;
use crate::ingest::{FinancialSeries, Indicator, IngestError, TweetCorpus, TweetRecord};

const BUNDLED_WORDLIST: &str = include_str!("../assets/wordlist.txt");

pub const POSITIVE_CUES: &[&str] = &[
    "good",
    "great",
    "strong",
    "excellent",
    "optimistic",
    "confident",
    "positive",
    "healthy",
    "solid",
    "promising",
];
pub const NEGATIVE_CUES: &[&str] = &[
    "bad",
    "terrible",
    "weak",
    "awful",
    "pessimistic",
    "worried",
    "negative",
    "grim",
    "poor",
    "gloomy",
];
/// Sentence frames; `{}` is replaced by a cue word. Frame words carry no
/// lexicon valence.
pub const FRAMES: &[&str] = &[
    "the economy looks {} today",
    "analysts call the outlook {}",
    "{} earnings reported this quarter",
    "investors see {} data from the labor market",
    "traders expect a {} week for stocks",
    "the latest jobs report was {}",
    "{} signals from the housing market",
    "consumer spending data looks {}",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("wordlist is empty")]
    EmptyWordlist,
    #[error("cannot read wordlist {path}: {source}")]
    Wordlist {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least 2 distinct dates to shuffle, got {0}")]
    TooFewDates(usize),
    #[error("horizon {horizon} leaves no dates in a series of {len}")]
    HorizonTooLarge { horizon: usize, len: usize },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Where random-text vocabulary comes from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wordlist {
    #[default]
    Bundled,
    /// Plain text, one token per line.
    File(PathBuf),
    Words(Vec<String>),
}

impl Wordlist {
    pub fn words(&self) -> Result<Vec<String>, SynthError> {
        let words: Vec<String> = match self {
            Wordlist::Bundled => parse_wordlist(BUNDLED_WORDLIST),
            Wordlist::File(path) => {
                parse_wordlist(&std::fs::read_to_string(path).map_err(|source| {
                    SynthError::Wordlist {
                        path: path.clone(),
                        source,
                    }
                })?)
            }
            Wordlist::Words(w) => w.iter().filter(|w| !w.trim().is_empty()).cloned().collect(),
        };
        if words.is_empty() {
            return Err(SynthError::EmptyWordlist);
        }
        Ok(words)
    }

    pub fn file(path: impl AsRef<Path>) -> Self {
        Wordlist::File(path.as_ref().to_path_buf())
    }
}

fn parse_wordlist(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub wordlist: Wordlist,
    /// Inclusive range of words per random sentence.
    pub sentence_length: (usize, usize),
    pub sentences_per_day: usize,
    /// Probability that a narrative's sign matches the upcoming move.
    pub alignment: f64,
    pub positive_cues: Vec<String>,
    pub negative_cues: Vec<String>,
    pub frames: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let owned = |s: &[&str]| s.iter().map(|w| (*w).to_owned()).collect();
        Self {
            seed: 0,
            wordlist: Wordlist::Bundled,
            sentence_length: (6, 14),
            sentences_per_day: 3,
            alignment: 1.0,
            positive_cues: owned(POSITIVE_CUES),
            negative_cues: owned(NEGATIVE_CUES),
            frames: owned(FRAMES),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let (lo, hi) = self.sentence_length;
        if lo == 0 || lo > hi {
            return Err(SynthError::InvalidParameter(format!(
                "sentence length range ({lo}, {hi})"
            )));
        }
        if !(0.0..=1.0).contains(&self.alignment) {
            return Err(SynthError::InvalidParameter(format!(
                "alignment {} not in [0, 1]",
                self.alignment
            )));
        }
        if self.sentences_per_day == 0 {
            return Err(SynthError::InvalidParameter(
                "sentences per day must be positive".into(),
            ));
        }
        if self.positive_cues.is_empty() || self.negative_cues.is_empty() || self.frames.is_empty()
        {
            return Err(SynthError::InvalidParameter(
                "cue pools and frames must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

fn record(kind: &str, date: NaiveDate, i: usize, text: String) -> TweetRecord {
    TweetRecord {
        id: format!("{kind}-{}-{i}", date.format("%Y%m%d")),
        date,
        text,
        followers: 1000,
        topic: None,
        user_id: format!("synth-{kind}"),
    }
}

/// Sentences of uniformly sampled words, `sentences_per_day` per date.
pub fn gen_random_texts(cfg: &SynthConfig, dates: &[NaiveDate]) -> Result<TweetCorpus, SynthError> {
    cfg.validate()?;
    let words = cfg.wordlist.words()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.sentence_length;
    let mut records = Vec::with_capacity(dates.len() * cfg.sentences_per_day);
    let unique: BTreeSet<NaiveDate> = dates.iter().copied().collect();
    for date in unique {
        for i in 0..cfg.sentences_per_day {
            let len = rng.gen_range(lo..=hi);
            let text = (0..len)
                .map(|_| words.choose(&mut rng).expect("non-empty").as_str())
                .collect::<Vec<_>>()
                .join(" ");
            records.push(record("random", date, i, text));
        }
    }
    Ok(TweetCorpus::new(records)?)
}

/// Reassigns each distinct date to another by a uniform permutation.
pub fn shuffle_dates(corpus: &TweetCorpus, seed: u64) -> Result<TweetCorpus, SynthError> {
    let dates: Vec<NaiveDate> = corpus
        .records()
        .iter()
        .map(|r| r.date)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if dates.len() < 2 {
        return Err(SynthError::TooFewDates(dates.len()));
    }
    let mut permuted = dates.clone();
    permuted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let records = corpus
        .records()
        .iter()
        .map(|r| {
            let idx = dates.binary_search(&r.date).expect("date collected above");
            TweetRecord {
                date: permuted[idx],
                ..r.clone()
            }
        })
        .collect();
    Ok(TweetCorpus::new(records)?)
}

/// One cue sentence per generated tweet, for every date `t` whose label
/// `V(t+h)` vs `V(t+h-1)` exists.
pub fn gen_synthetic_narratives(
    series: &FinancialSeries,
    horizon: usize,
    cfg: &SynthConfig,
) -> Result<TweetCorpus, SynthError> {
    cfg.validate()?;
    let values = series.values();
    if horizon == 0 || horizon >= values.len() {
        return Err(SynthError::HorizonTooLarge {
            horizon,
            len: values.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::new();
    for (t, &date) in series
        .dates()
        .iter()
        .enumerate()
        .take(values.len() - horizon)
    {
        let truth = Direction::between(values[t + horizon - 1], values[t + horizon]);
        let aligned = rng.gen_bool(cfg.alignment);
        let sign = if aligned { truth } else { truth.flip() };
        let pool = match sign {
            Direction::Increase => &cfg.positive_cues,
            Direction::Decrease => &cfg.negative_cues,
        };
        for i in 0..cfg.sentences_per_day {
            let frame = cfg.frames.choose(&mut rng).expect("validated");
            let cue = pool.choose(&mut rng).expect("validated");
            records.push(record("narrative", date, i, frame.replacen("{}", cue, 1)));
        }
    }
    Ok(TweetCorpus::new(records)?)
}

pub const RANDOM_WALK_START: (i32, u32, u32) = (2020, 1, 1);

/// The first `n` weekdays on or after `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// `V(t+1) = V(t) * exp(sigma * z_t)` on business days from 2020-01-01.
pub fn gen_random_walk(
    n: usize,
    sigma: f64,
    v0: f64,
    seed: u64,
) -> Result<FinancialSeries, SynthError> {
    if n < 2 {
        return Err(SynthError::InvalidParameter(format!("length {n} < 2")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SynthError::InvalidParameter(format!(
            "sigma {sigma} must be > 0"
        )));
    }
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(SynthError::InvalidParameter(format!(
            "start value {v0} must be > 0"
        )));
    }
    let (y, m, d) = RANDOM_WALK_START;
    let dates = business_days(NaiveDate::from_ymd_opt(y, m, d).expect("valid date"), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = v0;
    let mut points = Vec::with_capacity(n);
    for date in dates {
        points.push((date, v));
        let z: f64 = rng.sample(StandardNormal);
        v *= (sigma * z).exp();
    }
    Ok(FinancialSeries::new(Indicator::Other("RW".into()), points)?)
}
