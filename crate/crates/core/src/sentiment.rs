//! Lexicon sentiment scoring and the narrative statistics built on it.
//!
//! The scorer keeps the lexicon, negation and normalization core of VADER:
//! each known token contributes its valence, flipped and damped by
//! `negation_scale` when a negator sits in the three preceding tokens, and
//! the sum `s` is squashed to `s / sqrt(s^2 + alpha)`. Booster words,
//! punctuation emphasis and capitalization are not modelled.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use chrono::{Datelike, NaiveDate};
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{AlignedDataset, TweetCorpus};
use crate::text::tokenize;

const BUNDLED_LEXICON: &str = include_str!("../assets/vader_lexicon.tsv");

pub const NEGATION_SCALE: f64 = -0.74;
pub const NORMALIZATION_ALPHA: f64 = 15.0;
pub const NEGATION_WINDOW: usize = 3;
/// Days in a sentiment window.
pub const WINDOW_DAYS: usize = 7;

const NEGATORS: &[&str] = &[
    "aint",
    "arent",
    "cannot",
    "cant",
    "couldnt",
    "darent",
    "didnt",
    "doesnt",
    "ain't",
    "aren't",
    "can't",
    "couldn't",
    "daren't",
    "didn't",
    "doesn't",
    "dont",
    "hadnt",
    "hasnt",
    "havent",
    "isnt",
    "mightnt",
    "mustnt",
    "neither",
    "don't",
    "hadn't",
    "hasn't",
    "haven't",
    "isn't",
    "mightn't",
    "mustn't",
    "neednt",
    "needn't",
    "never",
    "none",
    "nope",
    "nor",
    "not",
    "nothing",
    "nowhere",
    "oughtnt",
    "shant",
    "shouldnt",
    "uhuh",
    "wasnt",
    "werent",
    "oughtn't",
    "shan't",
    "shouldn't",
    "wasn't",
    "weren't",
    "without",
    "wont",
    "wouldnt",
    "won't",
    "wouldn't",
    "rarely",
    "seldom",
    "despite",
];

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {message}")]
    BadLexicon { line: usize, message: String },
    #[error("invalid lexicon parameters: {0}")]
    BadParameters(String),
    #[error("date {0} is not in the dataset")]
    UnknownDate(NaiveDate),
    #[error("{needed} trading days needed up to {end}, only {available} available")]
    InsufficientHistory {
        end: NaiveDate,
        needed: usize,
        available: usize,
    },
    #[error("histogram bin width must be positive, got {0}")]
    BadBinWidth(f64),
    #[error("search term is empty")]
    EmptyTerm,
}

#[derive(Debug, Clone)]
pub struct SentimentLexicon {
    valences: HashMap<String, f64>,
    negators: HashSet<String>,
    negation_scale: f64,
    alpha: f64,
}

impl SentimentLexicon {
    /// Parses `token<TAB>valence` lines. Extra columns are ignored.
    pub fn parse(tsv: &str) -> Result<Self, SentimentError> {
        let mut valences = HashMap::new();
        for (idx, line) in tsv.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(token), Some(value)) = (cols.next(), cols.next()) else {
                return Err(SentimentError::BadLexicon {
                    line: idx + 1,
                    message: "expected token<TAB>valence".into(),
                });
            };
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| SentimentError::BadLexicon {
                    line: idx + 1,
                    message: format!("bad valence {value:?}"),
                })?;
            if !value.is_finite() {
                return Err(SentimentError::BadLexicon {
                    line: idx + 1,
                    message: "valence must be finite".into(),
                });
            }
            valences.insert(token.trim().to_lowercase(), value);
        }
        Ok(Self {
            valences,
            negators: NEGATORS.iter().map(|s| (*s).to_owned()).collect(),
            negation_scale: NEGATION_SCALE,
            alpha: NORMALIZATION_ALPHA,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SentimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SentimentError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> &'static SentimentLexicon {
        static LEXICON: OnceLock<SentimentLexicon> = OnceLock::new();
        LEXICON.get_or_init(|| SentimentLexicon::parse(BUNDLED_LEXICON).expect("bundled lexicon"))
    }

    pub fn with_parameters(
        mut self,
        negation_scale: f64,
        alpha: f64,
    ) -> Result<Self, SentimentError> {
        if !(negation_scale > -1.0 && negation_scale < 0.0) {
            return Err(SentimentError::BadParameters(format!(
                "negation scale {negation_scale} outside (-1, 0)"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(SentimentError::BadParameters(format!(
                "alpha {alpha} must be positive"
            )));
        }
        self.negation_scale = negation_scale;
        self.alpha = alpha;
        Ok(self)
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token) || token.contains("n't")
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }

    /// Squashes a valence sum into (-1, 1).
    pub fn normalize(&self, sum: f64) -> f64 {
        normalize(sum, self.alpha)
    }
}

pub fn normalize(sum: f64, alpha: f64) -> f64 {
    if sum == 0.0 {
        return 0.0;
    }
    let v = sum / (sum * sum + alpha).sqrt();
    // very large sums round to exactly ±1 in f64
    v.clamp(-1.0 + f64::EPSILON, 1.0 - f64::EPSILON)
}

/// Compound score of one text.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct SentimentScore {
    pub compound: f64,
}

/// Sum of token valences after negation handling.
pub fn valence_sum(text: &str, lexicon: &SentimentLexicon) -> f64 {
    let tokens = tokenize(text);
    let mut sum = 0.0;
    for (i, tok) in tokens.iter().enumerate() {
        let Some(mut v) = lexicon.valence(tok) else {
            continue;
        };
        let from = i.saturating_sub(NEGATION_WINDOW);
        if tokens[from..i].iter().any(|t| lexicon.is_negator(t)) {
            v *= lexicon.negation_scale;
        }
        sum += v;
    }
    sum
}

pub fn score(text: &str, lexicon: &SentimentLexicon) -> SentimentScore {
    SentimentScore {
        compound: lexicon.normalize(valence_sum(text, lexicon)),
    }
}

fn mean_score<'a>(texts: impl IntoIterator<Item = &'a str>, lexicon: &SentimentLexicon) -> f64 {
    let (sum, n) = texts.into_iter().fold((0.0, 0usize), |(s, n), t| {
        (s + score(t, lexicon).compound, n + 1)
    });
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean compound score of the tweets on the `idx`-th trading day; 0.0
/// for a day without tweets.
pub fn daily_sentiment_at(dataset: &AlignedDataset, idx: usize, lexicon: &SentimentLexicon) -> f64 {
    mean_score(
        dataset.tweets_on(idx).iter().map(|t| t.text.as_str()),
        lexicon,
    )
}

pub fn daily_sentiment(
    dataset: &AlignedDataset,
    date: NaiveDate,
    lexicon: &SentimentLexicon,
) -> Result<f64, SentimentError> {
    let idx = dataset
        .index_of(date)
        .ok_or(SentimentError::UnknownDate(date))?;
    Ok(daily_sentiment_at(dataset, idx, lexicon))
}

/// Daily sentiment for every trading day of the dataset.
pub fn daily_series(dataset: &AlignedDataset, lexicon: &SentimentLexicon) -> Vec<f64> {
    (0..dataset.len())
        .map(|i| daily_sentiment_at(dataset, i, lexicon))
        .collect()
}

/// Seven consecutive trading-day scores, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailySentimentVector {
    pub end_date: NaiveDate,
    pub values: [f64; WINDOW_DAYS],
    /// Score used for days without tweets.
    pub fill: f64,
}

pub fn sentiment_window(
    dataset: &AlignedDataset,
    end_date: NaiveDate,
    lexicon: &SentimentLexicon,
) -> Result<DailySentimentVector, SentimentError> {
    let end = dataset
        .index_of(end_date)
        .ok_or(SentimentError::UnknownDate(end_date))?;
    if end + 1 < WINDOW_DAYS {
        return Err(SentimentError::InsufficientHistory {
            end: end_date,
            needed: WINDOW_DAYS,
            available: end + 1,
        });
    }
    let mut values = [0.0; WINDOW_DAYS];
    for (slot, idx) in values.iter_mut().zip(end + 1 - WINDOW_DAYS..=end) {
        *slot = daily_sentiment_at(dataset, idx, lexicon);
    }
    Ok(DailySentimentVector {
        end_date,
        values,
        fill: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Day,
    Month,
}

impl Granularity {
    fn period_start(self, date: NaiveDate) -> NaiveDate {
        match self {
            Granularity::Day => date,
            Granularity::Month => date.with_day(1).expect("day 1 exists"),
        }
    }

    fn next(self, start: NaiveDate) -> NaiveDate {
        match self {
            Granularity::Day => start.succ_opt().expect("date in range"),
            Granularity::Month => start
                .checked_add_months(chrono::Months::new(1))
                .expect("date in range"),
        }
    }

    /// `2011-07` for months, `2011-07-15` for days.
    pub fn label(self, start: NaiveDate) -> String {
        match self {
            Granularity::Day => start.format("%Y-%m-%d").to_string(),
            Granularity::Month => start.format("%Y-%m").to_string(),
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "day" => Ok(Granularity::Day),
            "month" => Ok(Granularity::Month),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

/// Per-period counts of `term` (case-insensitive token match), including
/// zero periods between the first and last tweet.
pub fn word_frequency_timeline(
    corpus: &TweetCorpus,
    term: &str,
    granularity: Granularity,
) -> Result<Vec<(NaiveDate, usize)>, SentimentError> {
    let term = term.trim().to_lowercase();
    if term.is_empty() {
        return Err(SentimentError::EmptyTerm);
    }
    let Some((first, last)) = corpus.date_range() else {
        return Ok(Vec::new());
    };
    let mut counts: HashMap<NaiveDate, usize> = HashMap::new();
    for r in corpus.records() {
        let hits = tokenize(&r.text).iter().filter(|t| **t == term).count();
        *counts.entry(granularity.period_start(r.date)).or_default() += hits;
    }
    let mut out = Vec::new();
    let mut p = granularity.period_start(first);
    while p <= last {
        out.push((p, counts.get(&p).copied().unwrap_or(0)));
        p = granularity.next(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins covering [-1, 1]; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentimentHistogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

impl SentimentHistogram {
    pub fn new(bin_width: f64) -> Result<Self, SentimentError> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(SentimentError::BadBinWidth(bin_width));
        }
        let n = ((2.0 / bin_width) - 1e-9).ceil().max(1.0) as usize;
        let bins = (0..n)
            .map(|i| HistogramBin {
                lo: -1.0 + i as f64 * bin_width,
                hi: (-1.0 + (i + 1) as f64 * bin_width).min(1.0),
                count: 0,
            })
            .collect();
        Ok(Self { bin_width, bins })
    }

    pub fn add(&mut self, score: f64) {
        let raw = ((score + 1.0) / self.bin_width).floor();
        let idx = (raw.max(0.0) as usize).min(self.bins.len() - 1);
        self.bins[idx].count += 1;
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

pub fn sentiment_histogram(
    corpus: &TweetCorpus,
    bin_width: f64,
    lexicon: &SentimentLexicon,
) -> Result<SentimentHistogram, SentimentError> {
    let mut hist = SentimentHistogram::new(bin_width)?;
    for r in corpus.records() {
        hist.add(score(&r.text, lexicon).compound);
    }
    Ok(hist)
}
