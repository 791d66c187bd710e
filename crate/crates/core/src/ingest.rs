//! Loading, cleaning, aligning and splitting the two raw inputs: a tweet
//! corpus (JSON lines) and a trading-daily financial indicator series (CSV).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_EMOJI_ALIASES: &str = include_str!("../assets/emoji_aliases.tsv");

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: unparseable date {value:?}")]
    BadDate { line: usize, value: String },
    #[error("duplicate tweet id {0:?}")]
    DuplicateId(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("dates not strictly increasing at {0}")]
    NonMonotoneDate(NaiveDate),
    #[error("row {row}: non-numeric value {value:?}")]
    NonNumeric { row: usize, value: String },
    #[error("invalid value {value} for {indicator} on {date}")]
    InvalidValue {
        indicator: Indicator,
        date: NaiveDate,
        value: f64,
    },
    #[error("tweet corpus and series do not overlap")]
    EmptyOverlap,
    #[error("block boundaries must be strictly increasing")]
    UnsortedBoundaries,
    #[error("boundary {0} lies outside the series range")]
    BoundaryOutOfRange(NaiveDate),
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("dataset has {0} points; splitting needs at least 2 and both sides non-empty")]
    TooShort(usize),
    #[error("emoji alias table line {0}: {1}")]
    BadAlias(usize, String),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

/// One tweet after loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub date: NaiveDate,
    pub text: String,
    pub followers: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default)]
    pub user_id: String,
}

/// Which preprocessing rules have been applied to a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessRules {
    pub strip_links: bool,
    pub dedupe: bool,
    pub emoji_to_text: bool,
}

impl Default for PreprocessRules {
    fn default() -> Self {
        Self {
            strip_links: true,
            dedupe: true,
            emoji_to_text: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub min_followers: u64,
    pub preprocessing: Option<PreprocessRules>,
}

/// Date-sorted tweets with their covering date range.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TweetCorpus {
    records: Vec<TweetRecord>,
    pub provenance: Provenance,
}

impl TweetCorpus {
    /// Builds a corpus, sorting by date (stable, so same-day order is kept).
    pub fn new(mut records: Vec<TweetRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(IngestError::DuplicateId(r.id.clone()));
            }
        }
        records.sort_by_key(|r| r.date);
        Ok(Self {
            records,
            provenance: Provenance::default(),
        })
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TweetRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// First and last tweet date, `None` for an empty corpus.
    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        Some((self.records.first()?.date, self.records.last()?.date))
    }

    /// Serializes to the tweets JSON-lines format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("tweet record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Deserialize)]
struct RawTweet {
    id: String,
    date: String,
    text: String,
    followers: u64,
    #[serde(default)]
    topic: Option<String>,
    #[serde(default)]
    user_id: String,
}

/// Loads a JSON-lines tweet file, keeping accounts with at least
/// `min_followers` followers.
pub fn load_tweets(path: impl AsRef<Path>, min_followers: u64) -> Result<TweetCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut corpus = parse_tweets(BufReader::new(file), min_followers)?;
    corpus.provenance.source = Some(path.to_owned());
    Ok(corpus)
}

/// Parses tweets from any line reader; see [`load_tweets`].
pub fn parse_tweets(reader: impl BufRead, min_followers: u64) -> Result<TweetCorpus> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawTweet =
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedLine {
                line: line_no,
                message: e.to_string(),
            })?;
        let date = parse_date(&raw.date).ok_or_else(|| IngestError::BadDate {
            line: line_no,
            value: raw.date.clone(),
        })?;
        if raw.followers < min_followers {
            continue;
        }
        records.push(TweetRecord {
            id: raw.id,
            date,
            text: raw.text,
            followers: raw.followers,
            topic: raw.topic,
            user_id: raw.user_id,
        });
    }
    let mut corpus = TweetCorpus::new(records)?;
    corpus.provenance.min_followers = min_followers;
    Ok(corpus)
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Codepoint-sequence → textual alias map used for emoji conversion.
#[derive(Debug, Clone)]
pub struct EmojiAliases {
    map: HashMap<String, String>,
    starts: HashSet<char>,
    longest: usize,
}

impl EmojiAliases {
    /// Parses `codepoint[ codepoint...]<TAB>alias` lines (hex codepoints).
    pub fn parse(table: &str) -> Result<Self> {
        let mut map = HashMap::new();
        let mut starts = HashSet::new();
        let mut longest = 0;
        for (idx, line) in table.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (cps, alias) = line
                .split_once('\t')
                .ok_or_else(|| IngestError::BadAlias(idx + 1, "missing tab".into()))?;
            let mut key = String::new();
            for cp in cps.split_whitespace() {
                let c = u32::from_str_radix(cp.trim_start_matches("U+"), 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| IngestError::BadAlias(idx + 1, format!("bad codepoint {cp}")))?;
                key.push(c);
            }
            let Some(first) = key.chars().next() else {
                continue;
            };
            starts.insert(first);
            longest = longest.max(key.chars().count());
            map.entry(key).or_insert_with(|| alias.trim().to_owned());
        }
        Ok(Self {
            map,
            starts,
            longest,
        })
    }

    /// The bundled table.
    pub fn bundled() -> &'static EmojiAliases {
        static TABLE: OnceLock<EmojiAliases> = OnceLock::new();
        TABLE.get_or_init(|| EmojiAliases::parse(DEFAULT_EMOJI_ALIASES).expect("bundled table"))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Replaces every known emoji sequence (longest match first) with
    /// its alias surrounded by spaces. Stray joiners and variation
    /// selectors are dropped.
    pub fn replace(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        'outer: while i < chars.len() {
            let c = chars[i];
            if self.starts.contains(&c) {
                let max = self.longest.min(chars.len() - i);
                for len in (1..=max).rev() {
                    let key: String = chars[i..i + len].iter().collect();
                    if let Some(alias) = self.map.get(&key) {
                        out.push(' ');
                        out.push_str(alias);
                        out.push(' ');
                        i += len;
                        continue 'outer;
                    }
                }
            }
            if !matches!(c, '\u{200D}' | '\u{FE0E}' | '\u{FE0F}') {
                out.push(c);
            }
            i += 1;
        }
        out
    }
}

fn link_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").expect("valid regex"))
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Key under which two tweets count as duplicates of each other.
pub fn dedupe_key(text: &str) -> String {
    collapse_whitespace(&text.to_lowercase())
}

/// Cleans a corpus with the bundled emoji table.
pub fn preprocess(corpus: &TweetCorpus, rules: PreprocessRules) -> TweetCorpus {
    preprocess_with(corpus, rules, EmojiAliases::bundled())
}

/// Strips links, converts emoji to text aliases, drops tweets left empty
/// and collapses same-day duplicates (first occurrence wins).
pub fn preprocess_with(
    corpus: &TweetCorpus,
    rules: PreprocessRules,
    aliases: &EmojiAliases,
) -> TweetCorpus {
    let mut seen: HashSet<(NaiveDate, String)> = HashSet::new();
    let mut records = Vec::with_capacity(corpus.len());
    for r in corpus.records() {
        let mut text = r.text.clone();
        if rules.strip_links {
            text = link_pattern().replace_all(&text, " ").into_owned();
        }
        if rules.emoji_to_text {
            text = aliases.replace(&text);
        }
        let text = collapse_whitespace(&text);
        if text.is_empty() {
            continue;
        }
        if rules.dedupe && !seen.insert((r.date, dedupe_key(&text))) {
            continue;
        }
        records.push(TweetRecord { text, ..r.clone() });
    }
    TweetCorpus {
        records,
        provenance: Provenance {
            preprocessing: Some(rules),
            ..corpus.provenance.clone()
        },
    }
}

/// The indicators the harness knows how to describe.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Indicator {
    #[serde(rename = "FFR")]
    Ffr,
    #[serde(rename = "SP500")]
    Sp500,
    #[serde(rename = "VIX")]
    Vix,
    #[serde(untagged)]
    Other(String),
}

impl Indicator {
    /// Name used in prompts, e.g. `S&P 500`.
    pub fn display_name(&self) -> &str {
        match self {
            Indicator::Ffr => "FFR",
            Indicator::Sp500 => "S&P 500",
            Indicator::Vix => "VIX",
            Indicator::Other(s) => s,
        }
    }

    fn strictly_positive(&self) -> bool {
        matches!(self, Indicator::Sp500 | Indicator::Vix)
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Indicator::Ffr => "FFR",
            Indicator::Sp500 => "SP500",
            Indicator::Vix => "VIX",
            Indicator::Other(s) => s,
        })
    }
}

impl FromStr for Indicator {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(
            match s.to_ascii_uppercase().replace(['&', ' '], "").as_str() {
                "FFR" => Indicator::Ffr,
                "SP500" => Indicator::Sp500,
                "VIX" => Indicator::Vix,
                _ => Indicator::Other(s.to_owned()),
            },
        )
    }
}

/// A trading-daily indicator series.
#[derive(Debug, Clone, PartialEq)]
pub struct FinancialSeries {
    pub name: Indicator,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    /// Rows dropped at load time because the value was missing.
    pub skipped: usize,
}

impl FinancialSeries {
    pub fn new(name: Indicator, points: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let mut dates = Vec::with_capacity(points.len());
        let mut values = Vec::with_capacity(points.len());
        for (date, value) in points {
            if dates.last().is_some_and(|&prev| prev >= date) {
                return Err(IngestError::NonMonotoneDate(date));
            }
            if !value.is_finite() || (name.strictly_positive() && value <= 0.0) {
                return Err(IngestError::InvalidValue {
                    indicator: name,
                    date,
                    value,
                });
            }
            dates.push(date);
            values.push(value);
        }
        Ok(Self {
            name,
            dates,
            values,
            skipped: 0,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates.iter().copied().zip(self.values.iter().copied())
    }

    /// Index of the first point dated on or after `date`.
    pub fn first_index_on_or_after(&self, date: NaiveDate) -> usize {
        self.dates.partition_point(|&d| d < date)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,value\n");
        for (d, v) in self.points() {
            out.push_str(&format!("{d},{v}\n"));
        }
        out
    }
}

/// Loads `column` from a CSV with a `date` column. Empty or `N/A`-style
/// cells are skipped and counted in [`FinancialSeries::skipped`].
pub fn load_series(path: impl AsRef<Path>, column: &str) -> Result<FinancialSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    let name = column.parse().unwrap_or_else(|e| match e {});
    parse_series(file, column, name)
}

/// Parses a series from CSV text; see [`load_series`].
pub fn parse_series(
    reader: impl std::io::Read,
    column: &str,
    name: Indicator,
) -> Result<FinancialSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |wanted: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(wanted))
            .ok_or_else(|| IngestError::MissingColumn(wanted.to_owned()))
    };
    let date_col = find("date")?;
    let value_col = find(column)?;
    let mut points = Vec::new();
    let mut skipped = 0;
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = idx + 2;
        let raw_date = row.get(date_col).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| IngestError::BadDate {
            line: row_no,
            value: raw_date.to_owned(),
        })?;
        let cell = row.get(value_col).unwrap_or("");
        if is_missing(cell) {
            skipped += 1;
            continue;
        }
        let value: f64 = cell.parse().map_err(|_| IngestError::NonNumeric {
            row: row_no,
            value: cell.to_owned(),
        })?;
        points.push((date, value));
    }
    let mut series = FinancialSeries::new(name, points)?;
    series.skipped = skipped;
    Ok(series)
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.to_ascii_lowercase().as_str(),
        "" | "." | "na" | "n/a" | "nan" | "null" | "none"
    )
}

/// Tweets attached to the trading days of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub indicator: Indicator,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    tweets: Vec<Vec<TweetRecord>>,
}

/// How tweets dated on non-trading days are attached.
pub const LAG_CONVENTION: &str = "non-trading-day tweets attach to the next trading day";

impl AlignedDataset {
    /// Builds a dataset from per-day `(date, value, tweets)` rows.
    pub fn from_days(
        indicator: Indicator,
        days: Vec<(NaiveDate, f64, Vec<TweetRecord>)>,
    ) -> Result<Self> {
        let series = FinancialSeries::new(
            indicator.clone(),
            days.iter().map(|(d, v, _)| (*d, *v)).collect(),
        )?;
        Ok(Self {
            indicator,
            dates: series.dates,
            values: series.values,
            tweets: days.into_iter().map(|(_, _, t)| t).collect(),
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tweets(&self) -> &[Vec<TweetRecord>] {
        &self.tweets
    }

    pub fn tweets_on(&self, idx: usize) -> &[TweetRecord] {
        &self.tweets[idx]
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// The indicator part as a series.
    pub fn series(&self) -> FinancialSeries {
        FinancialSeries {
            name: self.indicator.clone(),
            dates: self.dates.clone(),
            values: self.values.clone(),
            skipped: 0,
        }
    }

    /// All attached tweets as a corpus.
    pub fn corpus(&self) -> TweetCorpus {
        TweetCorpus {
            records: self.tweets.iter().flatten().cloned().collect(),
            provenance: Provenance::default(),
        }
    }

    fn slice(&self, range: std::ops::Range<usize>) -> AlignedDataset {
        AlignedDataset {
            indicator: self.indicator.clone(),
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range.clone()].to_vec(),
            tweets: self.tweets[range].to_vec(),
        }
    }
}

/// Attaches each tweet to the first trading day on or after its date and
/// restricts the result to the stretch of series covered by the corpus.
/// An empty corpus keeps the whole series.
pub fn align(corpus: &TweetCorpus, series: &FinancialSeries) -> Result<AlignedDataset> {
    let (lo, hi) = match corpus.date_range() {
        None => (0, series.len()),
        Some((start, end)) => {
            let lo = series.first_index_on_or_after(start);
            // the day receiving the corpus' last tweets is still inside
            let hi = (series.first_index_on_or_after(end) + 1).min(series.len());
            (lo, hi)
        }
    };
    if lo >= hi {
        return Err(IngestError::EmptyOverlap);
    }
    let mut tweets: BTreeMap<usize, Vec<TweetRecord>> = BTreeMap::new();
    for r in corpus.records() {
        let idx = series.first_index_on_or_after(r.date);
        if idx < lo || idx >= hi {
            continue;
        }
        tweets.entry(idx).or_default().push(r.clone());
    }
    Ok(AlignedDataset {
        indicator: series.name.clone(),
        dates: series.dates[lo..hi].to_vec(),
        values: series.values[lo..hi].to_vec(),
        tweets: (lo..hi)
            .map(|i| tweets.remove(&i).unwrap_or_default())
            .collect(),
    })
}

/// A contiguous regime of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub sample_count: usize,
    #[serde(skip)]
    pub first_index: usize,
}

/// Cuts `series` into blocks. Each boundary date opens a new block at the
/// first point dated on or after it.
pub fn blocking_split(series: &FinancialSeries, boundaries: &[NaiveDate]) -> Result<Vec<Block>> {
    if boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IngestError::UnsortedBoundaries);
    }
    let (Some(&first), Some(&last)) = (series.dates.first(), series.dates.last()) else {
        return Ok(Vec::new());
    };
    let mut cuts = vec![0];
    for &b in boundaries {
        if b <= first || b > last {
            return Err(IngestError::BoundaryOutOfRange(b));
        }
        let idx = series.first_index_on_or_after(b);
        if idx == *cuts.last().expect("non-empty") {
            return Err(IngestError::UnsortedBoundaries);
        }
        cuts.push(idx);
    }
    cuts.push(series.len());
    Ok(cuts
        .windows(2)
        .map(|w| Block {
            start: series.dates[w[0]],
            end: series.dates[w[1] - 1],
            sample_count: w[1] - w[0],
            first_index: w[0],
        })
        .collect())
}

impl Block {
    /// The points of `series` inside this block.
    pub fn extract(&self, series: &FinancialSeries) -> FinancialSeries {
        let r = self.first_index..self.first_index + self.sample_count;
        FinancialSeries {
            name: series.name.clone(),
            dates: series.dates[r.clone()].to_vec(),
            values: series.values[r].to_vec(),
            skipped: 0,
        }
    }
}

/// Chronological split: the first `floor(fraction * N)` days train.
pub fn chrono_split(
    dataset: &AlignedDataset,
    train_fraction: f64,
) -> Result<(AlignedDataset, AlignedDataset)> {
    let n_train = split_point(dataset.len(), train_fraction)?;
    Ok((
        dataset.slice(0..n_train),
        dataset.slice(n_train..dataset.len()),
    ))
}

/// Number of leading items that go to the training side.
pub fn split_point(n: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(IngestError::BadFraction(train_fraction));
    }
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(IngestError::TooShort(n));
    }
    Ok(n_train)
}
