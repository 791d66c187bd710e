//! LLM-driven narrative analysis.
//!
//! A month of tweets plus the target indicator's values over the same
//! month is rendered into a tagged analysis prompt; the model answers
//! with two tagged sections (an analysis of the tweets and their likely
//! effect on the indicator). Those analyses feed the integration prompts
//! used by the two-stage predictor, and the same client drives the
//! end-to-end weekly-average prediction protocol in [`predict`].

mod client;
pub mod predict;
pub mod stub;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direction::Direction;
use crate::ingest::{AlignedDataset, Indicator, TweetRecord};

pub use client::{cache_key, CachedAnalysis, LlmClient, LlmClientConfig};

/// Per-day tweet cap inside an analysis prompt.
pub const MAX_TWEETS_PER_DAY: usize = 10;
pub const DEFAULT_TEMPERATURE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum NarrativeError {
    #[error("tweet window is empty")]
    EmptyTweetWindow,
    #[error("no recent directions given")]
    EmptyDirections,
    #[error("few-shot mode needs at least one example")]
    MissingExamples,
    #[error("cannot parse response: {message}")]
    Parse {
        message: String,
        raw: String,
        /// Where the raw response was saved, if a cache is configured.
        persisted: Option<PathBuf>,
    },
    #[error("model refused to answer")]
    Refusal { raw: String },
    #[error("chat request failed: {0}")]
    Network(String),
    #[error("chat endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("cache error at {path}: {message}")]
    Cache { path: PathBuf, message: String },
}

/// A rendered-on-demand analysis request for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisPrompt {
    pub target: Indicator,
    pub instruction: String,
    pub financial: BTreeMap<NaiveDate, f64>,
    pub tweets: BTreeMap<NaiveDate, Vec<String>>,
}

impl AnalysisPrompt {
    /// First and last date present in either block.
    pub fn window(&self) -> (NaiveDate, NaiveDate) {
        let firsts = self
            .financial
            .keys()
            .next()
            .into_iter()
            .chain(self.tweets.keys().next());
        let lasts = self
            .financial
            .keys()
            .next_back()
            .into_iter()
            .chain(self.tweets.keys().next_back());
        let start = firsts.min().copied().expect("prompt has tweets");
        let end = lasts.max().copied().expect("prompt has tweets");
        (start, end)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.instruction);
        out.push_str("\n\nInput:\n");
        out.push_str(&render_financial_block(&self.financial));
        out.push_str("\n\n");
        out.push_str(&render_tweet_block(&self.tweets));
        out.push_str("\n\nOutput:");
        out
    }
}

pub(crate) fn render_financial_block(values: &BTreeMap<NaiveDate, f64>) -> String {
    let mut out = String::from("<Financial values>\n");
    for (d, v) in values {
        out.push_str(&format!("{}: {}\n", d.format("%Y-%m-%d"), v));
    }
    out.push_str("</Financial values>");
    out
}

pub(crate) fn render_tweet_block(tweets: &BTreeMap<NaiveDate, Vec<String>>) -> String {
    let mut out = String::from("<Tweets>\n");
    for (d, texts) in tweets {
        for t in texts {
            out.push_str(&format!("{}: {}\n", d.format("%Y-%m-%d"), one_line(t)));
        }
    }
    out.push_str("</Tweets>");
    out
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Instruction block of the analysis prompt for `target`.
pub fn analysis_instruction(target: &Indicator) -> String {
    let t = target.display_name();
    format!(
        "You are a financial and NLP expert, assisting on creating a summarised analysis on textual and financial data.\n\
         Your task is to create an analysis on given tweets from Twitter and on {t} values from the same time period.\n\
         Your output will be used for producing {t} predictions in the close-future.\n\
         Your input 'Financial values' is a dictionary of {t} values with their corresponding date (yyyy-mm-dd), from a time period of a month.\n\
         Your input 'Tweets' is a dictionary of tweets from Twitter with their publication date (yyyy-mm-dd), from the same time period. \
         The tweets were posted by opinion leaders and discuss about the news, current affairs, economy, finance, and politics.\n\
         To produce this analysis, first analyse the fear, stability and stress expressed in the tweets, \
         and then analyse their possible effects on the close-future {t} value.\n\
         Produce your output in the format:  <Analysis of Tweets>PLACE_HOLDER</Analysis of Tweets>\n\
         <Potential Effects on {t}>PLACE_HOLDER</Potential Effects on {t}>"
    )
}

/// Keeps at most [`MAX_TWEETS_PER_DAY`] tweets per day, most-followed
/// first (ties by id).
pub fn cap_tweets_per_day(tweets: &[TweetRecord]) -> BTreeMap<NaiveDate, Vec<String>> {
    let mut by_day: BTreeMap<NaiveDate, Vec<&TweetRecord>> = BTreeMap::new();
    for t in tweets {
        by_day.entry(t.date).or_default().push(t);
    }
    by_day
        .into_iter()
        .map(|(d, mut day)| {
            day.sort_by(|a, b| b.followers.cmp(&a.followers).then_with(|| a.id.cmp(&b.id)));
            (
                d,
                day.into_iter()
                    .take(MAX_TWEETS_PER_DAY)
                    .map(|t| t.text.clone())
                    .collect(),
            )
        })
        .collect()
}

pub fn build_analysis_prompt(
    tweets: &[TweetRecord],
    values: &[(NaiveDate, f64)],
    target: &Indicator,
) -> Result<AnalysisPrompt, NarrativeError> {
    if tweets.is_empty() {
        return Err(NarrativeError::EmptyTweetWindow);
    }
    Ok(AnalysisPrompt {
        target: target.clone(),
        instruction: analysis_instruction(target),
        financial: values.iter().copied().collect(),
        tweets: cap_tweets_per_day(tweets),
    })
}

/// Analysis prompt for the `window` trading days ending at index `end`
/// of an aligned dataset.
pub fn window_analysis_prompt(
    data: &AlignedDataset,
    end: usize,
    window: usize,
    target: &Indicator,
) -> Result<AnalysisPrompt, NarrativeError> {
    let start = (end + 1).saturating_sub(window.max(1));
    let days = start..=end.min(data.len().saturating_sub(1));
    let tweets: Vec<TweetRecord> = days
        .clone()
        .flat_map(|i| data.tweets_on(i).iter().cloned())
        .collect();
    let values: Vec<(NaiveDate, f64)> = days.map(|i| (data.dates()[i], data.values()[i])).collect();
    build_analysis_prompt(&tweets, &values, target)
}

/// The two sections of a model analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmAnalysis {
    pub tweet_analysis: String,
    pub impact_analysis: String,
    pub window: Option<(NaiveDate, NaiveDate)>,
    pub cache_key: Option<String>,
}

impl LlmAnalysis {
    /// Renders the sections in the tagged response format.
    pub fn render(&self, target: &Indicator) -> String {
        let t = target.display_name();
        format!(
            "<Analysis of Tweets>{}</Analysis of Tweets>\n<Potential Effects on {t}>{}</Potential Effects on {t}>",
            self.tweet_analysis, self.impact_analysis
        )
    }
}

fn analysis_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?is)<\s*Analysis of Tweets\s*>(.*?)</\s*Analysis of Tweets\s*>")
            .expect("regex")
    })
}

fn impact_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?is)<\s*Potential Effects?\b[^>]*>(.*?)</\s*Potential Effects?\b[^>]*>")
            .expect("regex")
    })
}

fn section(re: &Regex, response: &str) -> Option<String> {
    let body = re.captures(response)?.get(1)?.as_str().trim();
    (!body.is_empty()).then(|| body.to_owned())
}

/// Extracts the tagged sections from a model response.
pub fn parse_analysis(response: &str) -> Result<LlmAnalysis, NarrativeError> {
    let parse_err = |message: &str| NarrativeError::Parse {
        message: message.to_owned(),
        raw: response.to_owned(),
        persisted: None,
    };
    if response.trim().is_empty() {
        return Err(parse_err("empty response"));
    }
    let tweet_analysis =
        section(analysis_tag(), response).ok_or_else(|| parse_err("missing analysis section"))?;
    let impact_analysis =
        section(impact_tag(), response).ok_or_else(|| parse_err("missing impact section"))?;
    Ok(LlmAnalysis {
        tweet_analysis,
        impact_analysis,
        window: None,
        cache_key: None,
    })
}

/// Phrase describing a horizon in the task sentence.
pub fn horizon_phrase(horizon: u32) -> String {
    match horizon {
        1 => "tomorrow".into(),
        7 => "next week".into(),
        30 => "next month".into(),
        h => format!("in {h} days"),
    }
}

/// Segmented input for the two-stage text classifier. Either segment may
/// be absent (T-only or F-only prompts).
#[derive(Debug, Clone, Copy)]
pub struct IntegrationPrompt<'a> {
    pub summary: Option<&'a str>,
    pub directions: Option<&'a [Direction]>,
    pub target: &'a Indicator,
    pub horizon: u32,
}

impl IntegrationPrompt<'_> {
    pub fn render(&self) -> String {
        let t = self.target.display_name();
        let mut out = String::from("[CLS]");
        if let Some(summary) = self.summary {
            out.push_str(" Summary of recent tweets: ");
            out.push_str(&one_line(summary));
            if self.directions.is_some() {
                out.push_str(" [SEP]");
            }
        }
        if let Some(dirs) = self.directions {
            let rendered: Vec<String> = dirs
                .iter()
                .map(|d| format!("{}={}", d.name(), d.bit()))
                .collect();
            out.push_str(&format!(
                " Recent {t} directions of change: {}.",
                rendered.join(", ")
            ));
        }
        out.push_str(&format!(
            " [EOS] Predict {t} direction of change {}:</s>",
            horizon_phrase(self.horizon)
        ));
        out
    }
}

/// Analysis summary plus recent directions, for a TF text classifier.
pub fn build_integration_prompt(
    analysis: &LlmAnalysis,
    recent_directions: &[Direction],
    target: &Indicator,
    horizon: u32,
) -> Result<String, NarrativeError> {
    if recent_directions.is_empty() {
        return Err(NarrativeError::EmptyDirections);
    }
    Ok(IntegrationPrompt {
        summary: Some(&analysis.tweet_analysis),
        directions: Some(recent_directions),
        target,
        horizon,
    }
    .render())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn tweet(id: usize, date: &str, followers: u64, text: &str) -> TweetRecord {
        TweetRecord {
            id: id.to_string(),
            date: d(date),
            text: text.into(),
            followers,
            topic: None,
            user_id: String::new(),
        }
    }

    #[test]
    fn prompt_contains_both_blocks() {
        let tweets = [
            tweet(1, "2021-09-01", 10, "Boycott now."),
            tweet(2, "2021-09-02", 5, "Stocks\nslide"),
        ];
        let values = [(d("2021-09-01"), 4524.09), (d("2021-09-02"), 4536.95)];
        let p = build_analysis_prompt(&tweets, &values, &Indicator::Sp500).unwrap();
        let text = p.render();
        assert!(text.contains(
            "<Financial values>\n2021-09-01: 4524.09\n2021-09-02: 4536.95\n</Financial values>"
        ));
        assert!(text
            .contains("<Tweets>\n2021-09-01: Boycott now.\n2021-09-02: Stocks slide\n</Tweets>"));
        assert!(text.contains("first analyse the fear, stability and stress"));
        assert!(text.ends_with("Output:"));
        assert_eq!(p.window(), (d("2021-09-01"), d("2021-09-02")));
    }

    #[test]
    fn per_day_cap_keeps_most_followed() {
        let tweets: Vec<_> = (0..15)
            .map(|i| tweet(i, "2021-09-01", i as u64, &format!("t{i}")))
            .collect();
        let p = build_analysis_prompt(&tweets, &[], &Indicator::Vix).unwrap();
        let day = &p.tweets[&d("2021-09-01")];
        assert_eq!(day.len(), 10);
        assert_eq!(day[0], "t14");
        assert!(!day.contains(&"t4".to_string()));
    }

    #[test]
    fn empty_window_rejected() {
        assert!(matches!(
            build_analysis_prompt(&[], &[], &Indicator::Vix),
            Err(NarrativeError::EmptyTweetWindow)
        ));
    }

    #[test]
    fn parse_well_formed_and_broken() {
        let resp = "Sure.\n<Analysis of Tweets>Fear is rising.</Analysis of Tweets>\n\
                    <Potential Effects on S&P 500> Likely a dip. </Potential Effects on S&P 500>";
        let a = parse_analysis(resp).unwrap();
        assert_eq!(a.tweet_analysis, "Fear is rising.");
        assert_eq!(a.impact_analysis, "Likely a dip.");

        let loose = "<Analysis of Tweets>x</Analysis of Tweets><Potential Effect on VIX>y</Potential Effect on VIX>";
        assert_eq!(parse_analysis(loose).unwrap().impact_analysis, "y");

        let err = parse_analysis("<Analysis of Tweets>only</Analysis of Tweets>").unwrap_err();
        assert!(
            matches!(&err, NarrativeError::Parse { message, .. } if message == "missing impact section")
        );
        assert!(matches!(
            parse_analysis(""),
            Err(NarrativeError::Parse { .. })
        ));
    }

    #[test]
    fn integration_prompt_directions() {
        let a = LlmAnalysis {
            tweet_analysis: "Mixed views.".into(),
            impact_analysis: "n/a".into(),
            window: None,
            cache_key: None,
        };
        let dirs: Vec<_> = [0, 1, 1, 1, 0, 0, 0]
            .into_iter()
            .map(Direction::from_bit)
            .collect();
        let p = build_integration_prompt(&a, &dirs, &Indicator::Sp500, 1).unwrap();
        assert!(p.contains(
            "decrease=0, increase=1, increase=1, increase=1, decrease=0, decrease=0, decrease=0"
        ));
        assert!(p.ends_with("Predict S&P 500 direction of change tomorrow:</s>"));
        let single =
            build_integration_prompt(&a, &[Direction::Increase], &Indicator::Sp500, 7).unwrap();
        assert!(single.contains("change: increase=1."));
        assert!(single.contains("next week"));
        assert!(build_integration_prompt(&a, &[], &Indicator::Sp500, 1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn render_then_parse_round_trips(a in "[A-Za-z0-9 .,!?']{1,80}", b in "[A-Za-z0-9 .,!?']{1,80}") {
            proptest::prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
            let analysis = LlmAnalysis {
                tweet_analysis: a.trim().to_owned(),
                impact_analysis: b.trim().to_owned(),
                window: None,
                cache_key: None,
            };
            for target in [Indicator::Sp500, Indicator::Vix, Indicator::Ffr] {
                let back = parse_analysis(&analysis.render(&target)).unwrap();
                proptest::prop_assert_eq!(&back.tweet_analysis, &analysis.tweet_analysis);
                proptest::prop_assert_eq!(&back.impact_analysis, &analysis.impact_analysis);
            }
        }
    }
}
