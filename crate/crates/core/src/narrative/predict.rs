//! End-to-end LLM prediction of next week's average indicator value from
//! a 30-day window of tweets and values.
//!
//! Given a window ending at trading day `t`, the target is the mean of the
//! values at `t+7 ..= t+14`. Answers are parsed from their final segment:
//! the text after the last `Prediction:` / `Final answer` / `Step 3`
//! marker, or the last non-empty line when no marker is present. A range
//! such as `18-20` is scored by its midpoint.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    cap_tweets_per_day, render_financial_block, render_tweet_block, LlmClient, NarrativeError,
};
use crate::ingest::{Indicator, TweetRecord};

/// Days of history given to the model.
pub const WINDOW_DAYS: usize = 30;
/// Offsets (in trading days after the window end) averaged for the target.
pub const TARGET_OFFSETS: std::ops::RangeInclusive<usize> = 7..=14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    ZeroShot,
    FewShot,
    Cot,
    /// Few-shot exemplars plus the three-step instructions.
    FewShotCot,
}

impl std::str::FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero-shot" => Ok(PromptMode::ZeroShot),
            "few-shot" => Ok(PromptMode::FewShot),
            "cot" => Ok(PromptMode::Cot),
            "few-shot-cot" => Ok(PromptMode::FewShotCot),
            other => Err(format!("unknown prompt mode {other:?}")),
        }
    }
}

/// A user-supplied input/output pair shown before the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyPrediction {
    pub value: f64,
    /// Bounds when the answer was a range.
    pub bounds: Option<(f64, f64)>,
    pub raw: String,
}

/// Renders the data part of a prediction query.
pub fn render_window(tweets: &[TweetRecord], values: &[(NaiveDate, f64)]) -> String {
    let values: BTreeMap<NaiveDate, f64> = values.iter().copied().collect();
    format!(
        "{}\n\n{}",
        render_financial_block(&values),
        render_tweet_block(&cap_tweets_per_day(tweets))
    )
}

pub fn build_prediction_prompt(
    tweets: &[TweetRecord],
    values: &[(NaiveDate, f64)],
    target: &Indicator,
    mode: PromptMode,
    examples: &[FewShotExample],
) -> Result<String, NarrativeError> {
    let few_shot = matches!(mode, PromptMode::FewShot | PromptMode::FewShotCot);
    if few_shot && examples.is_empty() {
        return Err(NarrativeError::MissingExamples);
    }
    let t = target.display_name();
    let mut out = format!(
        "You are a financial and NLP expert.\n\
         Your input 'Financial values' is a dictionary of {t} values keyed by date (yyyy-mm-dd), covering a month.\n\
         Your input 'Tweets' is a dictionary of tweets from Twitter keyed by publication date (yyyy-mm-dd), from the same month.\n\
         Predict the average {t} value of the week running from 7 to 14 trading days after the last given date.\n"
    );
    if matches!(mode, PromptMode::Cot | PromptMode::FewShotCot) {
        out.push_str(&format!(
            "Work in three steps:\n\
             Step 1: Analyse the tweets.\n\
             Step 2: Explain the potential influence of the tweets on the {t}.\n\
             Step 3: Predict the average {t} value for that week and give a rationale for the prediction.\n"
        ));
    }
    out.push_str("End your answer with a line of the form \"Prediction: <number>\".\n");
    if few_shot {
        out.push_str("\nExamples:\n");
        for ex in examples {
            out.push_str(&format!(
                "\nInput:\n{}\n\nOutput:\n{}\n",
                ex.input.trim_end(),
                ex.output.trim_end()
            ));
        }
    }
    out.push_str("\nInput:\n");
    out.push_str(&render_window(tweets, values));
    out.push_str("\n\nOutput:");
    Ok(out)
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(prediction\s*:|final answer\s*:?|step 3\s*:?)").expect("regex")
    })
}

fn number_or_range() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    const NUM: &str = r"(\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?)";
    RE.get_or_init(|| Regex::new(&format!(r"{NUM}(?:\s*(?:-|–|—|to)\s*{NUM})?")).expect("regex"))
}

/// The final-answer part of a response.
pub fn final_segment(response: &str) -> &str {
    if let Some(m) = marker().find_iter(response).last() {
        return &response[m.end()..];
    }
    response
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
}

/// Parses the first number or range in the final segment. A refusal
/// phrase there takes precedence.
pub fn parse_weekly_answer(
    response: &str,
    refusal_phrases: &[String],
) -> Result<WeeklyPrediction, NarrativeError> {
    let segment = final_segment(response);
    let lower = segment.to_lowercase();
    if refusal_phrases.iter().any(|p| lower.contains(p.as_str())) {
        return Err(NarrativeError::Refusal {
            raw: response.to_owned(),
        });
    }
    let caps = number_or_range()
        .captures(segment)
        .ok_or_else(|| NarrativeError::Parse {
            message: "no numeric value in answer".into(),
            raw: response.to_owned(),
            persisted: None,
        })?;
    let num = |i: usize| {
        caps.get(i).map(|m| {
            m.as_str()
                .replace(',', "")
                .parse::<f64>()
                .expect("regex digits")
        })
    };
    let lo = num(1).expect("group 1 always matches");
    let (value, bounds) = match num(2) {
        Some(hi) => ((lo + hi) / 2.0, Some((lo.min(hi), lo.max(hi)))),
        None => (lo, None),
    };
    Ok(WeeklyPrediction {
        value,
        bounds,
        raw: response.to_owned(),
    })
}

/// Sends the prediction prompt and parses the answer.
pub fn llm_predict_weekly_average(
    client: &LlmClient,
    tweets: &[TweetRecord],
    values: &[(NaiveDate, f64)],
    target: &Indicator,
    mode: PromptMode,
    examples: &[FewShotExample],
) -> Result<WeeklyPrediction, NarrativeError> {
    let prompt = build_prediction_prompt(tweets, values, target, mode, examples)?;
    let raw = client.complete(&prompt)?;
    parse_weekly_answer(&raw, &client.config().refusal_phrases)
}

/// Mean of the values 7..=14 trading days after index `end`, if the
/// series reaches that far.
pub fn weekly_average_target(values: &[f64], end: usize) -> Option<f64> {
    let hi = end + TARGET_OFFSETS.end();
    if hi >= values.len() {
        return None;
    }
    let lo = end + TARGET_OFFSETS.start();
    Some(values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64)
}
