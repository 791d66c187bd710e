//! End-to-end experiments: data, features, chronological split, fitting,
//! evaluation and pairwise McNemar tests, written as JSON, Markdown and a
//! per-sample predictions CSV.
//!
//! A sample is a prediction date `t`. Its features use the `window`
//! trading days ending at `t` and the tweets attached to those days; its
//! label uses `V(t+h-1)` and `V(t+h)`. Training samples whose label date
//! falls on or after the first test prediction date are dropped, so every
//! date a training sample touches precedes the test period.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{evaluate, mcnemar, McNemarResult, MetricsReport};
use super::{make_labels, HarnessError, TaskKind, TaskSpec, HORIZONS};
use crate::direction::Direction;
use crate::embed::{daily_embedding, DailyMode, EmbedderSpec};
use crate::ingest::{
    align, load_series, load_tweets, preprocess, split_point, AlignedDataset, FinancialSeries,
    Indicator, PreprocessRules, TweetCorpus,
};
use crate::models::{
    concat_features, financial_baseline, fit_linear, fit_logistic, fit_text_classifier,
    train_darnn, AttentionRnn, BaselineContext, BaselineKind, DarnnConfig, DarnnSample, InputClass,
    Model, ModelArtifact, Prediction, Regularization, TrainOptions,
};
use crate::narrative::{
    build_integration_prompt, window_analysis_prompt, LlmClient, LlmClientConfig,
};
use crate::sentiment::{daily_sentiment_at, SentimentLexicon};
use crate::synthgen::{
    gen_random_texts, gen_random_walk, gen_synthetic_narratives, shuffle_dates, SynthConfig,
};

/// Recent directions given to the week-majority baseline.
pub const MAJORITY_WINDOW: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    pub models: Vec<ModelSpec>,
    pub task: TaskSection,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSection {
    pub target: Indicator,
    pub task: TaskKind,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataConfig {
    Files {
        #[serde(default)]
        tweets: Option<PathBuf>,
        series: PathBuf,
        column: String,
        #[serde(default)]
        min_followers: u64,
        #[serde(default)]
        preprocess: Option<PreprocessRules>,
    },
    Synthetic {
        #[serde(default = "default_days")]
        days: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_start_value")]
        start_value: f64,
        text: SyntheticText,
        #[serde(default)]
        synth: SynthConfig,
    },
}

fn default_days() -> usize {
    500
}
fn default_sigma() -> f64 {
    0.01
}
fn default_start_value() -> f64 {
    100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticText {
    Narratives,
    Random,
    ShuffledNarratives,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinancialRepr {
    Value,
    PctChange,
    /// Direction of each daily change as 0/1.
    Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextRepr {
    Sentiment,
    Embedding,
    /// LLM analysis turned into an integration prompt.
    Analysis,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub window: usize,
    pub financial: FinancialRepr,
    pub text: TextRepr,
    pub embedder: EmbedderSpec,
    pub embedding_mode: DailyMode,
    pub llm: Option<LlmClientConfig>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window: 7,
            financial: FinancialRepr::PctChange,
            text: TextRepr::Sentiment,
            embedder: EmbedderSpec::Hashing {
                dimension: 32,
                seed: 0,
            },
            embedding_mode: DailyMode::IndividualMean,
            llm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub train_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default = "default_kind")]
    pub kind: InputClass,
    #[serde(flatten)]
    pub architecture: ArchitectureSpec,
}

fn default_kind() -> InputClass {
    InputClass::Tf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    None,
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "kebab-case")]
pub enum ArchitectureSpec {
    Baseline {
        baseline: BaselineKind,
    },
    Linear {
        #[serde(default = "default_penalty")]
        penalty: Penalty,
        #[serde(default)]
        lambda: f64,
    },
    Logistic {
        #[serde(default = "default_logistic_lambda")]
        lambda: f64,
    },
    Darnn {
        #[serde(default)]
        train: TrainOptions,
        #[serde(default = "default_hidden")]
        hidden: usize,
    },
    TextClassifier {
        #[serde(default = "default_logistic_lambda")]
        lambda: f64,
    },
}

fn default_penalty() -> Penalty {
    Penalty::None
}
fn default_logistic_lambda() -> f64 {
    1e-2
}
fn default_hidden() -> usize {
    32
}

impl ArchitectureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ArchitectureSpec::Baseline { .. } => "baseline",
            ArchitectureSpec::Linear { .. } => "linear",
            ArchitectureSpec::Logistic { .. } => "logistic",
            ArchitectureSpec::Darnn { .. } => "darnn",
            ArchitectureSpec::TextClassifier { .. } => "text-classifier",
        }
    }
}

/// Sets `value` at a dotted path such as `features.window`, creating
/// objects as needed. Array elements are addressed by index.
pub fn apply_override(
    root: &mut serde_json::Value,
    key: &str,
    raw: &str,
) -> Result<(), HarnessError> {
    use serde_json::Value;
    let bad = |m: String| HarnessError::stage("config", m);
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad(format!("bad override key {key:?}")));
    }
    for part in &parts[..parts.len() - 1] {
        node = match node {
            Value::Array(items) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| bad(format!("{key}: {part:?} is not an index")))?;
                items
                    .get_mut(i)
                    .ok_or_else(|| bad(format!("{key}: index {i} out of range")))?
            }
            Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default())),
            _ => return Err(bad(format!("{key}: {part:?} is not inside an object"))),
        };
    }
    let last = parts[parts.len() - 1];
    match node {
        Value::Object(map) => {
            map.insert(last.to_owned(), parsed);
        }
        Value::Array(items) => {
            let i: usize = last
                .parse()
                .map_err(|_| bad(format!("{key}: {last:?} is not an index")))?;
            *items
                .get_mut(i)
                .ok_or_else(|| bad(format!("{key}: index {i} out of range")))? = parsed;
        }
        _ => return Err(bad(format!("{key}: parent is not an object"))),
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::stage("config", e))
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Self::load_with_overrides(path, &[])
    }

    /// Like [`load`](Self::load), then sets each dotted `key=value` pair on
    /// the JSON before deserializing. Values parse as JSON when they can
    /// and are taken as strings otherwise.
    pub fn load_with_overrides(
        path: impl AsRef<Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::stage("config", format!("{}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| HarnessError::stage("config", e))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        let mut cfg: Self =
            serde_json::from_value(value).map_err(|e| HarnessError::stage("config", e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataConfig::Files { tweets, series, .. } = &mut cfg.data {
            if series.is_relative() {
                *series = base.join(&*series);
            }
            if let Some(t) = tweets {
                if t.is_relative() {
                    *t = base.join(&*t);
                }
            }
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical (key-sorted) JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::stage("config", m));
        if !HORIZONS.contains(&self.task.horizon) {
            return err(format!(
                "horizon {} not supported (use 1, 7 or 30)",
                self.task.horizon
            ));
        }
        if self.features.window == 0 {
            return err("feature window must be positive".into());
        }
        if self.models.is_empty() {
            return err("no models configured".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            if !names.insert(&m.name) {
                return err(format!("duplicate model name {:?}", m.name));
            }
            let classification = self.task.task.is_classification();
            let text = self.features.text;
            match &m.architecture {
                ArchitectureSpec::Baseline { baseline } => {
                    if classification && !baseline.supports_classification() {
                        return err(format!(
                            "{}: baseline {} needs a regression task",
                            m.name,
                            baseline.name()
                        ));
                    }
                    if !classification && !baseline.supports_regression() {
                        return err(format!(
                            "{}: baseline {} needs a classification task",
                            m.name,
                            baseline.name()
                        ));
                    }
                }
                ArchitectureSpec::Logistic { .. } | ArchitectureSpec::TextClassifier { .. }
                    if !classification =>
                {
                    return err(format!(
                        "{}: {} needs a classification task",
                        m.name,
                        m.architecture.name()
                    ));
                }
                ArchitectureSpec::TextClassifier { .. }
                    if text != TextRepr::Analysis || m.kind != InputClass::Tf =>
                {
                    return err(format!(
                        "{}: text-classifier needs TF kind and analysis text features",
                        m.name
                    ));
                }
                _ if m.kind.uses_text()
                    && matches!(text, TextRepr::None | TextRepr::Analysis)
                    && !matches!(
                        m.architecture,
                        ArchitectureSpec::TextClassifier { .. } | ArchitectureSpec::Baseline { .. }
                    ) =>
                {
                    return err(format!(
                        "{}: {} model needs sentiment or embedding text features",
                        m.name, m.kind
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    /// Dropped from training because its label reaches into the test period.
    Purged,
}

/// Dates touched by one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub date: NaiveDate,
    /// Latest date of any value or tweet used in the features.
    pub feature_max_date: NaiveDate,
    pub label_date: NaiveDate,
    pub label: f64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub features_not_after_prediction: bool,
    pub max_train_date: NaiveDate,
    pub min_test_date: NaiveDate,
    pub train_before_test: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub name: String,
    pub spec: TaskSpec,
    pub architecture: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMcNemar {
    pub a: String,
    pub b: String,
    pub result: McNemarResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub seed: u64,
    pub task: TaskSection,
    pub samples: usize,
    pub train: usize,
    pub purged: usize,
    pub test: usize,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub models: Vec<ModelResult>,
    pub mcnemar: Vec<PairwiseMcNemar>,
    pub leakage: LeakageAudit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub samples: Vec<SampleRecord>,
    /// Test-set predictions per model, in config order.
    pub predictions: Vec<(String, Vec<f64>)>,
}

struct Sample {
    index: usize,
    record: SampleRecord,
    f: Vec<f64>,
    /// One text vector per window day (empty without text features).
    t_steps: Vec<Vec<f64>>,
    prompt: Option<String>,
    ctx: BaselineContext,
}

impl Sample {
    fn t_flat(&self) -> Vec<f64> {
        self.t_steps.iter().flatten().copied().collect()
    }

    fn vector(&self, kind: InputClass) -> Vec<f64> {
        match kind {
            InputClass::F => self.f.clone(),
            InputClass::T => self.t_flat(),
            InputClass::Tf => concat_features(&self.t_flat(), &self.f),
        }
    }
}

/// Loads or generates the tweets and series a config describes. Synthetic
/// data uses `seed` for the walk, `seed + 1` for texts and `seed + 2` for
/// the date shuffle.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(TweetCorpus, FinancialSeries), HarnessError> {
    let ingest = |e: &dyn std::fmt::Display| HarnessError::stage("ingest", e);
    match &cfg.data {
        DataConfig::Files {
            tweets,
            series,
            column,
            min_followers,
            preprocess: rules,
        } => {
            let series = load_series(series, column).map_err(|e| ingest(&e))?;
            let corpus = match tweets {
                Some(path) => load_tweets(path, *min_followers).map_err(|e| ingest(&e))?,
                None => TweetCorpus::default(),
            };
            let corpus = match rules {
                Some(r) => preprocess(&corpus, *r),
                None => corpus,
            };
            Ok((corpus, series))
        }
        DataConfig::Synthetic {
            days,
            sigma,
            start_value,
            text,
            synth,
        } => {
            let series =
                gen_random_walk(*days, *sigma, *start_value, cfg.seed).map_err(|e| ingest(&e))?;
            let synth = SynthConfig {
                seed: cfg.seed.wrapping_add(1),
                ..synth.clone()
            };
            let corpus = match text {
                SyntheticText::Narratives => {
                    gen_synthetic_narratives(&series, cfg.task.horizon, &synth)
                }
                SyntheticText::Random => gen_random_texts(&synth, series.dates()),
                SyntheticText::ShuffledNarratives => {
                    gen_synthetic_narratives(&series, cfg.task.horizon, &synth)
                        .and_then(|c| shuffle_dates(&c, cfg.seed.wrapping_add(2)))
                }
                SyntheticText::None => Ok(TweetCorpus::default()),
            }
            .map_err(|e| ingest(&e))?;
            Ok((corpus, series))
        }
    }
}

fn financial_step(repr: FinancialRepr, values: &[f64], i: usize) -> f64 {
    match repr {
        FinancialRepr::Value => values[i],
        FinancialRepr::PctChange => 100.0 * (values[i] - values[i - 1]) / values[i - 1],
        FinancialRepr::Direction => Direction::between(values[i - 1], values[i]).as_f64(),
    }
}

fn daily_text_vectors(
    cfg: &FeatureConfig,
    data: &AlignedDataset,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let feat = |e: &dyn std::fmt::Display| HarnessError::stage("features", e);
    match cfg.text {
        TextRepr::Sentiment => {
            let lex = SentimentLexicon::bundled();
            Ok((0..data.len())
                .map(|i| vec![daily_sentiment_at(data, i, lex)])
                .collect())
        }
        TextRepr::Embedding => {
            let embedder = cfg.embedder.build().map_err(|e| feat(&e))?;
            (0..data.len())
                .map(|i| {
                    daily_embedding(&embedder, data.tweets_on(i), cfg.embedding_mode)
                        .map(|v| v.0)
                        .map_err(|e| feat(&e))
                })
                .collect()
        }
        TextRepr::Analysis | TextRepr::None => Ok(vec![Vec::new(); data.len()]),
    }
}

/// What the financial baselines see at prediction index `t`: the latest
/// known label and the last [`MAJORITY_WINDOW`] directions. Needs
/// `t >= MAJORITY_WINDOW`.
pub fn baseline_context(values: &[f64], t: usize, task: TaskKind) -> BaselineContext {
    let recent: Vec<Direction> = (t + 1 - MAJORITY_WINDOW..=t)
        .map(|i| Direction::between(values[i - 1], values[i]))
        .collect();
    BaselineContext {
        previous_value: Some(task.label(values[t - 1], values[t])),
        previous_direction: recent.last().copied(),
        recent_directions: Some(recent),
        train_majority: None,
        train_mean: None,
        classification: task.is_classification(),
    }
}

/// Adds the majority direction and mean of the training labels.
pub fn with_train_stats(ctx: BaselineContext, train_labels: &[f64]) -> BaselineContext {
    let dirs: Vec<Direction> = train_labels.iter().map(|v| to_direction(*v)).collect();
    BaselineContext {
        train_majority: Some(Direction::majority(&dirs)),
        train_mean: Some(train_labels.iter().sum::<f64>() / train_labels.len().max(1) as f64),
        ..ctx
    }
}

fn build_samples(
    cfg: &ExperimentConfig,
    data: &AlignedDataset,
) -> Result<Vec<Sample>, HarnessError> {
    let task = cfg.task.task;
    let h = cfg.task.horizon;
    let w = cfg.features.window;
    let values = data.values();
    let dates = data.dates();
    let labels =
        make_labels(dates, values, task, h).map_err(|e| HarnessError::stage("labels", e))?;
    let text = daily_text_vectors(&cfg.features, data)?;
    let start = w.max(MAJORITY_WINDOW);
    let mut samples = Vec::new();
    for point in labels.points.iter().filter(|p| p.index >= start) {
        let t = point.index;
        let days = t + 1 - w..=t;
        let f: Vec<f64> = days
            .clone()
            .map(|i| financial_step(cfg.features.financial, values, i))
            .collect();
        let t_steps: Vec<Vec<f64>> = days.clone().map(|i| text[i].clone()).collect();
        let tweet_max = days
            .clone()
            .flat_map(|i| data.tweets_on(i).iter().map(|r| r.date))
            .max();
        let feature_max_date = tweet_max.map_or(dates[t], |d| d.max(dates[t]));
        let ctx = baseline_context(values, t, task);
        samples.push(Sample {
            index: t,
            record: SampleRecord {
                date: point.date,
                feature_max_date,
                label_date: point.label_date,
                label: point.value,
                split: Split::Test,
            },
            f,
            t_steps,
            prompt: None,
            ctx,
        });
    }
    if samples.is_empty() {
        return Err(HarnessError::stage(
            "features",
            "no samples: series too short for window and horizon",
        ));
    }
    if cfg.features.text == TextRepr::Analysis {
        attach_prompts(cfg, data, &mut samples)?;
    }
    Ok(samples)
}

fn attach_prompts(
    cfg: &ExperimentConfig,
    data: &AlignedDataset,
    samples: &mut [Sample],
) -> Result<(), HarnessError> {
    let llm = |e: &dyn std::fmt::Display| HarnessError::stage("llm", e);
    let client =
        LlmClient::new(cfg.features.llm.clone().unwrap_or_default()).map_err(|e| llm(&e))?;
    let w = cfg.features.window;
    let target = &cfg.task.target;
    let prompts = samples
        .iter()
        .map(|s| window_analysis_prompt(data, s.index, w, target).map_err(|e| llm(&e)))
        .collect::<Result<Vec<_>, _>>()?;
    let analyses = client.request_analyses(&prompts);
    for (s, analysis) in samples.iter_mut().zip(analyses) {
        let analysis = analysis.map_err(|e| llm(&e))?;
        let dirs = s.ctx.recent_directions.clone().unwrap_or_default();
        let prompt = build_integration_prompt(&analysis, &dirs, target, cfg.task.horizon as u32)
            .map_err(|e| llm(&e))?;
        s.prompt = Some(prompt);
    }
    Ok(())
}

/// Per-column standardization with training statistics.
struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for r in rows {
            var.iter_mut()
                .zip(r)
                .zip(&mean)
                .for_each(|((s, v), m)| *s += (v - m).powi(2) / n);
        }
        let std = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, std }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

fn to_direction(v: f64) -> Direction {
    if v >= 0.5 {
        Direction::Increase
    } else {
        Direction::Decrease
    }
}

fn fit_predict(
    cfg: &ExperimentConfig,
    spec: &ModelSpec,
    train: &[&Sample],
    test: &[&Sample],
) -> Result<Vec<f64>, HarnessError> {
    let fit_err =
        |e: &dyn std::fmt::Display| HarnessError::stage("fit", format!("{}: {e}", spec.name));
    let classification = cfg.task.task.is_classification();
    let train_labels: Vec<f64> = train.iter().map(|s| s.record.label).collect();
    let finish = |raw: Vec<f64>| -> Vec<f64> {
        if classification {
            raw.into_iter().map(|v| to_direction(v).as_f64()).collect()
        } else {
            raw
        }
    };
    match &spec.architecture {
        ArchitectureSpec::Baseline { baseline } => test
            .iter()
            .map(|s| {
                let ctx = with_train_stats(s.ctx.clone(), &train_labels);
                financial_baseline(*baseline, &ctx)
                    .map(Prediction::as_f64)
                    .map_err(|e| HarnessError::stage("predict", format!("{}: {e}", spec.name)))
            })
            .collect(),
        ArchitectureSpec::Linear { penalty, lambda } => {
            let reg = match penalty {
                Penalty::None => Regularization::None,
                Penalty::L1 => Regularization::L1(*lambda),
                Penalty::L2 => Regularization::L2(*lambda),
            };
            let rows: Vec<Vec<f64>> = train.iter().map(|s| s.vector(spec.kind)).collect();
            let z = Standardizer::fit(&rows);
            let x: Vec<Vec<f64>> = rows.iter().map(|r| z.apply(r)).collect();
            let model = fit_linear(&x, &train_labels, reg).map_err(|e| fit_err(&e))?;
            Ok(finish(
                test.iter()
                    .map(|s| model.predict(&z.apply(&s.vector(spec.kind))))
                    .collect(),
            ))
        }
        ArchitectureSpec::Logistic { lambda } => {
            let rows: Vec<Vec<f64>> = train.iter().map(|s| s.vector(spec.kind)).collect();
            let z = Standardizer::fit(&rows);
            let x: Vec<Vec<f64>> = rows.iter().map(|r| z.apply(r)).collect();
            let y: Vec<bool> = train_labels.iter().map(|v| *v >= 0.5).collect();
            let model = fit_logistic(&x, &y, *lambda).map_err(|e| fit_err(&e))?;
            Ok(test
                .iter()
                .map(|s| {
                    model
                        .predict_direction(&z.apply(&s.vector(spec.kind)))
                        .as_f64()
                })
                .collect())
        }
        ArchitectureSpec::Darnn {
            train: opts,
            hidden,
        } => {
            let drivers_of = |s: &Sample| -> Vec<Vec<f64>> {
                match spec.kind {
                    InputClass::F => s.f.iter().map(|v| vec![*v]).collect(),
                    InputClass::T | InputClass::Tf => s.t_steps.clone(),
                }
            };
            let history_of = |s: &Sample| -> Vec<f64> {
                match spec.kind {
                    InputClass::T => vec![0.0; s.f.len()],
                    InputClass::F | InputClass::Tf => s.f.clone(),
                }
            };
            let rows: Vec<Vec<f64>> = train.iter().flat_map(|s| drivers_of(s)).collect();
            let z = Standardizer::fit(&rows);
            let sample = |s: &Sample| DarnnSample {
                drivers: drivers_of(s).iter().map(|r| z.apply(r)).collect(),
                history: history_of(s),
                label: s.record.label,
            };
            let train_set: Vec<DarnnSample> = train.iter().map(|s| sample(s)).collect();
            let config = DarnnConfig {
                window: cfg.features.window,
                drivers: train_set[0].drivers[0].len(),
                encoder_hidden: *hidden,
                decoder_hidden: *hidden,
                seed: cfg.seed,
            };
            let model = AttentionRnn::new(config).map_err(|e| fit_err(&e))?;
            let opts = TrainOptions {
                seed: cfg.seed,
                ..*opts
            };
            let (model, _) = train_darnn(model, &train_set, &opts).map_err(|e| fit_err(&e))?;
            let raw = test
                .iter()
                .map(|s| {
                    let ds = sample(s);
                    model
                        .predict(&ds.drivers, &ds.history)
                        .map_err(|e| fit_err(&e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(finish(raw))
        }
        ArchitectureSpec::TextClassifier { lambda } => {
            let embedder = cfg.features.embedder.build().map_err(|e| fit_err(&e))?;
            let prompt = |s: &Sample| s.prompt.clone().unwrap_or_default();
            let prompts: Vec<String> = train.iter().map(|s| prompt(s)).collect();
            let refs: Vec<&str> = prompts.iter().map(String::as_str).collect();
            let y: Vec<bool> = train_labels.iter().map(|v| *v >= 0.5).collect();
            let clf = fit_text_classifier(&refs, &y, embedder, *lambda).map_err(|e| fit_err(&e))?;
            let test_prompts: Vec<String> = test.iter().map(|s| prompt(s)).collect();
            let refs: Vec<&str> = test_prompts.iter().map(String::as_str).collect();
            Ok(clf
                .predict_batch(&refs)
                .map_err(|e| fit_err(&e))?
                .into_iter()
                .map(Direction::as_f64)
                .collect())
        }
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<(Vec<Sample>, NaiveDate), HarnessError> {
    cfg.validate()?;
    let (corpus, series) = load_data(cfg)?;
    let data = align(&corpus, &series).map_err(|e| HarnessError::stage("ingest", e))?;
    let mut samples = build_samples(cfg, &data)?;
    let n_train = split_point(samples.len(), cfg.eval.train_fraction)
        .map_err(|e| HarnessError::stage("split", e))?;
    let test_start = samples[n_train].record.date;
    for (i, s) in samples.iter_mut().enumerate() {
        s.record.split = if i >= n_train {
            Split::Test
        } else if s.record.label_date >= test_start {
            Split::Purged
        } else {
            Split::Train
        };
    }
    Ok((samples, test_start))
}

/// One row of [`FeatureTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub record: SampleRecord,
    /// Window text vectors, flattened day by day.
    pub t: Vec<f64>,
    pub f: Vec<f64>,
}

impl FeatureRow {
    pub fn vector(&self, kind: InputClass) -> Vec<f64> {
        match kind {
            InputClass::F => self.f.clone(),
            InputClass::T => self.t.clone(),
            InputClass::Tf => concat_features(&self.t, &self.f),
        }
    }

    /// Text block reshaped to one row per window day.
    pub fn t_steps(&self, window: usize) -> Vec<Vec<f64>> {
        let width = self.t.len() / window.max(1);
        if width == 0 {
            return Vec::new();
        }
        self.t.chunks(width).map(<[f64]>::to_vec).collect()
    }
}

/// The windowed sample matrix an experiment config produces, with split
/// assignments. Serializes to CSV with columns
/// `date,feature_max_date,label_date,label,split,t0..,f0..`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub window: usize,
    pub rows: Vec<FeatureRow>,
}

pub fn feature_table(cfg: &ExperimentConfig) -> Result<FeatureTable, HarnessError> {
    let (samples, _) = prepare(cfg)?;
    Ok(FeatureTable {
        window: cfg.features.window,
        rows: samples
            .into_iter()
            .map(|s| FeatureRow {
                t: s.t_flat(),
                record: s.record,
                f: s.f,
            })
            .collect(),
    })
}

impl FeatureTable {
    pub fn to_csv(&self) -> String {
        let (tw, fw) = self.rows.first().map_or((0, 0), |r| (r.t.len(), r.f.len()));
        let mut out = String::from("date,feature_max_date,label_date,label,split");
        (0..tw).for_each(|i| {
            let _ = write!(out, ",t{i}");
        });
        (0..fw).for_each(|i| {
            let _ = write!(out, ",f{i}");
        });
        out.push('\n');
        for r in &self.rows {
            let split = serde_json::to_value(r.record.split).expect("split");
            let _ = write!(
                out,
                "{},{},{},{},{}",
                r.record.date,
                r.record.feature_max_date,
                r.record.label_date,
                r.record.label,
                split.as_str().unwrap_or_default()
            );
            for v in r.t.iter().chain(&r.f) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output; the window is the number of
    /// `f` columns.
    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let bad = |m: String| HarnessError::stage("features", m);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 5
            || cols[..5] != ["date", "feature_max_date", "label_date", "label", "split"]
        {
            return Err(bad("unexpected feature table header".into()));
        }
        let is_t: Vec<bool> = cols[5..].iter().map(|c| c.starts_with('t')).collect();
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let date = |i: usize| {
                rec[i]
                    .parse::<NaiveDate>()
                    .map_err(|e| bad(format!("row {}: {e}", line + 2)))
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| bad(format!("row {}: {e}", line + 2)))
            };
            let split: Split = serde_json::from_value(serde_json::Value::String(rec[4].to_owned()))
                .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
            let mut t = Vec::new();
            let mut f = Vec::new();
            for (j, cell) in rec.iter().skip(5).enumerate() {
                if is_t[j] {
                    t.push(num(cell)?)
                } else {
                    f.push(num(cell)?)
                }
            }
            rows.push(FeatureRow {
                record: SampleRecord {
                    date: date(0)?,
                    feature_max_date: date(1)?,
                    label_date: date(2)?,
                    label: num(&rec[3])?,
                    split,
                },
                t,
                f,
            });
        }
        let window = is_t.iter().filter(|t| !**t).count();
        Ok(Self { window, rows })
    }
}

fn darnn_parts(kind: InputClass, row: &FeatureRow, window: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let drivers = match kind {
        InputClass::F => row.f.iter().map(|v| vec![*v]).collect(),
        InputClass::T | InputClass::Tf => row.t_steps(window),
    };
    let history = match kind {
        InputClass::T => vec![0.0; row.f.len()],
        InputClass::F | InputClass::Tf => row.f.clone(),
    };
    (drivers, history)
}

/// Fits one model on the `train` rows of a feature table. The column
/// standardization travels with the artifact as the `feature_mean` and
/// `feature_std` parameters, and the task under `config.task`.
pub fn train_table_model(
    table: &FeatureTable,
    spec: &ModelSpec,
    task: &TaskSection,
    seed: u64,
) -> Result<ModelArtifact, HarnessError> {
    let fit_err =
        |e: &dyn std::fmt::Display| HarnessError::stage("fit", format!("{}: {e}", spec.name));
    let train: Vec<&FeatureRow> = table
        .rows
        .iter()
        .filter(|r| r.record.split == Split::Train)
        .collect();
    if train.len() < 2 {
        return Err(HarnessError::stage("split", "fewer than 2 training rows"));
    }
    let labels: Vec<f64> = train.iter().map(|r| r.record.label).collect();
    let (model, z) = match &spec.architecture {
        ArchitectureSpec::Linear { penalty, lambda } => {
            let reg = match penalty {
                Penalty::None => Regularization::None,
                Penalty::L1 => Regularization::L1(*lambda),
                Penalty::L2 => Regularization::L2(*lambda),
            };
            let rows: Vec<Vec<f64>> = train.iter().map(|r| r.vector(spec.kind)).collect();
            let z = Standardizer::fit(&rows);
            let x: Vec<Vec<f64>> = rows.iter().map(|r| z.apply(r)).collect();
            (
                Model::Linear(fit_linear(&x, &labels, reg).map_err(|e| fit_err(&e))?),
                z,
            )
        }
        ArchitectureSpec::Logistic { lambda } => {
            let rows: Vec<Vec<f64>> = train.iter().map(|r| r.vector(spec.kind)).collect();
            let z = Standardizer::fit(&rows);
            let x: Vec<Vec<f64>> = rows.iter().map(|r| z.apply(r)).collect();
            let y: Vec<bool> = labels.iter().map(|v| *v >= 0.5).collect();
            (
                Model::Logistic(fit_logistic(&x, &y, *lambda).map_err(|e| fit_err(&e))?),
                z,
            )
        }
        ArchitectureSpec::Darnn {
            train: opts,
            hidden,
        } => {
            let parts: Vec<_> = train
                .iter()
                .map(|r| darnn_parts(spec.kind, r, table.window))
                .collect();
            let z = Standardizer::fit(
                &parts
                    .iter()
                    .flat_map(|(d, _)| d.clone())
                    .collect::<Vec<_>>(),
            );
            let set: Vec<DarnnSample> = parts
                .into_iter()
                .zip(&labels)
                .map(|((d, history), label)| DarnnSample {
                    drivers: d.iter().map(|r| z.apply(r)).collect(),
                    history,
                    label: *label,
                })
                .collect();
            let config = DarnnConfig {
                window: table.window,
                drivers: set[0].drivers.first().map_or(0, Vec::len),
                encoder_hidden: *hidden,
                decoder_hidden: *hidden,
                seed,
            };
            let model = AttentionRnn::new(config).map_err(|e| fit_err(&e))?;
            let (model, _) = train_darnn(model, &set, &TrainOptions { seed, ..*opts })
                .map_err(|e| fit_err(&e))?;
            (Model::Darnn(model), z)
        }
        other => {
            return Err(fit_err(&format!(
                "{} cannot be trained from a feature table",
                other.name()
            )))
        }
    };
    let mut artifact = ModelArtifact::from_model(&model, spec.kind)
        .with_parameter("feature_mean", vec![z.mean.len()], &z.mean)
        .with_parameter("feature_std", vec![z.std.len()], &z.std);
    if let serde_json::Value::Object(map) = &mut artifact.config {
        map.insert(
            "task".into(),
            serde_json::to_value(task).expect("task serializes"),
        );
        map.insert("window".into(), table.window.into());
    }
    Ok(artifact)
}

/// Predictions of a [`train_table_model`] artifact for every row of `table`.
/// Direction tasks yield 0/1.
pub fn predict_table_model(
    artifact: &ModelArtifact,
    table: &FeatureTable,
) -> Result<Vec<f64>, HarnessError> {
    let err = |e: &dyn std::fmt::Display| HarnessError::stage("predict", e);
    let task: TaskSection =
        serde_json::from_value(artifact.config.get("task").cloned().unwrap_or_default())
            .map_err(|e| err(&format!("artifact config.task: {e}")))?;
    let z = Standardizer {
        mean: artifact.parameter("feature_mean").map_err(|e| err(&e))?,
        std: artifact.parameter("feature_std").map_err(|e| err(&e))?,
    };
    let model = artifact.to_model().map_err(|e| err(&e))?;
    let kind = artifact.kind;
    let finish = |v: f64| {
        if task.task.is_classification() {
            to_direction(v).as_f64()
        } else {
            v
        }
    };
    table
        .rows
        .iter()
        .map(|row| match &model {
            Model::Linear(m) => Ok(finish(m.predict(&z.apply(&row.vector(kind))))),
            Model::Logistic(m) => Ok(m.predict_direction(&z.apply(&row.vector(kind))).as_f64()),
            Model::Darnn(m) => {
                let (d, h) = darnn_parts(kind, row, table.window);
                let d: Vec<Vec<f64>> = d.iter().map(|r| z.apply(r)).collect();
                m.predict(&d, &h).map(finish).map_err(|e| err(&e))
            }
            Model::TextClassifier(_) => {
                Err(err(&"text classifiers need prompts, not a feature table"))
            }
        })
        .collect()
}

impl FeatureTable {
    /// Per-row predictions in the same layout as an experiment's
    /// `predictions.csv`, with a trailing `split` column.
    pub fn predictions_csv(&self, columns: &[(String, Vec<f64>)]) -> String {
        let mut out = String::from("date,feature_max_date,label_date,label");
        for (name, _) in columns {
            let _ = write!(out, ",{name}");
        }
        out.push_str(",split\n");
        for (i, r) in self.rows.iter().enumerate() {
            let rec = &r.record;
            let _ = write!(
                out,
                "{},{},{},{}",
                rec.date, rec.feature_max_date, rec.label_date, rec.label
            );
            for (_, p) in columns {
                let _ = write!(out, ",{}", p[i]);
            }
            let split = serde_json::to_value(rec.split).expect("split");
            let _ = writeln!(out, ",{}", split.as_str().unwrap_or_default());
        }
        out
    }
}

/// Labels and named prediction columns read back from a predictions CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub labels: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl PredictionTable {
    /// Reads the layout written by experiments and by
    /// [`FeatureTable::predictions_csv`]. With a `split` column only test
    /// rows are kept unless `all_rows` is set.
    pub fn from_csv(text: &str, all_rows: bool) -> Result<Self, HarnessError> {
        let bad = |m: String| HarnessError::stage("evaluate", m);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let label_col = headers
            .iter()
            .position(|h| h == "label")
            .ok_or_else(|| bad("no label column".into()))?;
        let split_col = headers.iter().position(|h| h == "split");
        let pred_cols: Vec<usize> = (label_col + 1..headers.len())
            .filter(|i| Some(*i) != split_col)
            .collect();
        if pred_cols.is_empty() {
            return Err(bad("no prediction columns after label".into()));
        }
        let mut labels = Vec::new();
        let mut columns: Vec<(String, Vec<f64>)> = pred_cols
            .iter()
            .map(|i| (headers[*i].to_owned(), Vec::new()))
            .collect();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if !all_rows && split_col.is_some_and(|c| &rec[c] != "test") {
                continue;
            }
            let num = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| bad(format!("row {}: {e}", line + 2)))
            };
            labels.push(num(label_col)?);
            for (slot, i) in columns.iter_mut().zip(&pred_cols) {
                slot.1.push(num(*i)?);
            }
        }
        Ok(Self { labels, columns })
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    let (samples, test_start) = prepare(cfg)?;
    let train: Vec<&Sample> = samples
        .iter()
        .filter(|s| s.record.split == Split::Train)
        .collect();
    let test: Vec<&Sample> = samples
        .iter()
        .filter(|s| s.record.split == Split::Test)
        .collect();
    if train.len() < 2 {
        return Err(HarnessError::stage(
            "split",
            "fewer than 2 training samples after purging",
        ));
    }
    let test_labels: Vec<f64> = test.iter().map(|s| s.record.label).collect();

    let mut predictions = Vec::with_capacity(cfg.models.len());
    let mut results = Vec::with_capacity(cfg.models.len());
    for spec in &cfg.models {
        let preds = fit_predict(cfg, spec, &train, &test)?;
        let metrics = evaluate(&preds, &test_labels, cfg.task.task)
            .map_err(|e| HarnessError::stage("evaluate", e))?;
        results.push(ModelResult {
            name: spec.name.clone(),
            spec: TaskSpec {
                target: cfg.task.target.clone(),
                task: cfg.task.task,
                horizon: cfg.task.horizon,
                kind: spec.kind,
            },
            architecture: spec.architecture.name().to_owned(),
            metrics,
        });
        predictions.push((spec.name.clone(), preds));
    }

    let pairs = if cfg.task.task.is_classification() {
        pairwise_mcnemar(&predictions, &test_labels)?
    } else {
        Vec::new()
    };

    let records: Vec<SampleRecord> = samples.iter().map(|s| s.record.clone()).collect();
    let leakage = audit(&records);
    let report = ExperimentReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        task: cfg.task.clone(),
        samples: records.len(),
        train: train.len(),
        purged: records.iter().filter(|r| r.split == Split::Purged).count(),
        test: test.len(),
        test_start,
        test_end: test.last().map(|s| s.record.date).unwrap_or(test_start),
        models: results,
        mcnemar: pairs,
        leakage,
    };
    Ok(ExperimentOutcome {
        report,
        samples: records,
        predictions,
    })
}

/// McNemar's test for every pair of named 0/1 prediction columns, in
/// column order.
pub fn pairwise_mcnemar(
    predictions: &[(String, Vec<f64>)],
    labels: &[f64],
) -> Result<Vec<PairwiseMcNemar>, HarnessError> {
    let correct: Vec<Vec<bool>> = predictions
        .iter()
        .map(|(_, p)| p.iter().zip(labels).map(|(a, b)| a == b).collect())
        .collect();
    let mut pairs = Vec::new();
    for i in 0..predictions.len() {
        for j in i + 1..predictions.len() {
            pairs.push(PairwiseMcNemar {
                a: predictions[i].0.clone(),
                b: predictions[j].0.clone(),
                result: mcnemar(&correct[i], &correct[j])
                    .map_err(|e| HarnessError::stage("evaluate", e))?,
            });
        }
    }
    Ok(pairs)
}

/// Metrics for each named prediction column plus pairwise McNemar tests
/// when the task is a classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub models: BTreeMap<String, MetricsReport>,
    pub mcnemar: Vec<PairwiseMcNemar>,
}

pub fn evaluate_columns(
    predictions: &[(String, Vec<f64>)],
    labels: &[f64],
    task: TaskKind,
) -> Result<Evaluation, HarnessError> {
    let models = predictions
        .iter()
        .map(|(name, p)| {
            evaluate(p, labels, task)
                .map(|m| (name.clone(), m))
                .map_err(|e| HarnessError::stage("evaluate", format!("{name}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let mcnemar = if task.is_classification() {
        pairwise_mcnemar(predictions, labels)?
    } else {
        Vec::new()
    };
    Ok(Evaluation { models, mcnemar })
}

/// Checks the date bookkeeping of every sample.
pub fn audit(records: &[SampleRecord]) -> LeakageAudit {
    let train = records.iter().filter(|r| r.split == Split::Train);
    let max_train_date = train
        .flat_map(|r| [r.date, r.feature_max_date, r.label_date])
        .max()
        .unwrap_or(NaiveDate::MIN);
    let min_test_date = records
        .iter()
        .filter(|r| r.split == Split::Test)
        .map(|r| r.date)
        .min()
        .unwrap_or(NaiveDate::MAX);
    LeakageAudit {
        features_not_after_prediction: records.iter().all(|r| r.feature_max_date <= r.date),
        max_train_date,
        min_test_date,
        train_before_test: max_train_date < min_test_date,
    }
}

/// Runs independent configs with at most `jobs` running at once.
pub fn run_experiments(
    configs: &[ExperimentConfig],
    jobs: usize,
) -> Vec<Result<ExperimentOutcome, HarnessError>> {
    let mut out = Vec::with_capacity(configs.len());
    for wave in configs.chunks(jobs.max(1)) {
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|c| s.spawn(move || run_experiment(c)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("experiment thread panicked"))
                .collect()
        });
        out.extend(results);
    }
    out
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"))
}

impl ExperimentOutcome {
    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serializes") + "\n"
    }

    pub fn report_markdown(&self) -> String {
        let r = &self.report;
        let mut md = String::new();
        let _ = writeln!(
            md,
            "# Experiment {}\n\nTarget {} | task {} | horizon {} | seed {}\n\nSamples: {} train, {} purged, {} test ({} to {})\n",
            &r.config_hash[..12],
            r.task.target,
            r.task.task,
            r.task.horizon,
            r.seed,
            r.train,
            r.purged,
            r.test,
            r.test_start,
            r.test_end
        );
        if r.task.task.is_classification() {
            md.push_str("| model | kind | architecture | accuracy | F1 |\n|---|---|---|---|---|\n");
            for m in &r.models {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} |",
                    m.name,
                    m.spec.kind,
                    m.architecture,
                    fmt_metric(m.metrics.accuracy),
                    fmt_metric(m.metrics.f1)
                );
            }
        } else {
            md.push_str("| model | kind | architecture | MSE |\n|---|---|---|---|\n");
            for m in &r.models {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} |",
                    m.name,
                    m.spec.kind,
                    m.architecture,
                    fmt_metric(m.metrics.mse)
                );
            }
        }
        if !r.mcnemar.is_empty() {
            md.push_str(
                "\n## McNemar\n\n| A | B | b | c | p | method |\n|---|---|---|---|---|---|\n",
            );
            for p in &r.mcnemar {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {:.4} | {} |",
                    p.a,
                    p.b,
                    p.result.b,
                    p.result.c,
                    p.result.p_value,
                    serde_json::to_value(p.result.method)
                        .expect("method")
                        .as_str()
                        .unwrap_or_default()
                );
            }
        }
        md
    }

    /// One row per test sample: dates, label and every model's prediction.
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("date,feature_max_date,label_date,label");
        for (name, _) in &self.predictions {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        let test: Vec<&SampleRecord> = self
            .samples
            .iter()
            .filter(|r| r.split == Split::Test)
            .collect();
        for (i, r) in test.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{},{}",
                r.date, r.feature_max_date, r.label_date, r.label
            );
            for (_, p) in &self.predictions {
                let _ = write!(out, ",{}", p[i]);
            }
            out.push('\n');
        }
        out
    }

    /// Writes `report.json`, `report.md` and `predictions.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files: BTreeMap<&str, String> = [
            ("report.json", self.report_json()),
            ("report.md", self.report_markdown()),
            ("predictions.csv", self.predictions_csv()),
        ]
        .into_iter()
        .collect();
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(text: SyntheticText, models: Vec<ModelSpec>) -> ExperimentConfig {
        ExperimentConfig {
            data: DataConfig::Synthetic {
                days: 200,
                sigma: 0.01,
                start_value: 100.0,
                text,
                synth: SynthConfig::default(),
            },
            features: FeatureConfig::default(),
            models,
            task: TaskSection {
                target: Indicator::Other("RW".into()),
                task: TaskKind::DirectionChange,
                horizon: 1,
            },
            eval: EvalConfig::default(),
            seed: 3,
        }
    }

    fn model(name: &str, kind: InputClass, architecture: ArchitectureSpec) -> ModelSpec {
        ModelSpec {
            name: name.into(),
            kind,
            architecture,
        }
    }

    #[test]
    fn up_predictor_accuracy_is_increase_fraction() {
        let cfg = synthetic(
            SyntheticText::None,
            vec![model(
                "up",
                InputClass::F,
                ArchitectureSpec::Baseline {
                    baseline: BaselineKind::Up,
                },
            )],
        );
        let out = run_experiment(&cfg).unwrap();
        let test: Vec<_> = out
            .samples
            .iter()
            .filter(|r| r.split == Split::Test)
            .collect();
        let frac = test.iter().filter(|r| r.label == 1.0).count() as f64 / test.len() as f64;
        assert_eq!(out.report.models[0].metrics.accuracy, Some(frac));
        assert!(out.report.leakage.train_before_test);
        assert!(out.report.leakage.features_not_after_prediction);
    }

    #[test]
    fn missing_file_names_ingest_stage() {
        let mut cfg = synthetic(
            SyntheticText::None,
            vec![model(
                "up",
                InputClass::F,
                ArchitectureSpec::Baseline {
                    baseline: BaselineKind::Up,
                },
            )],
        );
        cfg.data = DataConfig::Files {
            tweets: None,
            series: "/nonexistent/series.csv".into(),
            column: "VIX".into(),
            min_followers: 0,
            preprocess: None,
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("ingest:"), "{err}");
    }

    #[test]
    fn config_round_trip_and_validation() {
        let text = r#"{
            "data": {"source": "synthetic", "days": 120, "text": "random"},
            "features": {"window": 5, "financial": "direction", "text": "sentiment"},
            "models": [
                {"name": "lr", "kind": "TF", "architecture": "logistic", "lambda": 0.1},
                {"name": "ridge", "kind": "F", "architecture": "linear", "penalty": "l2", "lambda": 1.0}
            ],
            "task": {"target": "VIX", "task": "direction-change", "horizon": 1},
            "seed": 11
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.features.window, 5);
        assert_eq!(
            ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap(),
            cfg
        );
        assert!(run_experiment(&cfg).is_ok());
        let mut bad = cfg.clone();
        bad.task.horizon = 2;
        assert!(run_experiment(&bad)
            .unwrap_err()
            .to_string()
            .starts_with("config:"));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn split_never_leaks(
            days in 120usize..260,
            horizon in proptest::sample::select(vec![1usize, 7, 30]),
            window in 1usize..10,
            train_fraction in 0.5f64..0.9,
            seed in 0u64..1000,
        ) {
            let mut cfg = synthetic(
                SyntheticText::Narratives,
                vec![model("up", InputClass::F, ArchitectureSpec::Baseline { baseline: BaselineKind::Up })],
            );
            if let DataConfig::Synthetic { days: d, .. } = &mut cfg.data {
                *d = days;
            }
            cfg.task.horizon = horizon;
            cfg.features.window = window;
            cfg.eval.train_fraction = train_fraction;
            cfg.seed = seed;
            let out = run_experiment(&cfg).unwrap();
            let last_train = out.samples.iter().filter(|r| r.split == Split::Train).map(|r| r.label_date).max();
            let first_test = out.samples.iter().filter(|r| r.split == Split::Test).map(|r| r.date).min();
            if let (Some(a), Some(b)) = (last_train, first_test) {
                proptest::prop_assert!(a < b);
            }
            proptest::prop_assert!(out.samples.iter().all(|r| r.feature_max_date <= r.date && r.date < r.label_date));
            proptest::prop_assert!(out.report.leakage.train_before_test);
        }

        #[test]
        fn override_round_trips(window in 1usize..40, lambda in 0.0f64..100.0, seed in 0u64..u64::MAX) {
            let mut root = serde_json::to_value(synthetic(
                SyntheticText::None,
                vec![model("ridge", InputClass::F, ArchitectureSpec::Linear { penalty: Penalty::L2, lambda: 1.0 })],
            ))
            .unwrap();
            apply_override(&mut root, "features.window", &window.to_string()).unwrap();
            apply_override(&mut root, "models.0.lambda", &format!("{lambda:?}")).unwrap();
            apply_override(&mut root, "seed", &seed.to_string()).unwrap();
            let cfg: ExperimentConfig = serde_json::from_value(root).unwrap();
            proptest::prop_assert_eq!(cfg.features.window, window);
            proptest::prop_assert_eq!(cfg.seed, seed);
            let ArchitectureSpec::Linear { lambda: got, .. } = cfg.models[0].architecture else {
                return Err(proptest::test_runner::TestCaseError::fail("architecture changed"));
            };
            proptest::prop_assert_eq!(got, lambda);
        }
    }
}
