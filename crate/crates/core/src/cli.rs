//! Command-line front end. Each subcommand parses its flags, calls into
//! the library and writes its outputs under `--out`, together with
//! `manifest.json` (artifact list and config hash) and `run.log`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::harness::experiment::{
    evaluate_columns, load_data, ArchitectureSpec, DataConfig, EvalConfig, FeatureConfig,
    ModelSpec, Penalty, PredictionTable, Split, SyntheticText, TaskSection, TextRepr,
};
use crate::harness::{
    feature_table, predict_table_model, run_experiments, train_table_model, ExperimentConfig,
    FeatureTable, TaskKind,
};
use crate::ingest::{align, load_tweets, preprocess, Indicator, PreprocessRules, TweetCorpus};
use crate::models::{BaselineKind, InputClass, ModelArtifact, TrainOptions};
use crate::narrative::{window_analysis_prompt, LlmClient, LlmClientConfig};
use crate::sentiment::{
    sentiment_histogram, word_frequency_timeline, Granularity, SentimentLexicon,
};
use crate::synthgen::SynthConfig;

type CliResult<T = ()> = Result<T, Box<dyn std::error::Error>>;

#[derive(Debug, Parser)]
#[command(
    name = "narrative",
    version,
    about = "Narrative-augmented forecasting experiments"
)]
pub struct Cli {
    /// Directory for all outputs, the manifest and the run log.
    #[arg(long, global = true, default_value = "narrative-out")]
    pub out: PathBuf,
    /// Echo more detail to the terminal (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, filter and align tweets with a series.
    Ingest(IngestArgs),
    /// Build the windowed feature table of an experiment config.
    Features(ConfigArgs),
    /// Fit a model on the train rows of a feature table.
    Train(TrainArgs),
    /// Apply a trained model to a feature table.
    Predict(PredictArgs),
    /// Metrics and McNemar tests for a predictions CSV.
    Evaluate(EvaluateArgs),
    /// Run financial baselines on a series.
    Baseline(BaselineArgs),
    /// Generate a synthetic series and texts.
    Synth(SynthArgs),
    /// Word-frequency timelines and sentiment histograms.
    Analyze(AnalyzeArgs),
    /// Ask the LLM for an analysis of one window.
    LlmAnalyze(LlmAnalyzeArgs),
    /// Run one or more experiment configs end to end.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Series CSV with a `date` column.
    #[arg(long)]
    pub series: PathBuf,
    /// Value column in the series CSV.
    #[arg(long)]
    pub column: String,
    /// Tweets as JSONL.
    #[arg(long)]
    pub tweets: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub min_followers: u64,
    /// Skip link stripping, emoji conversion and deduplication.
    #[arg(long)]
    pub raw: bool,
}

impl SourceArgs {
    fn data_config(&self) -> DataConfig {
        DataConfig::Files {
            tweets: self.tweets.clone(),
            series: self.series.clone(),
            column: self.column.clone(),
            min_followers: self.min_followers,
            preprocess: (!self.raw).then(PreprocessRules::default),
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value, e.g. `--set features.window=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    pub overrides: Vec<(String, String)>,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    Ok((k.trim().to_owned(), v.to_owned()))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Architecture {
    Linear,
    Ridge,
    Lasso,
    Logistic,
    Darnn,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature table written by `features`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum)]
    pub architecture: Architecture,
    /// Input class: F, T or TF.
    #[arg(long, default_value = "TF")]
    pub kind: InputClass,
    #[arg(long, default_value = "direction-change")]
    pub task: TaskKind,
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
    #[arg(long, default_value = "SP500")]
    pub target: String,
    /// Regularization strength.
    #[arg(long, default_value_t = 1e-2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Column name for the predictions.
    #[arg(long, default_value = "prediction")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value = "direction-change")]
    pub task: TaskKind,
    /// Use every row, not only the test split.
    #[arg(long)]
    pub all_rows: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Baselines to run; defaults to every one that fits the task.
    #[arg(long = "kind")]
    pub kinds: Vec<BaselineKind>,
    #[arg(long, default_value = "direction-change")]
    pub task: TaskKind,
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    Narratives,
    Random,
    Shuffled,
    Walk,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "narratives")]
    pub kind: SynthKind,
    /// Probability that a narrative matches the upcoming move.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub days: usize,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub what: Analysis,
}

#[derive(Debug, Subcommand)]
pub enum Analysis {
    /// Per-period counts of a term, as CSV.
    Freq {
        #[arg(long)]
        tweets: PathBuf,
        #[arg(long)]
        term: String,
        #[arg(long, default_value = "month")]
        by: Granularity,
    },
    /// Histogram of compound sentiment scores, as CSV.
    SentHist {
        #[arg(long)]
        tweets: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        bin: f64,
        /// Lexicon TSV to use instead of the bundled one.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct LlmAnalyzeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Last day of the window; defaults to the last trading day.
    #[arg(long)]
    pub end: Option<chrono::NaiveDate>,
    #[arg(long, default_value_t = 7)]
    pub window: usize,
    #[arg(long, default_value = "SP500")]
    pub target: String,
    /// Chat-completions URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Only write the prompt.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config (repeatable).
    #[arg(long, required = true)]
    pub config: Vec<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    pub overrides: Vec<(String, String)>,
    /// Configs run at the same time.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Output directory bookkeeping: artifacts written, log lines and the
/// hash recorded in the manifest.
struct Run {
    out: PathBuf,
    verbose: u8,
    log: File,
    artifacts: Vec<String>,
    config_hash: Option<String>,
}

impl Run {
    fn open(out: &Path, verbose: u8) -> CliResult<Self> {
        fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_owned(),
            verbose,
            log: File::create(out.join("run.log"))?,
            artifacts: Vec::new(),
            config_hash: None,
        })
    }

    fn say(&mut self, msg: &str) {
        println!("{msg}");
        let _ = writeln!(self.log, "{msg}");
    }

    fn detail(&mut self, msg: &str) {
        if self.verbose > 0 {
            println!("{msg}");
        }
        let _ = writeln!(self.log, "{msg}");
    }

    fn write(&mut self, name: &str, body: &str) -> CliResult {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, body)?;
        self.detail(&format!("wrote {name}"));
        self.artifacts.push(name.to_owned());
        Ok(())
    }

    fn finish(mut self, command: &str, argv_hash: String) -> CliResult {
        self.artifacts.sort();
        let manifest = json!({
            "command": command,
            "config_hash": self.config_hash.clone().unwrap_or(argv_hash),
            "artifacts": self.artifacts,
        });
        fs::write(
            self.out.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(())
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    // Without a config file the manifest hashes the parsed command, which
    // leaves out the output directory and verbosity.
    let hasher = Sha256::new().chain_update(format!("{:?}", cli.command));
    let argv_hash = hex::encode(hasher.finalize());
    let mut run = match Run::open(&cli.out, cli.verbose) {
        Ok(run) => run,
        Err(e) => {
            eprintln!(
                "error: cannot use output directory {}: {e}",
                cli.out.display()
            );
            return 2;
        }
    };
    let name = command_name(&cli.command);
    match execute(&cli.command, &mut run).and_then(|()| run.finish(name, argv_hash)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let _ = fs::OpenOptions::new()
                .append(true)
                .open(cli.out.join("run.log"))
                .and_then(|mut f| writeln!(f, "error: {e}"));
            2
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Ingest(_) => "ingest",
        Command::Features(_) => "features",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
        Command::Evaluate(_) => "evaluate",
        Command::Baseline(_) => "baseline",
        Command::Synth(_) => "synth",
        Command::Analyze(_) => "analyze",
        Command::LlmAnalyze(_) => "llm-analyze",
        Command::Experiment(_) => "experiment",
    }
}

fn execute(cmd: &Command, run: &mut Run) -> CliResult {
    match cmd {
        Command::Ingest(a) => ingest(a, run),
        Command::Features(a) => features(a, run),
        Command::Train(a) => train(a, run),
        Command::Predict(a) => predict(a, run),
        Command::Evaluate(a) => evaluate(a, run),
        Command::Baseline(a) => baseline(a, run),
        Command::Synth(a) => synth(a, run),
        Command::Analyze(a) => analyze(a, run),
        Command::LlmAnalyze(a) => llm_analyze(a, run),
        Command::Experiment(a) => experiment(a, run),
    }
}

fn file_config(source: &SourceArgs, task: TaskKind, horizon: usize) -> ExperimentConfig {
    ExperimentConfig {
        data: source.data_config(),
        features: FeatureConfig {
            text: TextRepr::None,
            ..FeatureConfig::default()
        },
        models: Vec::new(),
        task: TaskSection {
            target: source.column.parse().unwrap_or_else(|e| match e {}),
            task,
            horizon,
        },
        eval: EvalConfig::default(),
        seed: 0,
    }
}

fn ingest(a: &IngestArgs, run: &mut Run) -> CliResult {
    let (corpus, series) = load_data(&file_config(&a.source, TaskKind::NextValue, 1))?;
    let data = align(&corpus, &series)?;
    let aligned = data.corpus();
    run.write("series.csv", &data.series().to_csv())?;
    run.write("tweets.jsonl", &aligned.to_jsonl())?;
    run.say(&format!(
        "{} trading days, {} tweets kept of {} loaded",
        data.len(),
        aligned.len(),
        corpus.len()
    ));
    Ok(())
}

fn load_config(
    path: &Path,
    overrides: &[(String, String)],
    run: &mut Run,
) -> CliResult<ExperimentConfig> {
    let cfg = ExperimentConfig::load_with_overrides(path, overrides)?;
    run.config_hash = Some(cfg.hash());
    Ok(cfg)
}

fn features(a: &ConfigArgs, run: &mut Run) -> CliResult {
    let cfg = load_config(&a.config, &a.overrides, run)?;
    let table = feature_table(&cfg)?;
    run.write("features.csv", &table.to_csv())?;
    run.say(&format!(
        "{} samples, window {}",
        table.rows.len(),
        table.window
    ));
    Ok(())
}

fn read_table(path: &Path) -> CliResult<FeatureTable> {
    Ok(FeatureTable::from_csv(
        &fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
    )?)
}

fn train(a: &TrainArgs, run: &mut Run) -> CliResult {
    let table = read_table(&a.features)?;
    let architecture = match a.architecture {
        Architecture::Linear => ArchitectureSpec::Linear {
            penalty: Penalty::None,
            lambda: 0.0,
        },
        Architecture::Ridge => ArchitectureSpec::Linear {
            penalty: Penalty::L2,
            lambda: a.lambda,
        },
        Architecture::Lasso => ArchitectureSpec::Linear {
            penalty: Penalty::L1,
            lambda: a.lambda,
        },
        Architecture::Logistic => ArchitectureSpec::Logistic { lambda: a.lambda },
        Architecture::Darnn => ArchitectureSpec::Darnn {
            train: TrainOptions {
                epochs: a.epochs,
                learning_rate: a.learning_rate,
                ..TrainOptions::default()
            },
            hidden: a.hidden,
        },
    };
    let spec = ModelSpec {
        name: "model".into(),
        kind: a.kind,
        architecture,
    };
    let task = TaskSection {
        target: a.target.parse::<Indicator>().unwrap_or_else(|e| match e {}),
        task: a.task,
        horizon: a.horizon,
    };
    let artifact = train_table_model(&table, &spec, &task, a.seed)?;
    run.write("model.json", &(artifact.to_json() + "\n"))?;
    let n_train = table
        .rows
        .iter()
        .filter(|r| r.record.split == Split::Train)
        .count();
    run.say(&format!(
        "trained {} ({}) on {n_train} train rows",
        artifact.architecture, artifact.kind
    ));
    Ok(())
}

fn predict(a: &PredictArgs, run: &mut Run) -> CliResult {
    let text = fs::read_to_string(&a.model).map_err(|e| format!("{}: {e}", a.model.display()))?;
    let artifact = ModelArtifact::from_json(&text)?;
    let table = read_table(&a.features)?;
    let preds = predict_table_model(&artifact, &table)?;
    run.write(
        "predictions.csv",
        &table.predictions_csv(&[(a.name.clone(), preds)]),
    )?;
    run.say(&format!("{} predictions", table.rows.len()));
    Ok(())
}

fn evaluate(a: &EvaluateArgs, run: &mut Run) -> CliResult {
    let text = fs::read_to_string(&a.predictions)
        .map_err(|e| format!("{}: {e}", a.predictions.display()))?;
    let table = PredictionTable::from_csv(&text, a.all_rows)?;
    let eval = evaluate_columns(&table.columns, &table.labels, a.task)?;
    run.write(
        "metrics.json",
        &(serde_json::to_string_pretty(&eval)? + "\n"),
    )?;
    for (name, m) in &eval.models {
        let mut line = format!("{name}: n={}", m.n);
        for (label, v) in [("mse", m.mse), ("accuracy", m.accuracy), ("f1", m.f1)] {
            if let Some(v) = v {
                let _ = write!(line, " {label}={v:.4}");
            }
        }
        run.say(&line);
    }
    for p in &eval.mcnemar {
        run.say(&format!(
            "mcnemar {} vs {}: b={} c={} p={:.4}",
            p.a, p.b, p.result.b, p.result.c, p.result.p_value
        ));
    }
    Ok(())
}

fn baseline(a: &BaselineArgs, run: &mut Run) -> CliResult {
    let mut cfg = file_config(&a.source, a.task, a.horizon);
    let classification = a.task.is_classification();
    let kinds: Vec<BaselineKind> = if a.kinds.is_empty() {
        BaselineKind::ALL
            .into_iter()
            .filter(|k| {
                if classification {
                    k.supports_classification()
                } else {
                    k.supports_regression()
                }
            })
            .collect()
    } else {
        a.kinds.clone()
    };
    cfg.models = kinds
        .into_iter()
        .map(|k| ModelSpec {
            name: k.name().to_owned(),
            kind: InputClass::F,
            architecture: ArchitectureSpec::Baseline { baseline: k },
        })
        .collect();
    cfg.eval.train_fraction = a.train_fraction;
    run_and_write(&[cfg], 1, run)
}

fn synth(a: &SynthArgs, run: &mut Run) -> CliResult {
    let text = match a.kind {
        SynthKind::Narratives => SyntheticText::Narratives,
        SynthKind::Random => SyntheticText::Random,
        SynthKind::Shuffled => SyntheticText::ShuffledNarratives,
        SynthKind::Walk => SyntheticText::None,
    };
    let cfg = ExperimentConfig {
        data: DataConfig::Synthetic {
            days: a.days,
            sigma: a.sigma,
            start_value: 100.0,
            text,
            synth: SynthConfig {
                alignment: a.p,
                ..SynthConfig::default()
            },
        },
        features: FeatureConfig::default(),
        models: Vec::new(),
        task: TaskSection {
            target: Indicator::Other("RW".into()),
            task: TaskKind::DirectionChange,
            horizon: a.horizon,
        },
        eval: EvalConfig::default(),
        seed: a.seed,
    };
    let (corpus, series) = load_data(&cfg)?;
    run.write("series.csv", &series.to_csv())?;
    if !matches!(a.kind, SynthKind::Walk) {
        run.write("tweets.jsonl", &corpus.to_jsonl())?;
    }
    run.say(&format!("{} days, {} texts", series.len(), corpus.len()));
    Ok(())
}

fn analyze(a: &AnalyzeArgs, run: &mut Run) -> CliResult {
    let load = |p: &Path| -> CliResult<TweetCorpus> {
        Ok(preprocess(&load_tweets(p, 0)?, PreprocessRules::default()))
    };
    match &a.what {
        Analysis::Freq { tweets, term, by } => {
            let timeline = word_frequency_timeline(&load(tweets)?, term, *by)?;
            let mut csv = String::from("period,count\n");
            for (start, count) in &timeline {
                let _ = writeln!(csv, "{},{count}", by.label(*start));
            }
            run.write("freq.csv", &csv)?;
            run.say(&format!(
                "{} periods, {} mentions of {term:?}",
                timeline.len(),
                timeline.iter().map(|p| p.1).sum::<usize>()
            ));
        }
        Analysis::SentHist {
            tweets,
            bin,
            lexicon,
        } => {
            let owned;
            let lex = match lexicon {
                Some(p) => {
                    owned = SentimentLexicon::load(p)?;
                    &owned
                }
                None => SentimentLexicon::bundled(),
            };
            let hist = sentiment_histogram(&load(tweets)?, *bin, lex)?;
            let mut csv = String::from("bin_lo,bin_hi,count\n");
            for b in &hist.bins {
                let _ = writeln!(csv, "{},{},{}", b.lo, b.hi, b.count);
            }
            run.write("sentiment_histogram.csv", &csv)?;
            run.say(&format!(
                "{} scores in {} bins",
                hist.total(),
                hist.bins.len()
            ));
        }
    }
    Ok(())
}

fn llm_analyze(a: &LlmAnalyzeArgs, run: &mut Run) -> CliResult {
    let (corpus, series) = load_data(&file_config(&a.source, TaskKind::NextValue, 1))?;
    let data = align(&corpus, &series)?;
    let end = match a.end {
        Some(d) => data
            .dates()
            .iter()
            .rposition(|x| *x <= d)
            .ok_or_else(|| format!("no trading day on or before {d}"))?,
        None => data.len().checked_sub(1).ok_or("empty series")?,
    };
    let target: Indicator = a.target.parse().unwrap_or_else(|e| match e {});
    let prompt = window_analysis_prompt(&data, end, a.window, &target)?;
    run.write("prompt.txt", &prompt.render())?;
    if a.dry_run {
        run.say("prompt written; dry run, no request sent");
        return Ok(());
    }
    let defaults = LlmClientConfig::default();
    let client = LlmClient::new(LlmClientConfig {
        endpoint: a.endpoint.clone().unwrap_or(defaults.endpoint.clone()),
        model: a.model.clone().unwrap_or(defaults.model.clone()),
        cache_dir: a.cache_dir.clone().or(defaults.cache_dir.clone()),
        ..defaults
    })?;
    let analysis = client.request_analysis(&prompt)?;
    run.write(
        "analysis.json",
        &(serde_json::to_string_pretty(&analysis)? + "\n"),
    )?;
    run.say(&format!(
        "analysis for {} to {}",
        prompt.window().0,
        prompt.window().1
    ));
    Ok(())
}

fn experiment(a: &ExperimentArgs, run: &mut Run) -> CliResult {
    let configs = a
        .config
        .iter()
        .map(|p| ExperimentConfig::load_with_overrides(p, &a.overrides))
        .collect::<Result<Vec<_>, _>>()?;
    if configs.len() == 1 {
        run.config_hash = Some(configs[0].hash());
    } else {
        let mut h = Sha256::new();
        configs.iter().for_each(|c| h.update(c.hash()));
        run.config_hash = Some(hex::encode(h.finalize()));
    }
    run_and_write(&configs, a.jobs, run)
}

fn run_and_write(configs: &[ExperimentConfig], jobs: usize, run: &mut Run) -> CliResult {
    let results = run_experiments(configs, jobs);
    let single = configs.len() == 1;
    for (i, result) in results.into_iter().enumerate() {
        let outcome = result?;
        let prefix = if single {
            String::new()
        } else {
            format!("config-{i}/")
        };
        run.write(&format!("{prefix}report.json"), &outcome.report_json())?;
        run.write(&format!("{prefix}report.md"), &outcome.report_markdown())?;
        run.write(
            &format!("{prefix}predictions.csv"),
            &outcome.predictions_csv(),
        )?;
        if single {
            run.config_hash
                .get_or_insert_with(|| outcome.report.config_hash.clone());
        }
        let r = &outcome.report;
        run.say(&format!(
            "{}config {}: {} train, {} purged, {} test ({} to {})",
            prefix,
            &r.config_hash[..12],
            r.train,
            r.purged,
            r.test,
            r.test_start,
            r.test_end
        ));
        for m in &r.models {
            let metric = match (m.metrics.accuracy, m.metrics.mse) {
                (Some(acc), _) => {
                    format!("accuracy {acc:.4} f1 {:.4}", m.metrics.f1.unwrap_or(0.0))
                }
                (None, Some(mse)) => format!("mse {mse:.6}"),
                _ => String::new(),
            };
            run.say(&format!("  {:<20} {:<6} {}", m.name, m.spec.kind, metric));
        }
    }
    Ok(())
}
