use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{parse_analysis, AnalysisPrompt, LlmAnalysis, NarrativeError, DEFAULT_TEMPERATURE};
use crate::retry::RetryPolicy;

pub const API_KEY_ENV: &str = "NARRATIVE_LLM_API_KEY";
pub const CACHE_DIR_ENV: &str = "NARRATIVE_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmClientConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub parallelism: usize,
    pub retry: RetryPolicy,
    pub cache_dir: Option<PathBuf>,
    pub timeout_secs: u64,
    /// Lower-case phrases marking a refused prediction.
    pub refusal_phrases: Vec<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: DEFAULT_TEMPERATURE,
            parallelism: 4,
            retry: RetryPolicy::default(),
            cache_dir: std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from),
            timeout_secs: 120,
            refusal_phrases: [
                "as a language model",
                "as an ai",
                "financial advice",
                "i cannot predict",
                "i can't predict",
                "i am unable to",
                "i'm unable to",
                "i cannot provide",
                "i can't provide",
                "not able to provide",
            ]
            .iter()
            .map(|s| (*s).to_owned())
            .collect(),
            api_key: None,
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

/// On-disk cache entry for one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedAnalysis {
    pub prompt_hash: String,
    pub window: Option<(NaiveDate, NaiveDate)>,
    pub raw_response: String,
    pub tweet_analysis: Option<String>,
    pub impact_analysis: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedCompletion {
    prompt_hash: String,
    raw_response: String,
}

/// Content address of a request: SHA-256 over model, temperature and
/// the full prompt text.
pub fn cache_key(model: &str, temperature: f64, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&(model, temperature.to_bits(), prompt)).expect("serializable"));
    hex::encode(h.finalize())
}

/// Chat-completion client with a content-addressed disk cache.
#[derive(Debug)]
pub struct LlmClient {
    config: LlmClientConfig,
    http: reqwest::blocking::Client,
    network_calls: AtomicUsize,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl LlmClient {
    pub fn new(config: LlmClientConfig) -> Result<Self, NarrativeError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| NarrativeError::Network(e.to_string()))?;
        Ok(Self {
            config,
            http,
            network_calls: AtomicUsize::new(0),
            key_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.config
    }

    /// HTTP requests sent so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn key_for(&self, prompt: &str) -> String {
        cache_key(&self.config.model, self.config.temperature, prompt)
    }

    fn lock_for(&self, key: &str) -> Arc<Mutex<()>> {
        let mut locks = self.key_locks.lock().expect("lock table poisoned");
        locks.entry(key.to_owned()).or_default().clone()
    }

    fn chat(&self, prompt: &str) -> Result<String, NarrativeError> {
        let key = self
            .config
            .api_key
            .clone()
            .or_else(|| std::env::var(API_KEY_ENV).ok());
        let body = ChatRequest {
            model: &self.config.model,
            temperature: self.config.temperature,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
        };
        self.config.retry.run(|| {
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            let mut req = self.http.post(&self.config.endpoint).json(&body);
            if let Some(k) = &key {
                req = req.bearer_auth(k);
            }
            let resp = req
                .send()
                .map_err(|e| (NarrativeError::Network(e.to_string()), true))?;
            let status = resp.status();
            if !status.is_success() {
                let retryable = status.is_server_error() || status.as_u16() == 429;
                return Err((
                    NarrativeError::Status {
                        status: status.as_u16(),
                        body: resp.text().unwrap_or_default(),
                    },
                    retryable,
                ));
            }
            let parsed: ChatResponse = resp.json().map_err(|e| {
                (
                    NarrativeError::Network(format!("bad response body: {e}")),
                    false,
                )
            })?;
            parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .ok_or((
                    NarrativeError::Network("response has no message content".into()),
                    false,
                ))
        })
    }

    /// One completion, cached under `completions/` when a cache exists.
    pub fn complete(&self, prompt: &str) -> Result<String, NarrativeError> {
        let key = self.key_for(prompt);
        let lock = self.lock_for(&key);
        let _guard = lock.lock().expect("key lock poisoned");
        let path = self
            .config
            .cache_dir
            .as_ref()
            .map(|d| d.join("completions").join(format!("{key}.json")));
        if let Some(path) = &path {
            if let Some(hit) = read_json::<CachedCompletion>(path)? {
                return Ok(hit.raw_response);
            }
        }
        let raw = self.chat(prompt)?;
        if let Some(path) = &path {
            write_json(
                path,
                &CachedCompletion {
                    prompt_hash: key,
                    raw_response: raw.clone(),
                },
            )?;
        }
        Ok(raw)
    }

    fn analysis_path(&self, key: &str) -> Option<PathBuf> {
        self.config
            .cache_dir
            .as_ref()
            .map(|d| d.join(format!("{key}.json")))
    }

    /// Cached analysis request. A response without both tagged sections
    /// is saved under `failed/` and reported as a parse error.
    pub fn request_analysis(&self, prompt: &AnalysisPrompt) -> Result<LlmAnalysis, NarrativeError> {
        let text = prompt.render();
        let key = self.key_for(&text);
        let window = Some(prompt.window());
        let lock = self.lock_for(&key);
        let _guard = lock.lock().expect("key lock poisoned");

        if let Some(path) = self.analysis_path(&key) {
            if let Some(hit) = read_json::<CachedAnalysis>(&path)? {
                if let (Some(tweet_analysis), Some(impact_analysis)) =
                    (hit.tweet_analysis, hit.impact_analysis)
                {
                    return Ok(LlmAnalysis {
                        tweet_analysis,
                        impact_analysis,
                        window: hit.window,
                        cache_key: Some(key),
                    });
                }
            }
        }

        let raw = self.chat(&text)?;
        match parse_analysis(&raw) {
            Ok(mut analysis) => {
                analysis.window = window;
                analysis.cache_key = Some(key.clone());
                if let Some(path) = self.analysis_path(&key) {
                    write_json(
                        &path,
                        &CachedAnalysis {
                            prompt_hash: key,
                            window,
                            raw_response: raw,
                            tweet_analysis: Some(analysis.tweet_analysis.clone()),
                            impact_analysis: Some(analysis.impact_analysis.clone()),
                        },
                    )?;
                }
                Ok(analysis)
            }
            Err(NarrativeError::Parse { message, raw, .. }) => {
                let persisted = match &self.config.cache_dir {
                    Some(dir) => {
                        let path = dir.join("failed").join(format!("{key}.json"));
                        write_json(
                            &path,
                            &CachedAnalysis {
                                prompt_hash: key,
                                window,
                                raw_response: raw.clone(),
                                tweet_analysis: None,
                                impact_analysis: None,
                            },
                        )?;
                        Some(path)
                    }
                    None => None,
                };
                Err(NarrativeError::Parse {
                    message,
                    raw,
                    persisted,
                })
            }
            Err(other) => Err(other),
        }
    }

    /// Runs many analysis requests with at most `parallelism` in flight.
    pub fn request_analyses(
        &self,
        prompts: &[AnalysisPrompt],
    ) -> Vec<Result<LlmAnalysis, NarrativeError>> {
        let mut out = Vec::with_capacity(prompts.len());
        for wave in prompts.chunks(self.config.parallelism.max(1)) {
            let results: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|p| s.spawn(move || self.request_analysis(p)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("analysis worker panicked"))
                    .collect()
            });
            out.extend(results);
        }
        out
    }

    pub fn is_refusal(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        self.config
            .refusal_phrases
            .iter()
            .any(|p| lower.contains(p.as_str()))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, NarrativeError> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| NarrativeError::Cache {
                path: path.to_owned(),
                message: e.to_string(),
            }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(NarrativeError::Cache {
            path: path.to_owned(),
            message: e.to_string(),
        }),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), NarrativeError> {
    let err = |message: String| NarrativeError::Cache {
        path: path.to_owned(),
        message,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
    }
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| err(e.to_string()))?;
    // write-then-rename so readers never see a partial file
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes).map_err(|e| err(e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| err(e.to_string()))
}
