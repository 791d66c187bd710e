//! Text embeddings and their daily aggregation.
//!
//! The reference embedder is a signed feature-hashing bag of words: each
//! token lands in one of `dimension` buckets with a ±1 sign, both derived
//! from a seeded 64-bit hash, and the count vector is L2-normalized.
//! Transformer encoders are reached through [`ExternalEmbedder`], which
//! posts `{"texts": [...]}` to an HTTP service and expects
//! `{"vectors": [[...], ...]}` back.

use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::TweetRecord;
use crate::retry::RetryPolicy;
use crate::text::tokenize;

/// Token joining tweets in joint mode.
pub const JOINT_SEPARATOR: &str = "⟂SEP⟂";
pub const DEFAULT_DIMENSION: usize = 256;
/// Default per-day tweet cap for concatenation.
pub const DEFAULT_CONCAT_K: usize = 10;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("concatenation needs a positive per-day tweet count")]
    ZeroConcatCount,
    #[error("unknown aggregation mode {0:?}")]
    UnknownMode(String),
    #[error("embedding service unreachable: {0}")]
    Unreachable(String),
    #[error("embedding service returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("embedding service returned {got} values, expected dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding service returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding service returned a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Cosine similarity; 0 when either side is the zero vector.
    pub fn cosine(&self, other: &Self) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum::<f64>() / (na * nb)
    }
}

/// Deterministic signed feature hashing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashingEmbedder {
    dimension: usize,
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl HashingEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self, EmbedError> {
        if dimension == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        Ok(Self { dimension, seed })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn token_hash(&self, token: &str) -> u64 {
        // FNV-1a seeded through the offset basis
        let mut h = 0xCBF2_9CE4_8422_2325u64 ^ splitmix64(self.seed);
        for b in token.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        splitmix64(h)
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dimension];
        for tok in tokenize(text) {
            let h = self.token_hash(&tok);
            let bucket = (h % self.dimension as u64) as usize;
            v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        EmbeddingVector(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalEmbedderConfig {
    pub endpoint: String,
    pub dimension: usize,
    /// Bearer token; falls back to `NARRATIVE_EMBED_API_KEY`.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_parallelism() -> usize {
    4
}
fn default_batch() -> usize {
    32
}
fn default_timeout() -> u64 {
    60
}

impl ExternalEmbedderConfig {
    pub fn new(endpoint: impl Into<String>, dimension: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            dimension,
            api_key: None,
            parallelism: default_parallelism(),
            batch_size: default_batch(),
            retry: RetryPolicy::default(),
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP embedding service.
#[derive(Debug, Clone)]
pub struct ExternalEmbedder {
    config: ExternalEmbedderConfig,
    http: reqwest::blocking::Client,
}

impl ExternalEmbedder {
    pub fn new(config: ExternalEmbedderConfig) -> Result<Self, EmbedError> {
        if config.dimension == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EmbedError::Unreachable(e.to_string()))?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &ExternalEmbedderConfig {
        &self.config
    }

    fn call(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let key = self
            .config
            .api_key
            .clone()
            .or_else(|| std::env::var("NARRATIVE_EMBED_API_KEY").ok());
        self.config.retry.run(|| {
            let mut req = self
                .http
                .post(&self.config.endpoint)
                .json(&EmbedRequest { texts });
            if let Some(k) = &key {
                req = req.bearer_auth(k);
            }
            let resp = req
                .send()
                .map_err(|e| (EmbedError::Unreachable(e.to_string()), true))?;
            let status = resp.status();
            if !status.is_success() {
                let retryable = status.is_server_error() || status.as_u16() == 429;
                let body = resp.text().unwrap_or_default();
                return Err((
                    EmbedError::Status {
                        status: status.as_u16(),
                        body,
                    },
                    retryable,
                ));
            }
            let parsed: EmbedResponse = resp
                .json()
                .map_err(|e| (EmbedError::Unreachable(e.to_string()), false))?;
            self.validate(texts.len(), parsed.vectors)
                .map_err(|e| (e, false))
        })
    }

    fn validate(
        &self,
        n: usize,
        vectors: Vec<Vec<f64>>,
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if vectors.len() != n {
            return Err(EmbedError::CountMismatch {
                expected: n,
                got: vectors.len(),
            });
        }
        vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.config.dimension {
                    Err(EmbedError::DimensionMismatch {
                        expected: self.config.dimension,
                        got: v.len(),
                    })
                } else if v.iter().any(|x| !x.is_finite()) {
                    Err(EmbedError::NonFinite)
                } else {
                    Ok(EmbeddingVector(v))
                }
            })
            .collect()
    }

    /// Embeds texts in batches, with at most `parallelism` requests in
    /// flight. Output order follows input order.
    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let batch = self.config.batch_size.max(1);
        let chunks: Vec<&[&str]> = texts.chunks(batch).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in chunks.chunks(self.config.parallelism.max(1)) {
            let results: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|c| s.spawn(move || self.call(c))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}

/// Either the local reference embedder or an external service.
#[derive(Debug, Clone)]
pub enum Embedder {
    Hashing(HashingEmbedder),
    External(ExternalEmbedder),
}

impl Embedder {
    pub fn hashing(dimension: usize, seed: u64) -> Result<Self, EmbedError> {
        Ok(Embedder::Hashing(HashingEmbedder::new(dimension, seed)?))
    }

    pub fn dimension(&self) -> usize {
        match self {
            Embedder::Hashing(h) => h.dimension(),
            Embedder::External(e) => e.config.dimension,
        }
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        match self {
            Embedder::Hashing(h) => Ok(h.embed(text)),
            Embedder::External(e) => {
                if text.trim().is_empty() {
                    return Ok(EmbeddingVector::zeros(e.config.dimension));
                }
                Ok(e.embed_batch(&[text])?.remove(0))
            }
        }
    }

    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        match self {
            Embedder::Hashing(h) => Ok(texts.iter().map(|t| h.embed(t)).collect()),
            Embedder::External(e) => e.embed_batch(texts),
        }
    }
}

/// Serializable description of an [`Embedder`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderSpec {
    Hashing { dimension: usize, seed: u64 },
    External(ExternalEmbedderConfig),
}

impl EmbedderSpec {
    pub fn build(&self) -> Result<Embedder, EmbedError> {
        match self {
            EmbedderSpec::Hashing { dimension, seed } => Embedder::hashing(*dimension, *seed),
            EmbedderSpec::External(cfg) => {
                Ok(Embedder::External(ExternalEmbedder::new(cfg.clone())?))
            }
        }
    }
}

impl Embedder {
    pub fn spec(&self) -> EmbedderSpec {
        match self {
            Embedder::Hashing(h) => EmbedderSpec::Hashing {
                dimension: h.dimension(),
                seed: h.seed(),
            },
            Embedder::External(e) => EmbedderSpec::External(e.config.clone()),
        }
    }
}

/// How a day's tweets become one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum DailyMode {
    IndividualMean,
    IndividualConcat { k: usize },
    Joint,
}

impl DailyMode {
    /// Output length for an embedder of dimension `dim`.
    pub fn output_dim(self, dim: usize) -> usize {
        match self {
            DailyMode::IndividualConcat { k } => k * dim,
            _ => dim,
        }
    }
}

impl FromStr for DailyMode {
    type Err = EmbedError;

    /// `individual-mean`, `joint`, `individual-concat` (k = 10) or
    /// `individual-concat:K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "individual-mean" | "mean" => Ok(DailyMode::IndividualMean),
            "joint" => Ok(DailyMode::Joint),
            "individual-concat" | "concat" => Ok(DailyMode::IndividualConcat {
                k: DEFAULT_CONCAT_K,
            }),
            other => {
                let k = other
                    .strip_prefix("individual-concat:")
                    .or_else(|| other.strip_prefix("concat:"))
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| EmbedError::UnknownMode(other.to_owned()))?;
                if k == 0 {
                    return Err(EmbedError::ZeroConcatCount);
                }
                Ok(DailyMode::IndividualConcat { k })
            }
        }
    }
}

/// One vector per day. Concatenation keeps the `k` tweets with the most
/// followers (ties by id) and pads with zero vectors.
pub fn daily_embedding(
    embedder: &Embedder,
    tweets: &[TweetRecord],
    mode: DailyMode,
) -> Result<EmbeddingVector, EmbedError> {
    let dim = embedder.dimension();
    match mode {
        DailyMode::IndividualMean => {
            let mut acc = vec![0.0; dim];
            if tweets.is_empty() {
                return Ok(EmbeddingVector(acc));
            }
            let texts: Vec<&str> = tweets.iter().map(|t| t.text.as_str()).collect();
            for v in embedder.embed_batch(&texts)? {
                acc.iter_mut().zip(&v.0).for_each(|(a, x)| *a += x);
            }
            let n = tweets.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            Ok(EmbeddingVector(acc))
        }
        DailyMode::IndividualConcat { k } => {
            if k == 0 {
                return Err(EmbedError::ZeroConcatCount);
            }
            let mut ranked: Vec<&TweetRecord> = tweets.iter().collect();
            ranked.sort_by(|a, b| b.followers.cmp(&a.followers).then_with(|| a.id.cmp(&b.id)));
            ranked.truncate(k);
            let texts: Vec<&str> = ranked.iter().map(|t| t.text.as_str()).collect();
            let mut out = Vec::with_capacity(k * dim);
            for v in embedder.embed_batch(&texts)? {
                out.extend(v.0);
            }
            out.resize(k * dim, 0.0);
            Ok(EmbeddingVector(out))
        }
        DailyMode::Joint => {
            let joined = tweets
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(&format!(" {JOINT_SEPARATOR} "));
            embedder.embed_text(&joined)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn emb() -> Embedder {
        Embedder::hashing(64, 3).unwrap()
    }

    fn tweet(id: &str, followers: u64, text: &str) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            date: NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
            text: text.into(),
            followers,
            topic: None,
            user_id: String::new(),
        }
    }

    #[test]
    fn empty_text_is_zero() {
        let v = emb().embed_text("").unwrap();
        assert_eq!(v, EmbeddingVector::zeros(64));
    }

    #[test]
    fn deterministic_and_bag_of_words() {
        let e = emb();
        assert_eq!(
            e.embed_text("rates rise").unwrap(),
            e.embed_text("rates rise").unwrap()
        );
        assert_eq!(e.embed_text("a b").unwrap(), e.embed_text("b a").unwrap());
        let v = e.embed_text("inflation fears grow").unwrap();
        approx::assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(v.cosine(&v), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn seed_changes_hashing() {
        let a = Embedder::hashing(64, 1)
            .unwrap()
            .embed_text("market rally")
            .unwrap();
        let b = Embedder::hashing(64, 2)
            .unwrap()
            .embed_text("market rally")
            .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn disjoint_texts_nearly_orthogonal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let vocab: Vec<String> = (0..2000).map(|i| format!("tok{i}")).collect();
        let mut total = 0.0;
        let trials = 20;
        for seed in 0..trials {
            let mut words = vocab.clone();
            words.shuffle(&mut rng);
            let a = words[..60].join(" ");
            let b = words[60..120].join(" ");
            let e = Embedder::hashing(DEFAULT_DIMENSION, seed).unwrap();
            total += e.embed_text(&a).unwrap().cosine(&e.embed_text(&b).unwrap());
        }
        assert!((total / trials as f64).abs() < 0.2);
    }

    #[test]
    fn mean_mode() {
        let e = emb();
        let one = daily_embedding(
            &e,
            &[tweet("1", 5, "bonds fall")],
            DailyMode::IndividualMean,
        )
        .unwrap();
        let two = daily_embedding(
            &e,
            &[tweet("1", 5, "bonds fall"), tweet("2", 9, "bonds fall")],
            DailyMode::IndividualMean,
        )
        .unwrap();
        for (a, b) in one.0.iter().zip(&two.0) {
            approx::assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let none = daily_embedding(&e, &[], DailyMode::IndividualMean).unwrap();
        assert_eq!(none, EmbeddingVector::zeros(64));
    }

    #[test]
    fn concat_pads_and_truncates_by_followers() {
        let e = emb();
        let v = daily_embedding(
            &e,
            &[tweet("1", 5, "bonds")],
            DailyMode::IndividualConcat { k: 3 },
        )
        .unwrap();
        assert_eq!(v.dim(), 192);
        assert_eq!(&v.0[..64], e.embed_text("bonds").unwrap().as_slice());
        assert!(v.0[64..].iter().all(|x| *x == 0.0));

        let tweets = [
            tweet("a", 1, "low"),
            tweet("b", 100, "high"),
            tweet("c", 50, "mid"),
        ];
        let v = daily_embedding(&e, &tweets, DailyMode::IndividualConcat { k: 2 }).unwrap();
        let expected: Vec<f64> = ["high", "mid"]
            .iter()
            .flat_map(|t| e.embed_text(t).unwrap().0)
            .collect();
        assert_eq!(v.0, expected);
        assert!(matches!(
            daily_embedding(&e, &tweets, DailyMode::IndividualConcat { k: 0 }),
            Err(EmbedError::ZeroConcatCount)
        ));
    }

    #[test]
    fn joint_equals_embedding_of_joined_text() {
        let e = emb();
        let tweets = [tweet("a", 1, "rates up"), tweet("b", 2, "jobs down")];
        let v = daily_embedding(&e, &tweets, DailyMode::Joint).unwrap();
        let joined = format!("rates up {JOINT_SEPARATOR} jobs down");
        assert_eq!(v, e.embed_text(&joined).unwrap());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("joint".parse::<DailyMode>().unwrap(), DailyMode::Joint);
        assert_eq!(
            "individual-concat:4".parse::<DailyMode>().unwrap(),
            DailyMode::IndividualConcat { k: 4 }
        );
        assert!("".parse::<DailyMode>().is_err());
        assert!("individual-concat:0".parse::<DailyMode>().is_err());
        assert_eq!(DailyMode::IndividualConcat { k: 10 }.output_dim(8), 80);
    }

    proptest::proptest! {
        #[test]
        fn output_dim_is_fixed(texts in proptest::collection::vec("[a-z ]{0,30}", 0..12), k in 1usize..6) {
            let e = emb();
            let tweets: Vec<_> = texts.iter().enumerate().map(|(i, t)| tweet(&i.to_string(), i as u64, t)).collect();
            for mode in [DailyMode::IndividualMean, DailyMode::IndividualConcat { k }, DailyMode::Joint] {
                let v = daily_embedding(&e, &tweets, mode).unwrap();
                proptest::prop_assert_eq!(v.dim(), mode.output_dim(64));
            }
        }
    }
}
