use std::collections::HashMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};

/// Text embedding model.
pub trait Embedder: Send + Sync {
    /// Identifies the model; cached vectors are keyed by it.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

impl<T: Embedder + ?Sized> Embedder for std::sync::Arc<T> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        (**self).embed(text)
    }
}

fn fnv1a(data: &[u8]) -> u64 {
    data.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

/// Deterministic bag-of-words projection: every lower-cased word token maps
/// to a seeded pseudo-random vector, and a text's embedding is their sum.
/// Same text, same vector; shared words pull vectors together.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(256, 0x5eed)
    }
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        Self { dimension: dimension.max(1), seed }
    }

    fn add_token(&self, acc: &mut [f64], token: &str) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(token.as_bytes()));
        for v in acc.iter_mut() {
            *v += rng.gen_range(-1.0..1.0);
        }
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-{}-{:x}", self.dimension, self.seed)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            self.add_token(&mut acc, token);
            any = true;
        }
        if !any {
            // Punctuation-only text: fall back to individual characters.
            for ch in lower.chars().filter(|c| !c.is_whitespace()) {
                self.add_token(&mut acc, &ch.to_string());
                any = true;
            }
        }
        if !any {
            return Err(Error::Embed("cannot embed empty text".into()));
        }
        Ok(acc)
    }
}

/// Returns fixed vectors for known texts; anything else is an embed error.
#[derive(Debug, Clone, Default)]
pub struct StaticEmbedder {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl StaticEmbedder {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, vectors: HashMap::new() }
    }

    pub fn with(mut self, text: impl Into<String>, vector: Vec<f64>) -> Self {
        self.insert(text, vector);
        self
    }

    pub fn insert(&mut self, text: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dimension, "vector length must match the declared dimension");
        self.vectors.insert(text.into(), vector);
    }
}

impl Embedder for StaticEmbedder {
    fn id(&self) -> String {
        let mut keys: Vec<&String> = self.vectors.keys().collect();
        keys.sort();
        let mut h = 0u64;
        for k in keys {
            h = h.rotate_left(7) ^ fnv1a(k.as_bytes());
            for x in &self.vectors[k] {
                h = h.rotate_left(3) ^ x.to_bits();
            }
        }
        format!("static-{}-{h:x}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        self.vectors.get(text).cloned().ok_or_else(|| Error::Embed(format!("no vector for {text:?}")))
    }
}

/// Wraps another embedder and multiplies every vector by a constant.
#[derive(Debug, Clone)]
pub struct ScaledEmbedder<E> {
    pub inner: E,
    pub factor: f64,
}

impl<E: Embedder> Embedder for ScaledEmbedder<E> {
    fn id(&self) -> String {
        format!("{}*{}", self.inner.id(), self.factor)
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.inner.embed(text)?.into_iter().map(|x| x * self.factor).collect())
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
}

/// Client for an OpenAI-style `POST {base_url}/embeddings` endpoint.
pub struct HttpEmbedder {
    base_url: String,
    model: String,
    dimension: usize,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpEmbedder").field("base_url", &self.base_url).field("model", &self.model).finish()
    }
}

impl HttpEmbedder {
    pub fn new(base_url: &str, model: &str, dimension: usize, api_key_env_var: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            dimension,
            api_key: std::env::var(api_key_env_var).ok().filter(|k| !k.is_empty()),
            agent,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http-{}-{}", self.base_url, self.model)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut req = self.agent.post(format!("{}/embeddings", self.base_url));
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(json!({ "model": self.model, "input": text }))
            .map_err(|e| Error::Embed(format!("transport: {e}")))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(Error::Embed(format!("HTTP {status}")));
        }
        let body: EmbeddingResponse =
            resp.body_mut().read_json().map_err(|e| Error::Embed(format!("malformed response: {e}")))?;
        let vector = body.data.into_iter().next().map(|d| d.embedding).ok_or_else(|| Error::Embed("empty data".into()))?;
        if vector.len() != self.dimension {
            return Err(Error::Embed(format!("expected dimension {}, got {}", self.dimension, vector.len())));
        }
        Ok(vector)
    }
}
