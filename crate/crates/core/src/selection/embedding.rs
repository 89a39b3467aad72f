use std::collections::HashMap;
use std::io::BufRead;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CandidateSet, Origin, SelectionConfig};
use crate::http::{HttpFailure, InFlightLimit, JsonTransport, RetryPolicy};
use crate::vocabulary::{normalize_name, Vocabulary, WeightedName};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider transport failure: {0}")]
    Transport(#[from] HttpFailure),
    #[error("no embedding stored for {0:?}")]
    LookupMiss(String),
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding provider configuration: {0}")]
    Config(String),
    #[error("malformed embedding provider response: {0}")]
    BadResponse(String),
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Transport(e) if e.is_retryable())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &EmbeddingVector) -> EmbeddingVector {
        EmbeddingVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn zeros(dim: usize) -> EmbeddingVector {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn add_assign(&mut self, other: &EmbeddingVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    dot / (na * nb)
}

pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier, used in cache fingerprints.
    fn id(&self) -> String;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
    fn max_in_flight(&self) -> usize {
        1
    }
}

/// Deterministic offline provider: signed feature hashing of character
/// trigrams (and whole tokens) into a fixed dimension, L2-normalised.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    pub dimension: usize,
    pub seed: u64,
}

impl HashingEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        HashingEmbedder { dimension, seed }
    }

    fn features(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for token in normalize_name(text).unwrap_or_default() {
            let padded: Vec<char> = format!("#{token}#").chars().collect();
            for w in padded.windows(3) {
                out.push(w.iter().collect());
            }
            out.push(format!("w:{token}"));
        }
        out
    }

    fn vector(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dimension];
        for feature in Self::features(text) {
            let h = fnv1a(self.seed, feature.as_bytes());
            let idx = (h % self.dimension as u64) as usize;
            v[idx] += if h >> 63 == 1 { -1.0 } else { 1.0 };
        }
        let mut out = EmbeddingVector(v);
        let n = out.norm();
        if n > 0.0 {
            out.0.iter_mut().for_each(|x| *x /= n);
        }
        out
    }
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // Final avalanche so the sign bit is well mixed.
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

impl EmbeddingProvider for HashingEmbedder {
    fn id(&self) -> String {
        format!("hashing:{}:{}", self.dimension, self.seed)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if self.dimension == 0 {
            return Err(EmbedError::Config("hashing dimension must be positive".into()));
        }
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Precomputed vectors keyed by exact text.
#[derive(Debug, Clone, Default)]
pub struct FileEmbeddings {
    vectors: HashMap<String, EmbeddingVector>,
    id: String,
}

#[derive(Deserialize)]
struct StoredVector {
    text: String,
    vector: Vec<f64>,
}

impl FileEmbeddings {
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (text, v) in pairs {
            check_dim(&mut dim, v.len())?;
            vectors.insert(text.into(), EmbeddingVector(v));
        }
        let id = format!("file:{}:{}", vectors.len(), dim.unwrap_or(0));
        Ok(FileEmbeddings { vectors, id })
    }

    /// Line-delimited `{"text": ..., "vector": [...]}` records.
    pub fn load(input: impl BufRead) -> Result<Self, EmbedError> {
        let mut pairs = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| EmbedError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StoredVector = serde_json::from_str(&line)
                .map_err(|e| EmbedError::Config(format!("embedding store line {}: {e}", i + 1)))?;
            pairs.push((rec.text, rec.vector));
        }
        Self::from_pairs(pairs)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

fn check_dim(dim: &mut Option<usize>, found: usize) -> Result<(), EmbedError> {
    if found == 0 {
        return Err(EmbedError::Config("empty embedding vector".into()));
    }
    match *dim {
        Some(expected) if expected != found => Err(EmbedError::DimensionMismatch { expected, found }),
        _ => {
            *dim = Some(found);
            Ok(())
        }
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .map(|t| self.vectors.get(*t).cloned().ok_or_else(|| EmbedError::LookupMiss(t.to_string())))
            .collect()
    }
}

/// OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteEmbeddings {
    transport: Box<dyn JsonTransport>,
    model: String,
    retry: RetryPolicy,
    limit: InFlightLimit,
    max_in_flight: usize,
    batch_size: usize,
}

impl RemoteEmbeddings {
    pub fn new(transport: Box<dyn JsonTransport>, model: impl Into<String>, retry: RetryPolicy, max_in_flight: usize) -> Self {
        RemoteEmbeddings {
            transport,
            model: model.into(),
            retry,
            limit: InFlightLimit::new(max_in_flight),
            max_in_flight: max_in_flight.max(1),
            batch_size: 256,
        }
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let body = serde_json::json!({ "model": self.model, "input": texts });
        let (result, _) = self.retry.run(|| {
            let _permit = self.limit.acquire();
            self.transport.post(&body)
        });
        let text = result?;
        #[derive(Deserialize)]
        struct Item {
            embedding: Vec<f64>,
            #[serde(default)]
            index: Option<usize>,
        }
        #[derive(Deserialize)]
        struct Response {
            data: Vec<Item>,
        }
        let response: Response = serde_json::from_str(&text).map_err(|e| EmbedError::BadResponse(e.to_string()))?;
        if response.data.len() != texts.len() {
            return Err(EmbedError::BadResponse(format!(
                "{} embeddings for {} inputs",
                response.data.len(),
                texts.len()
            )));
        }
        let mut out = vec![None; texts.len()];
        for (pos, item) in response.data.into_iter().enumerate() {
            let slot = item.index.unwrap_or(pos);
            if slot >= out.len() {
                return Err(EmbedError::BadResponse(format!("embedding index {slot} out of range")));
            }
            out[slot] = Some(EmbeddingVector(item.embedding));
        }
        out.into_iter()
            .map(|v| v.ok_or_else(|| EmbedError::BadResponse("missing embedding index".into())))
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbeddings {
    fn id(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            out.extend(self.request(chunk)?);
        }
        Ok(out)
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }
}

/// Caching front for a provider. Safe for concurrent readers and inserts;
/// every vector must share the dimension of the first one seen.
pub struct Embedder {
    provider: Arc<dyn EmbeddingProvider>,
    cache: RwLock<HashMap<String, EmbeddingVector>>,
    dimension: Mutex<Option<usize>>,
}

impl Embedder {
    pub fn new(provider: Arc<dyn EmbeddingProvider>) -> Self {
        Embedder {
            provider,
            cache: RwLock::new(HashMap::new()),
            dimension: Mutex::new(None),
        }
    }

    pub fn provider_id(&self) -> String {
        self.provider.id()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_all(&[text])?.remove(0))
    }

    pub fn embed_all(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let missing: Vec<&str> = {
            let cache = self.cache.read();
            let mut seen = std::collections::HashSet::new();
            texts
                .iter()
                .copied()
                .filter(|t| !cache.contains_key(*t) && seen.insert(*t))
                .collect()
        };
        if !missing.is_empty() {
            let fresh = self.provider.embed_batch(&missing)?;
            {
                let mut dim = self.dimension.lock();
                for v in &fresh {
                    check_dim(&mut dim, v.dim())?;
                }
            }
            let mut cache = self.cache.write();
            for (t, v) in missing.into_iter().zip(fresh) {
                cache.insert(t.to_string(), v);
            }
        }
        let cache = self.cache.read();
        texts
            .iter()
            .map(|t| cache.get(*t).cloned().ok_or_else(|| EmbedError::LookupMiss(t.to_string())))
            .collect()
    }
}

/// Target-name embeddings aligned with the vocabulary's name list.
#[derive(Debug, Clone)]
pub struct EmbeddedVocabulary {
    vectors: Vec<EmbeddingVector>,
}

impl EmbeddedVocabulary {
    pub fn build(vocab: &Vocabulary, embedder: &Embedder) -> Result<Self, EmbedError> {
        let texts: Vec<&str> = vocab.names().iter().map(|n| n.text.as_str()).collect();
        Ok(EmbeddedVocabulary {
            vectors: embedder.embed_all(&texts)?,
        })
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStep {
    pub name_index: usize,
    pub cosine: f64,
    /// Whether the recursion continued past this pick.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTrace {
    pub steps: Vec<EmbeddingStep>,
    pub score: f64,
}

/// Recursive subtraction: pick the target most similar to the residual, add
/// it; continue on `residual - target` while the similarity reached `alpha`.
/// The sub-threshold pick that ends the recursion is kept. A null residual
/// has no most-similar target and ends the recursion without a pick.
pub fn embedding_trace(
    source: &EmbeddingVector,
    vocab: &Vocabulary,
    embedded: &EmbeddedVocabulary,
    config: &SelectionConfig,
) -> Option<EmbeddingTrace> {
    let targets = embedded.vectors();
    if targets.is_empty() {
        return None;
    }
    let mut residual = source.clone();
    let mut steps: Vec<EmbeddingStep> = Vec::new();
    while steps.len() < config.max_embedding_steps {
        if residual.norm() <= 1e-12 {
            break;
        }
        let (best, best_cos) = argmax(&residual, vocab, targets);
        let accepted = best_cos >= config.alpha;
        steps.push(EmbeddingStep {
            name_index: best,
            cosine: best_cos,
            accepted,
        });
        if !accepted {
            break;
        }
        residual = residual.sub(&targets[best]);
    }
    if steps.is_empty() {
        return None;
    }
    let mut sum = EmbeddingVector::zeros(source.dim());
    for s in &steps {
        sum.add_assign(&targets[s.name_index]);
    }
    Some(EmbeddingTrace {
        score: cosine(source, &sum),
        steps,
    })
}

// Ties on cosine go to the lowest class IRI, then the lowest name index.
fn argmax(residual: &EmbeddingVector, vocab: &Vocabulary, targets: &[EmbeddingVector]) -> (usize, f64) {
    let mut best = 0;
    let mut best_cos = cosine(residual, &targets[0]);
    for (i, t) in targets.iter().enumerate().skip(1) {
        let c = cosine(residual, t);
        if c > best_cos || (c == best_cos && vocab.names()[i].class_iri < vocab.names()[best].class_iri) {
            best = i;
            best_cos = c;
        }
    }
    (best, best_cos)
}

/// Embedding-based candidate set for one source name; `None` only for an
/// empty target vocabulary (or a null source vector).
pub fn embedding_select(
    source: &WeightedName,
    vocab: &Vocabulary,
    embedded: &EmbeddedVocabulary,
    embedder: &Embedder,
    config: &SelectionConfig,
) -> Result<Option<CandidateSet>, EmbedError> {
    if vocab.is_empty() {
        return Ok(None);
    }
    let s = embedder.embed(&source.text)?;
    if let Some(t) = embedded.vectors().first() {
        if t.dim() != s.dim() {
            return Err(EmbedError::DimensionMismatch {
                expected: t.dim(),
                found: s.dim(),
            });
        }
    }
    Ok(embedding_trace(&s, vocab, embedded, config).map(|trace| CandidateSet {
        classes: trace
            .steps
            .iter()
            .map(|st| vocab.names()[st.name_index].class_iri.clone())
            .collect(),
        score: trace.score,
        origin: Origin::Embedding,
        source_name: source.text.clone(),
    }))
}
