//! Candidate target-class selection for a source class: lexical exact covers
//! of the source name, recursive embedding subtraction, and aggregation of
//! both into the best-scoring sets.

mod aggregate;
mod embedding;
mod lexical;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::owl::Iri;
use crate::vocabulary::{Vocabulary, VocabularyKind, WeightedName};

pub use aggregate::aggregate;
pub use embedding::{
    cosine, embedding_select, embedding_trace, EmbedError, EmbeddedVocabulary, Embedder, EmbeddingProvider,
    EmbeddingStep, EmbeddingTrace, EmbeddingVector, FileEmbeddings, HashingEmbedder, RemoteEmbeddings,
};
pub use lexical::{lexical_covers, lexical_select};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid selection config: {0}")]
    Config(String),
    #[error("lexical selection needs a target vocabulary")]
    WrongVocabulary,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Cosine threshold below which the embedding recursion stops.
    pub alpha: f64,
    pub max_combo_size: usize,
    pub max_results_per_source: usize,
    /// Cap on targets accepted by one embedding recursion.
    pub max_embedding_steps: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.2,
            max_combo_size: 6,
            max_results_per_source: 10,
            max_embedding_steps: 8,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SelectionError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_combo_size == 0 || self.max_results_per_source == 0 || self.max_embedding_steps == 0 {
            return Err(SelectionError::Config("size limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Lexical,
    Embedding,
}

/// Target classes proposed together for one source name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub classes: Vec<Iri>,
    pub score: f64,
    pub origin: Origin,
    pub source_name: String,
}

impl CandidateSet {
    /// Order-insensitive identity of the class multiset.
    pub fn class_key(&self) -> Vec<&Iri> {
        let mut key: Vec<&Iri> = self.classes.iter().collect();
        key.sort();
        key
    }
}

/// Line-delimited dump record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub source_iri: Iri,
    pub source_name: String,
    pub classes: Vec<Iri>,
    pub score: f64,
    pub origin: Origin,
}

impl CandidateRecord {
    pub fn new(source_iri: Iri, set: CandidateSet) -> Self {
        CandidateRecord {
            source_iri,
            source_name: set.source_name,
            classes: set.classes,
            score: set.score,
            origin: set.origin,
        }
    }

    pub fn into_set(self) -> CandidateSet {
        CandidateSet {
            classes: self.classes,
            score: self.score,
            origin: self.origin,
            source_name: self.source_name,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClassSelection {
    pub lexical: Vec<CandidateSet>,
    pub embedding: Vec<CandidateSet>,
    pub aggregated: Vec<CandidateSet>,
}

/// Runs both strategies for every name of one source class, pools the sets
/// and aggregates them.
pub fn select_for_class(
    source_names: &[&WeightedName],
    target: &Vocabulary,
    embedding: Option<(&EmbeddedVocabulary, &Embedder)>,
    config: &SelectionConfig,
) -> Result<ClassSelection, SelectionError> {
    config.validate()?;
    if target.kind != VocabularyKind::Target {
        return Err(SelectionError::WrongVocabulary);
    }
    let mut out = ClassSelection::default();
    for name in source_names {
        out.lexical.extend(lexical_select(name, target, config)?);
        if let Some((embedded, embedder)) = embedding {
            if let Some(set) = embedding_select(name, target, embedded, embedder, config)? {
                out.embedding.push(set);
            }
        }
    }
    out.aggregated = aggregate(&out.lexical, &out.embedding, config);
    Ok(out)
}
