//! Unified, token-indexed vocabularies of weighted class names.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::owl::{Iri, LabelProvenance, Ontology};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("name {0:?} has no alphanumeric tokens")]
    EmptyName(String),
    #[error("vocabulary needs at least one ontology")]
    NoOntologies,
    #[error("vocabulary dump line {line}: {message}")]
    Dump { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Confidence of a name given where it came from.
pub fn base_weight(provenance: LabelProvenance) -> f64 {
    match provenance {
        LabelProvenance::LocalName => 1.0,
        LabelProvenance::Label => 0.95,
        LabelProvenance::ExactSynonym | LabelProvenance::InternalSynonym => 0.9,
        LabelProvenance::OtherSynonym | LabelProvenance::ExternalSynonym => 0.85,
        LabelProvenance::Formula => 0.8,
    }
}

/// `max(base - group_size / 100, 0)`, where `group_size` counts the names of
/// the class sharing the same provenance.
///
/// Bases on the hundredths grid are computed in integer hundredths so that
/// results compare equal to their decimal literals (0.9 - 0.03 == 0.87).
pub fn corrected_weight(base: f64, group_size: usize) -> f64 {
    let scaled = base * 100.0;
    if (scaled - scaled.round()).abs() < 1e-9 {
        let hundredths = scaled.round() - group_size as f64;
        hundredths.max(0.0) / 100.0
    } else {
        (base - group_size as f64 / 100.0).max(0.0)
    }
}

/// Lowercased alphanumeric runs. No stemming, no stopwords.
pub fn normalize_name(text: &str) -> Result<Vec<String>, VocabError> {
    let tokens: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect();
    if tokens.is_empty() {
        Err(VocabError::EmptyName(text.to_string()))
    } else {
        Ok(tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedName {
    pub class_iri: Iri,
    pub text: String,
    pub tokens: Vec<String>,
    pub provenance: LabelProvenance,
    pub weight: f64,
    pub ontology_tag: String,
}

impl WeightedName {
    pub fn token_set(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabularyKind {
    Source,
    Target,
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub kind: VocabularyKind,
    names: Vec<WeightedName>,
    token_index: BTreeMap<String, BTreeSet<usize>>,
    class_counts: Vec<(String, usize)>,
}

impl Vocabulary {
    pub fn build(ontologies: &[&Ontology], kind: VocabularyKind) -> Result<Self, VocabError> {
        if ontologies.is_empty() {
            return Err(VocabError::NoOntologies);
        }
        let mut names = Vec::new();
        for ontology in ontologies {
            for class in ontology.classes.values() {
                let mut group: BTreeMap<LabelProvenance, usize> = BTreeMap::new();
                for (_, p) in &class.names {
                    *group.entry(*p).or_default() += 1;
                }
                for (text, provenance) in &class.names {
                    let tokens = match normalize_name(text) {
                        Ok(t) => t,
                        Err(e) => {
                            warn!("{}: {e}; name skipped", class.iri);
                            continue;
                        }
                    };
                    names.push(WeightedName {
                        class_iri: class.iri.clone(),
                        text: text.clone(),
                        tokens,
                        provenance: *provenance,
                        weight: corrected_weight(base_weight(*provenance), group[provenance]),
                        ontology_tag: ontology.namespace_tag.clone(),
                    });
                }
            }
        }
        let class_counts = ontologies
            .iter()
            .map(|o| (o.namespace_tag.clone(), o.total_class_count()))
            .collect();
        Ok(Self::from_parts(kind, names, class_counts))
    }

    pub fn from_parts(kind: VocabularyKind, names: Vec<WeightedName>, class_counts: Vec<(String, usize)>) -> Self {
        let mut token_index: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            for t in &name.tokens {
                token_index.entry(t.clone()).or_default().insert(i);
            }
        }
        Vocabulary {
            kind,
            names,
            token_index,
            class_counts,
        }
    }

    pub fn names(&self) -> &[WeightedName] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Indices of the names containing `token`.
    pub fn names_with_token(&self, token: &str) -> impl Iterator<Item = usize> + '_ {
        self.token_index.get(token).into_iter().flatten().copied()
    }

    pub fn class_counts(&self) -> &[(String, usize)] {
        &self.class_counts
    }

    pub fn total_class_count(&self) -> usize {
        self.class_counts.iter().map(|(_, n)| n).sum()
    }

    pub fn names_of<'a>(&'a self, class: &'a Iri) -> impl Iterator<Item = &'a WeightedName> + 'a {
        self.names.iter().filter(move |n| &n.class_iri == class)
    }

    /// Preferred display label: `rdfs:label`, else the heaviest name.
    pub fn main_label(&self, class: &Iri) -> Option<&str> {
        let mut best: Option<&WeightedName> = None;
        for n in self.names.iter().filter(|n| &n.class_iri == class) {
            if n.provenance == LabelProvenance::Label {
                return Some(&n.text);
            }
            if best.is_none_or(|b| n.weight > b.weight) {
                best = Some(n);
            }
        }
        best.map(|n| n.text.as_str())
    }

    pub fn contains_class(&self, class: &Iri) -> bool {
        self.names.iter().any(|n| &n.class_iri == class)
    }

    /// One JSON record per name.
    pub fn dump(&self, mut out: impl Write) -> Result<(), VocabError> {
        for name in &self.names {
            serde_json::to_writer(&mut out, name).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load(kind: VocabularyKind, input: impl BufRead, class_counts: Vec<(String, usize)>) -> Result<Self, VocabError> {
        let mut names = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let name: WeightedName = serde_json::from_str(&line).map_err(|e| VocabError::Dump {
                line: i + 1,
                message: e.to_string(),
            })?;
            names.push(name);
        }
        Ok(Self::from_parts(kind, names, class_counts))
    }
}
