//! Namespace-multiset signatures and the in-context example pool.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::owl::{
    equivalence_subjects, parse_equivalence, serialize_mapping_with_labels, ComplexMapping, Iri, Ontology, OwlError,
};

/// Class excluded from signatures: the "abnormal" modifier that nearly every
/// phenotype definition carries.
pub const MODIFIER_CLASS: &str = "PATO_0000460";
/// Namespaces of the relation ontologies; their IRIs are properties.
pub const PROPERTY_NAMESPACES: [&str; 2] = ["RO", "BFO"];
/// Default upper bound on examples per prompt.
pub const DEFAULT_EXAMPLE_LIMIT: usize = 10;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("{path}: {source}")]
    Owl {
        path: PathBuf,
        #[source]
        source: OwlError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("example index line {line}: {message}")]
    Index { line: usize, message: String },
}

/// Multiset of uppercase namespace tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NamespaceSignature(BTreeMap<String, usize>);

impl NamespaceSignature {
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut out = NamespaceSignature::default();
        for (tag, n) in counts {
            if n > 0 {
                *out.0.entry(tag.into().to_uppercase()).or_default() += n;
            }
        }
        out
    }

    pub fn add(&mut self, tag: &str) {
        *self.0.entry(tag.to_uppercase()).or_default() += 1;
    }

    pub fn count(&self, tag: &str) -> usize {
        self.0.get(tag).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> &BTreeMap<String, usize> {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn size(&self) -> usize {
        self.0.values().sum()
    }

    pub fn is_sub_multiset_of(&self, other: &NamespaceSignature) -> bool {
        self.0.iter().all(|(tag, n)| *n <= other.count(tag))
    }

    /// Sum over all tags of the absolute count difference.
    pub fn total_difference(&self, other: &NamespaceSignature) -> usize {
        let mut diff = 0;
        for (tag, n) in &self.0 {
            diff += n.abs_diff(other.count(tag));
        }
        for (tag, n) in &other.0 {
            if !self.0.contains_key(tag) {
                diff += n;
            }
        }
        diff
    }
}

impl fmt::Display for NamespaceSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(t, n)| format!("{t}:{n}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// OBO namespace tag of an IRI: the alphabetic prefix of the fragment before
/// '_', uppercased. `None` when the fragment does not follow the convention.
pub fn namespace_tag(iri: &Iri) -> Option<String> {
    let (prefix, _) = iri.fragment().split_once('_')?;
    if !prefix.is_empty() && prefix.chars().all(|c| c.is_ascii_alphabetic()) {
        Some(prefix.to_ascii_uppercase())
    } else {
        None
    }
}

pub fn is_excluded(iri: &Iri) -> bool {
    if iri.fragment() == MODIFIER_CLASS {
        return true;
    }
    matches!(namespace_tag(iri), Some(tag) if PROPERTY_NAMESPACES.contains(&tag.as_str()))
}

/// Signature of a list of class IRIs, one count per occurrence. Returns the
/// warnings raised for IRIs without an OBO-style tag (their whole fragment
/// becomes the tag).
pub fn namespace_signature<'a>(iris: impl IntoIterator<Item = &'a Iri>) -> (NamespaceSignature, Vec<String>) {
    let mut sig = NamespaceSignature::default();
    let mut warnings = Vec::new();
    for iri in iris {
        if is_excluded(iri) {
            continue;
        }
        match namespace_tag(iri) {
            Some(tag) => sig.add(&tag),
            None => {
                warnings.push(format!("{iri}: no namespace prefix; using the full fragment as tag"));
                sig.add(iri.fragment());
            }
        }
    }
    (sig, warnings)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingExample {
    pub mapping: ComplexMapping,
    pub owl_text: String,
    pub signature: NamespaceSignature,
}

impl MappingExample {
    pub fn new(mapping: ComplexMapping, owl_text: String) -> Self {
        let (signature, warnings) = namespace_signature(mapping.expression.class_iris());
        for w in warnings {
            warn!("example {}: {w}", mapping.source);
        }
        MappingExample {
            mapping,
            owl_text,
            signature,
        }
    }

    pub fn source(&self) -> &Iri {
        &self.mapping.source
    }
}

/// Examples whose signature contains the candidate signature, in pool order.
/// The query's own reference entry is never returned.
pub fn filter_examples<'a>(
    pool: &'a [MappingExample],
    candidate: &NamespaceSignature,
    query_source: Option<&Iri>,
) -> Vec<&'a MappingExample> {
    pool.iter()
        .filter(|ex| Some(ex.source()) != query_source)
        .filter(|ex| candidate.is_sub_multiset_of(&ex.signature))
        .collect()
}

/// Filters, then keeps the `limit` examples closest to the candidate
/// signature by total count difference (ties by pool order), in pool order.
pub fn select_examples<'a>(
    pool: &'a [MappingExample],
    candidate: &NamespaceSignature,
    query_source: Option<&Iri>,
    limit: usize,
) -> Vec<&'a MappingExample> {
    let kept = filter_examples(pool, candidate, query_source);
    if kept.len() <= limit {
        return kept;
    }
    let mut ranked: Vec<(usize, usize)> = kept
        .iter()
        .enumerate()
        .map(|(i, ex)| (candidate.total_difference(&ex.signature), i))
        .collect();
    ranked.sort();
    let mut chosen: Vec<usize> = ranked.into_iter().take(limit).map(|(_, i)| i).collect();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| kept[i]).collect()
}

/// Harvests every class of `ontology` with exactly one supported
/// equivalence axiom, serialized with label comments.
pub fn pool_from_ontology(ontology: &Ontology, labels: &BTreeMap<Iri, String>) -> Vec<MappingExample> {
    let mut pool = Vec::new();
    for class in ontology.classes.values() {
        if class.equivalent_to.len() != 1 {
            continue;
        }
        match ComplexMapping::new(class.iri.clone(), class.equivalent_to[0].clone()) {
            Ok(mapping) => {
                let text = serialize_mapping_with_labels(&mapping, labels);
                pool.push(MappingExample::new(mapping, text));
            }
            Err(e) => warn!("{}: {e}; not used as an example", class.iri),
        }
    }
    pool
}

/// Loads every `.owl`/`.rdf`/`.xml` file of `dir` (sorted by file name). A
/// file holding one mapping keeps its original text; files with several
/// are split and re-serialized.
pub fn load_pool_dir(dir: &Path, labels: &BTreeMap<Iri, String>) -> Result<Vec<(PathBuf, MappingExample)>, PatternError> {
    let io = |source| PatternError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(p.extension().and_then(|e| e.to_str()), Some("owl" | "rdf" | "xml"))
        })
        .collect();
    files.sort();
    let mut pool = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path).map_err(|source| PatternError::Io {
            path: path.clone(),
            source,
        })?;
        let owl = |source| PatternError::Owl {
            path: path.clone(),
            source,
        };
        let subjects = equivalence_subjects(&text).map_err(owl)?;
        if subjects.is_empty() {
            warn!("{}: no equivalentClass axiom; skipped", path.display());
            continue;
        }
        for subject in &subjects {
            let mapping = parse_equivalence(&text, subject).map_err(owl)?;
            let owl_text = if subjects.len() == 1 {
                text.clone()
            } else {
                serialize_mapping_with_labels(&mapping, labels)
            };
            pool.push((path.clone(), MappingExample::new(mapping, owl_text)));
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub source_iri: Iri,
    pub signature: NamespaceSignature,
    pub file: String,
}

pub fn write_index(records: &[IndexRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_index(input: impl BufRead) -> Result<Vec<IndexRecord>, PatternError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| PatternError::Index {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PatternError::Index {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
