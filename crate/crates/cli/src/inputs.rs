//! Loading of ontologies, dumps and reference entries shared by the stages.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use cmom_core::owl::{parse_ontology_with, Iri, Ontology, ParseOptions};
use cmom_core::patterns::{load_pool_dir, pool_from_ontology, MappingExample};
use cmom_core::vocabulary::{Vocabulary, VocabularyKind};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::layout::Layout;

pub fn read_ontology(path: &Path, options: &ParseOptions) -> CliResult<Ontology> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read ontology {}", path.display()))
        .map_err(CliError::Parse)?;
    let ontology = parse_ontology_with(&text, options)
        .with_context(|| format!("ontology {}", path.display()))
        .map_err(CliError::Parse)?;
    info!(
        "{}: {} classes, namespace {}",
        path.display(),
        ontology.total_class_count(),
        ontology.namespace_tag
    );
    Ok(ontology)
}

pub fn read_targets(config: &PipelineConfig) -> CliResult<Vec<Ontology>> {
    let options = config.parse.options();
    config.target_ontologies.iter().map(|p| read_ontology(p, &options)).collect()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub source: Vec<(String, usize)>,
    pub target: Vec<(String, usize)>,
}

pub struct Vocabularies {
    pub source: Vocabulary,
    pub target: Vocabulary,
}

impl Vocabularies {
    pub fn load(layout: &Layout) -> CliResult<Self> {
        let counts: ClassCounts = read_json(&layout.class_counts()).map_err(CliError::Config)?;
        let open = |path: PathBuf| {
            File::open(&path)
                .map(BufReader::new)
                .with_context(|| format!("missing vocabulary dump {} (run the vocab stage first)", path.display()))
                .map_err(CliError::Config)
        };
        let source = Vocabulary::load(VocabularyKind::Source, open(layout.source_vocab())?, counts.source)
            .context("source vocabulary dump")
            .map_err(CliError::Parse)?;
        let target = Vocabulary::load(VocabularyKind::Target, open(layout.target_vocab())?, counts.target)
            .context("target vocabulary dump")
            .map_err(CliError::Parse)?;
        Ok(Vocabularies { source, target })
    }

    /// Main labels from both sides; the source wins on a clash.
    pub fn labels(&self) -> BTreeMap<Iri, String> {
        let mut out = BTreeMap::new();
        for vocab in [&self.target, &self.source] {
            let classes: BTreeSet<&Iri> = vocab.names().iter().map(|n| &n.class_iri).collect();
            for c in classes {
                if let Some(l) = vocab.main_label(c) {
                    out.insert(c.clone(), l.to_string());
                }
            }
        }
        out
    }

    pub fn label_of(&self, iri: &Iri) -> String {
        self.source
            .main_label(iri)
            .or_else(|| self.target.main_label(iri))
            .map(str::to_string)
            .unwrap_or_else(|| iri.fragment().to_string())
    }
}

/// One reference entry and where it came from.
pub struct Entry {
    pub origin: PathBuf,
    pub example: MappingExample,
}

fn load_entries(dir: Option<&Path>, config: &PipelineConfig, labels: &BTreeMap<Iri, String>) -> CliResult<Vec<Entry>> {
    let mut entries = match dir {
        Some(dir) => load_pool_dir(dir, labels)
            .map_err(|e| CliError::Parse(e.into()))?
            .into_iter()
            .map(|(origin, example)| Entry { origin, example })
            .collect(),
        None => {
            let ontology = read_ontology(&config.source_ontology, &config.parse.options())?;
            pool_from_ontology(&ontology, labels)
                .into_iter()
                .map(|example| Entry {
                    origin: config.source_ontology.clone(),
                    example,
                })
                .collect::<Vec<_>>()
        }
    };
    let mut seen = BTreeSet::new();
    entries.retain(|e| {
        let fresh = seen.insert(e.example.source().clone());
        if !fresh {
            warn!("{}: second definition of {} ignored", e.origin.display(), e.example.source());
        }
        fresh
    });
    Ok(entries)
}

/// The reference alignment.
pub fn load_references(config: &PipelineConfig, labels: &BTreeMap<Iri, String>) -> CliResult<Vec<Entry>> {
    load_entries(config.references.as_deref(), config, labels)
}

/// The in-context example pool.
pub fn load_pool(config: &PipelineConfig, labels: &BTreeMap<Iri, String>) -> CliResult<Vec<Entry>> {
    load_entries(config.examples.dir.as_deref().or(config.references.as_deref()), config, labels)
}

/// Sorts the sources, shuffles them with a ChaCha8 stream seeded by `seed`
/// (Fisher-Yates), keeps the first `n` and sorts those again. Without `n`
/// every source is kept.
pub fn sample_sources(mut sources: Vec<Iri>, n: Option<usize>, seed: u64) -> Vec<Iri> {
    sources.sort();
    sources.dedup();
    if let Some(n) = n {
        if n < sources.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sources.shuffle(&mut rng);
            sources.truncate(n);
            sources.sort();
        }
    }
    sources
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("decoding {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| anyhow!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
