use std::io::BufReader;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use cmom_core::http::{endpoint_url, HttpTransport};
use cmom_core::owl::Iri;
use cmom_core::selection::{
    select_for_class, CandidateSet, EmbedError, EmbeddedVocabulary, Embedder, EmbeddingProvider, FileEmbeddings,
    HashingEmbedder, RemoteEmbeddings, SelectionError,
};
use cmom_core::vocabulary::WeightedName;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{Fingerprint, StageCache};
use crate::config::{EmbeddingSettings, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::inputs::{load_references, read_jsonl, sample_sources, write_json, write_jsonl, Vocabularies};
use crate::layout::{Layout, StageOutcome};

pub const STAGE: &str = "select";

/// One line of the candidate dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCandidates {
    pub source_iri: Iri,
    pub label: String,
    /// Aggregated sets, best first.
    pub sets: Vec<CandidateSet>,
    /// Raw embedding-strategy sets (one per source name), kept for ranking.
    pub embedding: Vec<CandidateSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl SourceCandidates {
    pub fn top(&self) -> Option<&CandidateSet> {
        self.sets.first()
    }
}

pub fn read_candidates(layout: &Layout) -> CliResult<Vec<SourceCandidates>> {
    read_jsonl(&layout.candidates())
        .context("candidate dump (run the select stage first)")
        .map_err(CliError::Config)
}

pub fn read_tasks(layout: &Layout) -> CliResult<Vec<Iri>> {
    crate::inputs::read_json(&layout.tasks())
        .context("task list (run the select stage first)")
        .map_err(CliError::Config)
}

fn embed_error(e: EmbedError) -> CliError {
    match e {
        EmbedError::Transport(_) | EmbedError::BadResponse(_) => CliError::Model(e.into()),
        other => CliError::Config(other.into()),
    }
}

fn selection_error(e: SelectionError) -> CliError {
    match e {
        SelectionError::Embed(e) => embed_error(e),
        other => CliError::Config(other.into()),
    }
}

pub fn build_embedder(config: &PipelineConfig) -> CliResult<Option<Embedder>> {
    let provider: Arc<dyn EmbeddingProvider> = match &config.embedding {
        EmbeddingSettings::None => return Ok(None),
        EmbeddingSettings::Hashing { dimension, seed } => Arc::new(HashingEmbedder::new(*dimension, *seed)),
        EmbeddingSettings::File { path } => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("embedding file {}", path.display()))
                .map_err(CliError::Config)?;
            Arc::new(
                FileEmbeddings::load(BufReader::new(file))
                    .map_err(|e| CliError::Parse(anyhow!("{}: {e}", path.display())))?
                    .with_id(format!("file:{}", path.display())),
            )
        }
        EmbeddingSettings::Remote {
            model,
            endpoint,
            api_key_env,
            max_in_flight,
        } => {
            let base = endpoint.as_deref().unwrap_or(&config.model.endpoint);
            let key_var = api_key_env.as_deref().unwrap_or(&config.model.api_key_env);
            let transport = HttpTransport::new(
                endpoint_url(base, "embeddings"),
                std::env::var(key_var).ok(),
                Duration::from_secs(config.model.timeout_secs),
            )
            .map_err(|e| CliError::Config(e.into()))?;
            Arc::new(RemoteEmbeddings::new(
                Box::new(transport),
                model.clone(),
                config.model.retry_policy(),
                *max_in_flight,
            ))
        }
    };
    Ok(Some(Embedder::new(provider)))
}

pub(crate) fn fingerprint(config: &PipelineConfig, cache: &StageCache) -> CliResult<String> {
    let vocab = cache
        .stored(super::vocab::STAGE)
        .ok_or_else(|| CliError::Config(anyhow!("vocabulary dumps missing (run the vocab stage first)")))?;
    let mut fp = Fingerprint::new(STAGE)
        .text("vocab", &vocab)
        .json("selection", &config.selection)
        .and_then(|fp| fp.json("embedding", &config.embedding))
        .and_then(|fp| fp.json("sample", &(config.sample, config.seed)))
        .map_err(CliError::Config)?;
    fp = match &config.references {
        Some(dir) => fp.dir(dir),
        None => fp.file(&config.source_ontology),
    }
    .map_err(CliError::Parse)?;
    if let EmbeddingSettings::File { path } = &config.embedding {
        fp = fp.file(path).map_err(CliError::Config)?;
    }
    Ok(fp.finish())
}

/// Candidate sets for every sampled reference source.
pub fn cmd_select(config: &PipelineConfig) -> CliResult<StageOutcome> {
    let layout = Layout::new(&config.output_dir);
    let cache = StageCache::new(layout.root());
    let digest = fingerprint(config, &cache)?;
    if cache.is_fresh(STAGE, &digest, &[layout.candidates(), layout.tasks()]) {
        info!("select: up to date");
        return Ok(StageOutcome::cached(STAGE));
    }
    cache.invalidate(STAGE);

    let vocabs = Vocabularies::load(&layout)?;
    let labels = vocabs.labels();
    let references = load_references(config, &labels)?;
    let tasks = sample_sources(
        references.iter().map(|e| e.example.source().clone()).collect(),
        config.sample,
        config.seed,
    );
    info!("select: {} of {} reference sources", tasks.len(), references.len());

    let embedder = build_embedder(config)?;
    let embedded = match &embedder {
        Some(e) => Some(EmbeddedVocabulary::build(&vocabs.target, e).map_err(embed_error)?),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers())
        .build()
        .map_err(|e| CliError::Config(e.into()))?;
    let rows: Vec<CliResult<SourceCandidates>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|source| {
                let names: Vec<&WeightedName> = vocabs.source.names_of(source).collect();
                let label = vocabs.label_of(source);
                if names.is_empty() {
                    warn!("{source}: not in the source vocabulary");
                    return Ok(SourceCandidates {
                        source_iri: source.clone(),
                        label,
                        sets: Vec::new(),
                        embedding: Vec::new(),
                        flag: Some("source class has no names".into()),
                    });
                }
                let emb = embedded.as_ref().zip(embedder.as_ref());
                let selection =
                    select_for_class(&names, &vocabs.target, emb, &config.selection).map_err(selection_error)?;
                let flag = selection.aggregated.is_empty().then(|| "no candidate classes".to_string());
                Ok(SourceCandidates {
                    source_iri: source.clone(),
                    label,
                    sets: selection.aggregated,
                    embedding: selection.embedding,
                    flag,
                })
            })
            .collect()
    });
    let rows: Vec<SourceCandidates> = rows.into_iter().collect::<CliResult<_>>()?;
    let empty = rows.iter().filter(|r| r.flag.is_some()).count();
    if empty > 0 {
        warn!("select: {empty} sources without candidates");
    }
    write_jsonl(&layout.candidates(), &rows).map_err(CliError::Config)?;
    write_json(&layout.tasks(), &tasks).map_err(CliError::Config)?;
    cache.store(STAGE, &digest).map_err(CliError::Config)?;
    Ok(StageOutcome::ran(STAGE))
}
