use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{anyhow, Context};
use cmom_core::compose::{
    generate_mapping, AuditLog, ChatClient, ChatModel, Completion, ComposeError, LabeledClass, MockModel,
    PromptMessage, PromptVariant,
};
use cmom_core::http::{endpoint_url, HttpTransport};
use cmom_core::owl::{serialize_mapping_with_labels, Iri};
use cmom_core::patterns::{namespace_signature, select_examples, write_index, IndexRecord, MappingExample};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::select::{read_candidates, SourceCandidates};
use crate::cache::{Fingerprint, StageCache};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::{load_pool, write_jsonl, Vocabularies};
use crate::layout::{Layout, RunOptions, StageOutcome};

pub fn stage_name(variant: PromptVariant) -> String {
    format!("compose-{variant}")
}

/// One line of the generation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLogEntry {
    pub source_iri: Iri,
    pub variant: String,
    /// Mapping file name, when a valid statement was extracted.
    pub file: Option<String>,
    pub attempts: u32,
    pub selected: Vec<Iri>,
    pub examples: Vec<Iri>,
    pub warnings: Vec<String>,
    pub failure: Option<String>,
}

/// Wraps a model and keeps every exchange in call order.
struct Recorder<'a> {
    inner: &'a dyn ChatModel,
    calls: Mutex<Vec<serde_json::Value>>,
}

impl ChatModel for Recorder<'_> {
    fn complete(&self, messages: &[PromptMessage]) -> Result<Completion, ComposeError> {
        let result = self.inner.complete(messages);
        let outcome = match &result {
            Ok(c) => json!({ "response": c.content, "attempts": c.attempts }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        self.calls
            .lock()
            .expect("recorder lock")
            .push(json!({ "messages": messages, "outcome": outcome }));
        result
    }
}

fn compose_error(e: ComposeError) -> CliError {
    match e {
        ComposeError::Config(_) | ComposeError::Audit(_) => CliError::Config(e.into()),
        other => CliError::Model(other.into()),
    }
}

fn build_model(config: &PipelineConfig, opts: &RunOptions, layout: &Layout, variant: PromptVariant) -> CliResult<Box<dyn ChatModel>> {
    if opts.mock_model {
        return Ok(Box::new(MockModel::new()));
    }
    let key = std::env::var(&config.model.api_key_env).ok();
    if key.is_none() {
        warn!("{} is not set; requests go out without a credential", config.model.api_key_env);
    }
    let transport = HttpTransport::new(
        endpoint_url(&config.model.endpoint, "chat/completions"),
        key,
        Duration::from_secs(config.model.timeout_secs),
    )
    .map_err(|e| CliError::Config(e.into()))?;
    let audit = AuditLog::create(&layout.audit_log(variant))
        .with_context(|| format!("audit log {}", layout.audit_log(variant).display()))
        .map_err(CliError::Config)?;
    let client = ChatClient::new(transport, config.model.clone()).map_err(compose_error)?;
    Ok(Box::new(client.with_audit(audit)))
}

pub(crate) fn fingerprint(config: &PipelineConfig, opts: &RunOptions, variant: PromptVariant, cache: &StageCache) -> CliResult<String> {
    let select = cache
        .stored(super::select::STAGE)
        .ok_or_else(|| CliError::Config(anyhow!("candidate dump missing (run the select stage first)")))?;
    let mut fp = Fingerprint::new(&stage_name(variant))
        .text("select", &select)
        .text("variant", variant.as_str())
        .json("limit", &config.examples.limit)
        .map_err(CliError::Config)?;
    fp = if opts.mock_model {
        fp.text("model", "mock")
    } else {
        fp.json("model", &config.model).map_err(CliError::Config)?
    };
    fp = match config.examples.dir.as_deref().or(config.references.as_deref()) {
        Some(dir) => fp.dir(dir),
        None => fp.file(&config.source_ontology),
    }
    .map_err(CliError::Parse)?;
    Ok(fp.finish())
}

fn file_stem(iri: &Iri) -> String {
    iri.fragment()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

struct Outcome {
    entry: GenerationLogEntry,
    calls: Vec<serde_json::Value>,
    endpoint_error: Option<CliError>,
}

/// Generates one mapping file per task source. On an endpoint failure the
/// remaining sources are skipped, finished files are kept and the command
/// fails.
pub fn cmd_compose(config: &PipelineConfig, variant: PromptVariant, opts: &RunOptions) -> CliResult<StageOutcome> {
    let layout = Layout::new(&config.output_dir);
    let cache = StageCache::new(layout.root());
    let stage = stage_name(variant);
    let digest = fingerprint(config, opts, variant, &cache)?;
    let out_dir = layout.mappings(variant);
    if cache.is_fresh(&stage, &digest, &[layout.generation_log(variant), layout.examples_index()]) {
        info!("{stage}: up to date");
        return Ok(StageOutcome::cached(stage));
    }
    cache.invalidate(&stage);

    let vocabs = Vocabularies::load(&layout)?;
    let labels = vocabs.labels();
    let rows = read_candidates(&layout)?;
    let entries = load_pool(config, &labels)?;
    let index: Vec<IndexRecord> = entries
        .iter()
        .map(|e| IndexRecord {
            source_iri: e.example.source().clone(),
            signature: e.example.signature.clone(),
            file: e.origin.display().to_string(),
        })
        .collect();
    let pool: Vec<MappingExample> = entries.into_iter().map(|e| e.example).collect();
    info!("{stage}: {} sources, {} pool examples", rows.len(), pool.len());

    // Stale files from an earlier run of this variant.
    if out_dir.exists() {
        std::fs::remove_dir_all(&out_dir)
            .with_context(|| format!("clearing {}", out_dir.display()))
            .map_err(CliError::Config)?;
    }
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Config(e.into()))?;
    let index_file = std::fs::File::create(layout.examples_index()).map_err(|e| CliError::Config(e.into()))?;
    write_index(&index, std::io::BufWriter::new(index_file)).map_err(|e| CliError::Config(e.into()))?;

    let model = build_model(config, opts, &layout, variant)?;
    let mut stems: BTreeMap<Iri, String> = BTreeMap::new();
    let mut taken = std::collections::BTreeSet::new();
    for r in &rows {
        let base = file_stem(&r.source_iri);
        let mut stem = base.clone();
        let mut n = 1;
        while !taken.insert(stem.clone()) {
            n += 1;
            stem = format!("{base}-{n}");
        }
        stems.insert(r.source_iri.clone(), stem);
    }

    let known = |iri: &Iri| vocabs.target.contains_class(iri) || vocabs.source.contains_class(iri);
    let abort = AtomicBool::new(false);
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers())
        .build()
        .map_err(|e| CliError::Config(e.into()))?;
    let generate = |row: &SourceCandidates| -> CliResult<Outcome> {
        let selected: Vec<LabeledClass> = row
            .top()
            .map(|set| {
                set.classes
                    .iter()
                    .map(|c| LabeledClass::new(c.clone(), vocabs.label_of(c)))
                    .collect()
            })
            .unwrap_or_default();
        let (signature, _) = namespace_signature(selected.iter().map(|c| &c.iri));
        let examples = select_examples(&pool, &signature, Some(&row.source_iri), config.examples.limit);
        let mut entry = GenerationLogEntry {
            source_iri: row.source_iri.clone(),
            variant: variant.to_string(),
            file: None,
            attempts: 0,
            selected: selected.iter().map(|c| c.iri.clone()).collect(),
            examples: examples.iter().map(|e| e.source().clone()).collect(),
            warnings: Vec::new(),
            failure: None,
        };
        if abort.load(Ordering::SeqCst) {
            entry.failure = Some("skipped after an endpoint failure".into());
            return Ok(Outcome {
                entry,
                calls: Vec::new(),
                endpoint_error: None,
            });
        }
        let recorder = Recorder {
            inner: model.as_ref(),
            calls: Mutex::new(Vec::new()),
        };
        let source = LabeledClass::new(row.source_iri.clone(), row.label.clone());
        let result = generate_mapping(&recorder, &source, &selected, &examples, variant, Some(&known));
        let calls = recorder.calls.into_inner().expect("recorder lock");
        match result {
            Ok(generation) => {
                entry.attempts = generation.attempts;
                entry.warnings = generation.warnings;
                entry.failure = generation.failure;
                if let Some(mapping) = &generation.parsed {
                    let name = format!("{}.owl", stems[&row.source_iri]);
                    let path = out_dir.join(&name);
                    std::fs::write(&path, serialize_mapping_with_labels(mapping, &labels))
                        .with_context(|| format!("writing {}", path.display()))
                        .map_err(CliError::Config)?;
                    entry.file = Some(name);
                }
                Ok(Outcome {
                    entry,
                    calls,
                    endpoint_error: None,
                })
            }
            Err(e) => {
                let err = compose_error(e);
                if matches!(err, CliError::Config(_)) {
                    return Err(err);
                }
                abort.store(true, Ordering::SeqCst);
                entry.failure = Some(err.to_string());
                Ok(Outcome {
                    entry,
                    calls,
                    endpoint_error: Some(err),
                })
            }
        }
    };
    let outcomes: Vec<CliResult<Outcome>> = threads.install(|| rows.par_iter().map(generate).collect());
    let outcomes: Vec<Outcome> = outcomes.into_iter().collect::<CliResult<_>>()?;

    let mut log = Vec::with_capacity(outcomes.len());
    let mut prompts = Vec::new();
    let mut endpoint_error = None;
    for o in outcomes {
        for call in o.calls {
            prompts.push(json!({ "source_iri": o.entry.source_iri, "exchange": call }));
        }
        if endpoint_error.is_none() {
            endpoint_error = o.endpoint_error;
        }
        log.push(o.entry);
    }
    write_jsonl(&layout.prompt_log(variant), &prompts).map_err(CliError::Config)?;
    write_jsonl(&layout.generation_log(variant), &log).map_err(CliError::Config)?;
    let valid = log.iter().filter(|e| e.file.is_some()).count();
    info!("{stage}: {valid} of {} mappings extracted", log.len());
    if let Some(err) = endpoint_error {
        return Err(err);
    }
    cache.store(&stage, &digest).map_err(CliError::Config)?;
    Ok(StageOutcome::ran(stage))
}
