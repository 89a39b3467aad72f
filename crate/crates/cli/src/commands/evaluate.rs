use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use cmom_core::compose::PromptVariant;
use cmom_core::eval::{
    aggregate_rows, alignment_metrics, class_set_scores, EvalError, EvaluationReport, EvaluationRow, Hierarchy,
    Prediction, SummaryRecord,
};
use cmom_core::owl::{equivalence_subjects, parse_equivalence, ComplexMapping, Iri};
use cmom_core::patterns::load_pool_dir;
use log::{info, warn};

use super::select::{read_candidates, read_tasks};
use crate::cache::{Fingerprint, StageCache};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::inputs::{load_references, read_json, read_targets, write_json, write_jsonl};
use crate::layout::{Layout, RunOptions, StageOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalMode {
    /// Edit-distance scores of the generated mappings.
    Graph,
    /// Relaxed class-set scores of the generated mappings only.
    Class,
    /// Top candidate sets scored as star graphs.
    BaselineClasses,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Graph => "graph",
            EvalMode::Class => "class",
            EvalMode::BaselineClasses => "baseline-classes",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub variant: PromptVariant,
    pub mode: EvalMode,
    /// Overrides `mappings/<variant>`.
    pub mappings: Option<PathBuf>,
    /// Overrides the configured references.
    pub references: Option<PathBuf>,
}

impl EvaluateArgs {
    pub fn graph(variant: PromptVariant) -> Self {
        EvaluateArgs {
            variant,
            mode: EvalMode::Graph,
            mappings: None,
            references: None,
        }
    }

    /// Name of the row in the summary table and stem of the report files.
    pub fn report_name(&self) -> String {
        match self.mode {
            EvalMode::Graph => self.variant.to_string(),
            EvalMode::Class => format!("{}-class", self.variant),
            EvalMode::BaselineClasses => "cmom-baseline".into(),
        }
    }
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::GraphTooLarge { .. } => CliError::Eval(anyhow!("{e} (rerun with --approx-ged)")),
        EvalError::Config(_) => CliError::Config(e.into()),
        other => CliError::Eval(other.into()),
    }
}

fn fingerprint(config: &PipelineConfig, args: &EvaluateArgs, opts: &RunOptions, cache: &StageCache, layout: &Layout) -> CliResult<String> {
    let mut fp = Fingerprint::new(&format!("evaluate-{}", args.report_name()))
        .text("mode", args.mode.as_str())
        .text("approx", if opts.approx_ged { "yes" } else { "no" })
        .json("cost", &config.cost)
        .and_then(|fp| fp.json("parse", &config.parse))
        .map_err(CliError::Config)?;
    fp = fp.text("select", &cache.stored(super::select::STAGE).unwrap_or_default());
    match (&args.mappings, args.mode) {
        (_, EvalMode::BaselineClasses) => {}
        (Some(dir), _) => fp = fp.dir(dir).map_err(CliError::Parse)?,
        (None, _) => {
            let stage = super::compose::stage_name(args.variant);
            let digest = cache
                .stored(&stage)
                .ok_or_else(|| CliError::Config(anyhow!("no completed {stage} run; compose first")))?;
            fp = fp.text("compose", &digest);
        }
    }
    fp = match args.references.as_deref().or(config.references.as_deref()) {
        Some(dir) => fp.dir(dir),
        None => fp.file(&config.source_ontology),
    }
    .map_err(CliError::Parse)?;
    for t in &config.target_ontologies {
        fp = fp.file(t).map_err(CliError::Parse)?;
    }
    if layout.tasks().exists() {
        fp = fp.file(&layout.tasks()).map_err(CliError::Config)?;
    }
    Ok(fp.finish())
}

/// Every equivalence statement found in the `.owl` files of `dir`, by
/// subject. Unreadable files count as no output.
pub fn read_mappings(dir: &Path) -> CliResult<BTreeMap<Iri, ComplexMapping>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("mappings directory {}", dir.display()))
        .map_err(CliError::Config)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("owl"))
        .collect();
    files.sort();
    let mut out = BTreeMap::new();
    for path in files {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(CliError::Config)?;
        let parsed = equivalence_subjects(&text).and_then(|subjects| {
            subjects
                .iter()
                .map(|s| parse_equivalence(&text, s))
                .collect::<Result<Vec<_>, _>>()
        });
        match parsed {
            Ok(mappings) => {
                for m in mappings {
                    if out.contains_key(&m.source) {
                        warn!("{}: second mapping for {} ignored", path.display(), m.source);
                        continue;
                    }
                    out.insert(m.source.clone(), m);
                }
            }
            Err(e) => warn!("{}: {e}; counted as no output", path.display()),
        }
    }
    Ok(out)
}

/// Scores one variant (or the class-set baseline) against the references.
pub fn cmd_evaluate(config: &PipelineConfig, args: &EvaluateArgs, opts: &RunOptions) -> CliResult<(StageOutcome, SummaryRecord)> {
    let layout = Layout::new(&config.output_dir);
    let cache = StageCache::new(layout.root());
    let name = args.report_name();
    let stage = format!("evaluate-{name}");
    let digest = fingerprint(config, args, opts, &cache, &layout)?;
    let outputs = [layout.report_tsv(&name), layout.report_json(&name), layout.summary(&name)];
    if cache.is_fresh(&stage, &digest, &outputs) {
        if let Ok(summary) = read_json::<SummaryRecord>(&layout.summary(&name)) {
            info!("{stage}: up to date");
            return Ok((StageOutcome::cached(stage), summary));
        }
    }
    cache.invalidate(&stage);

    let targets = read_targets(config)?;
    let target_refs: Vec<_> = targets.iter().collect();
    let hierarchy = Hierarchy::from_ontologies(&target_refs);
    let mut cost = config.cost.clone();
    cost.total_target_classes = targets.iter().map(|o| o.total_class_count()).sum();

    let no_labels = BTreeMap::new();
    let references: BTreeMap<Iri, ComplexMapping> = match &args.references {
        Some(dir) => load_pool_dir(dir, &no_labels)
            .map_err(|e| CliError::Parse(e.into()))?
            .into_iter()
            .map(|(_, ex)| (ex.source().clone(), ex.mapping))
            .collect(),
        None => load_references(config, &no_labels)?
            .into_iter()
            .map(|e| (e.example.source().clone(), e.example.mapping))
            .collect(),
    };
    let tasks: Vec<Iri> = if layout.tasks().exists() {
        read_tasks(&layout)?
    } else {
        references.keys().cloned().collect()
    };
    let tasks: Vec<Iri> = tasks
        .into_iter()
        .filter(|t| {
            let known = references.contains_key(t);
            if !known {
                warn!("{t}: no reference; left out of the evaluation");
            }
            known
        })
        .collect();
    let m_r = tasks.len();

    let predictions: Vec<Prediction> = match args.mode {
        EvalMode::BaselineClasses => {
            let mut candidates: BTreeMap<Iri, Vec<Iri>> = read_candidates(&layout)?
                .into_iter()
                .map(|r| (r.source_iri.clone(), r.top().map(|s| s.classes.clone()).unwrap_or_default()))
                .collect();
            tasks
                .iter()
                .map(|t| Prediction::from_class_set(t.clone(), candidates.remove(t).unwrap_or_default()))
                .collect()
        }
        EvalMode::Graph | EvalMode::Class => {
            let dir = args.mappings.clone().unwrap_or_else(|| layout.mappings(args.variant));
            let mut mappings = read_mappings(&dir)?;
            tasks
                .iter()
                .map(|t| Prediction::from_mapping(t.clone(), mappings.remove(t).as_ref()))
                .collect()
        }
    };
    let pairs: Vec<(Prediction, &ComplexMapping)> = predictions
        .into_iter()
        .map(|p| {
            let reference = &references[&p.source];
            (p, reference)
        })
        .collect();

    let report = match args.mode {
        EvalMode::Class => class_report(&pairs, &hierarchy, m_r),
        _ => alignment_metrics(&pairs, &hierarchy, &cost, m_r, opts.approx_ged).map_err(eval_error)?,
    };
    let variant_label = match args.mode {
        EvalMode::BaselineClasses => "cmom-baseline".to_string(),
        _ => args.variant.to_string(),
    };
    let mut summary = report.summary(&config.task, &variant_label);
    if args.mode == EvalMode::Class {
        summary.p = report.class_precision;
        summary.r = report.class_recall;
        summary.f1 = report.class_f1;
    }
    info!(
        "{stage}: P {:.3} R {:.3} F1 {:.3} (|M_c| = {}, |M_r| = {})",
        summary.p, summary.r, summary.f1, summary.m_c, summary.m_r
    );

    std::fs::create_dir_all(layout.reports_dir()).map_err(|e| CliError::Config(e.into()))?;
    std::fs::write(layout.report_tsv(&name), report.to_tsv()).map_err(|e| CliError::Config(e.into()))?;
    write_json(&layout.report_json(&name), &report).map_err(CliError::Config)?;
    write_json(&layout.summary(&name), &summary).map_err(CliError::Config)?;
    cache.store(&stage, &digest).map_err(CliError::Config)?;
    Ok((StageOutcome::ran(stage), summary))
}

fn class_report(pairs: &[(Prediction, &ComplexMapping)], hierarchy: &Hierarchy, m_r: usize) -> EvaluationReport {
    let rows = pairs
        .iter()
        .map(|(p, reference)| {
            let ref_classes: Vec<Iri> = reference.expression.class_iris().into_iter().cloned().collect();
            let (prec, rec) = if p.classes.is_empty() {
                (0.0, 0.0)
            } else {
                let s = class_set_scores(&p.classes, &ref_classes, hierarchy);
                (s.precision, s.recall)
            };
            EvaluationRow {
                source_iri: p.source.clone(),
                valid: p.graph.is_some(),
                s: 0.0,
                class_prec: prec,
                class_rec: rec,
                notes: p.notes.join("; "),
            }
        })
        .collect();
    aggregate_rows(rows, m_r, false)
}

/// Appends to the summary table of the output directory.
pub fn write_summaries(layout: &Layout, records: &[SummaryRecord]) -> CliResult<()> {
    write_jsonl(&layout.summaries(), records).map_err(CliError::Config)
}
