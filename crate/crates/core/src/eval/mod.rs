//! Reference-based evaluation: relaxed class metrics, mapping graphs and
//! the hierarchy-aware graph edit distance.

mod ged;
mod graph;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::owl::{ComplexMapping, Iri, Ontology};

pub use ged::{assignment_cost, ged, max_ged, node_substitution_cost, CostModel, GedResult, EXACT_NODE_LIMIT};
pub use graph::{star_graph, to_graph, EdgeLabel, GraphNode, MappingGraph, NodeKind};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation configuration: {0}")]
    Config(String),
    #[error("graph with {nodes} nodes exceeds the exact search limit of {limit}; rerun with the approximate option")]
    GraphTooLarge { nodes: usize, limit: usize },
    #[error("{rows} scored rows but only {m_r} reference mappings")]
    TooManyRows { rows: usize, m_r: usize },
}

/// Asserted direct subclass links between named classes.
#[derive(Debug, Clone, Default)]
pub struct Hierarchy {
    supers: HashMap<Iri, BTreeSet<Iri>>,
    subs: HashMap<Iri, BTreeSet<Iri>>,
}

impl Hierarchy {
    pub fn from_ontologies(ontologies: &[&Ontology]) -> Self {
        let mut h = Hierarchy::default();
        for o in ontologies {
            for c in o.classes.values() {
                for sup in &c.direct_superclasses {
                    h.add(c.iri.clone(), sup.clone());
                }
                for sub in &c.direct_subclasses {
                    h.add(sub.clone(), c.iri.clone());
                }
            }
        }
        h
    }

    /// `(child, parent)` pairs.
    pub fn from_edges(edges: impl IntoIterator<Item = (Iri, Iri)>) -> Self {
        let mut h = Hierarchy::default();
        for (child, parent) in edges {
            h.add(child, parent);
        }
        h
    }

    pub fn add(&mut self, child: Iri, parent: Iri) {
        if child == parent {
            return;
        }
        self.supers.entry(child.clone()).or_default().insert(parent.clone());
        self.subs.entry(parent).or_default().insert(child);
    }

    /// `a` is a direct subclass of `b`.
    pub fn is_direct_subclass(&self, a: &Iri, b: &Iri) -> bool {
        self.supers.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn directly_related(&self, a: &Iri, b: &Iri) -> bool {
        self.is_direct_subclass(a, b) || self.is_direct_subclass(b, a)
    }

    /// Direct neighbours in both directions.
    pub fn neighbor_count(&self, a: &Iri) -> usize {
        let empty = BTreeSet::new();
        let sup = self.supers.get(a).unwrap_or(&empty);
        let sub = self.subs.get(a).unwrap_or(&empty);
        sup.union(sub).count()
    }
}

pub fn relaxed_precision_entity(e: &Iri, e_ref: &Iri, hierarchy: &Hierarchy) -> f64 {
    if e == e_ref || hierarchy.is_direct_subclass(e, e_ref) {
        1.0
    } else if hierarchy.is_direct_subclass(e_ref, e) {
        0.5
    } else {
        0.0
    }
}

pub fn relaxed_recall_entity(e: &Iri, e_ref: &Iri, hierarchy: &Hierarchy) -> f64 {
    if e == e_ref || hierarchy.is_direct_subclass(e_ref, e) {
        1.0
    } else if hierarchy.is_direct_subclass(e, e_ref) {
        0.5
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Relaxed precision and recall of a predicted class list. Predicted and
/// reference entries are paired one-to-one, greedily by descending
/// precision+recall credit (ties by IRI order).
pub fn class_set_scores(predicted: &[Iri], reference: &[Iri], hierarchy: &Hierarchy) -> ClassScores {
    if predicted.is_empty() || reference.is_empty() {
        warn!("class scores over an empty list are zero");
        return ClassScores {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let mut pairs = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, r) in reference.iter().enumerate() {
            let prec = relaxed_precision_entity(p, r, hierarchy);
            let rec = relaxed_recall_entity(p, r, hierarchy);
            if prec + rec > 0.0 {
                pairs.push((prec + rec, i, j, prec, rec));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| predicted[a.1].cmp(&predicted[b.1]))
            .then_with(|| reference[a.2].cmp(&reference[b.2]))
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    let mut used_p = vec![false; predicted.len()];
    let mut used_r = vec![false; reference.len()];
    let (mut sum_p, mut sum_r) = (0.0, 0.0);
    for (_, i, j, prec, rec) in pairs {
        if used_p[i] || used_r[j] {
            continue;
        }
        used_p[i] = true;
        used_r[j] = true;
        sum_p += prec;
        sum_r += rec;
    }
    let precision = sum_p / predicted.len() as f64;
    let recall = sum_r / reference.len() as f64;
    ClassScores {
        precision,
        recall,
        f1: f1(precision, recall),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingScore {
    pub ged: f64,
    pub max_ged: f64,
    pub s: f64,
    pub exact: bool,
}

/// `1 - ged/max_ged`, clamped to [0, 1]; clamping is logged.
pub fn mapping_score(
    g_c: &MappingGraph,
    g_r: &MappingGraph,
    hierarchy: &Hierarchy,
    cost: &CostModel,
    approximate: bool,
) -> Result<MappingScore, EvalError> {
    let result = ged(g_c, g_r, hierarchy, cost, approximate)?;
    let max = max_ged(g_c, g_r, cost);
    let raw = if max > 0.0 {
        1.0 - result.cost / max
    } else if result.cost == 0.0 {
        1.0
    } else {
        0.0
    };
    if !(0.0..=1.0).contains(&raw) {
        warn!(
            "score {raw} for {} clamped (ged {}, max {max})",
            g_r.source(),
            result.cost
        );
    }
    Ok(MappingScore {
        ged: result.cost,
        max_ged: max,
        s: raw.clamp(0.0, 1.0),
        exact: result.exact,
    })
}

/// What was produced for one reference entry.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub source: Iri,
    /// Absent when no valid statement was produced.
    pub graph: Option<MappingGraph>,
    pub classes: Vec<Iri>,
    pub notes: Vec<String>,
}

impl Prediction {
    pub fn from_mapping(source: Iri, mapping: Option<&ComplexMapping>) -> Self {
        match mapping {
            Some(m) => Prediction {
                source,
                graph: Some(to_graph(m)),
                classes: m.expression.class_iris().into_iter().cloned().collect(),
                notes: Vec::new(),
            },
            None => Prediction {
                source,
                graph: None,
                classes: Vec::new(),
                notes: vec!["no valid equivalentClass statement".into()],
            },
        }
    }

    /// A bare class set scored as a star graph.
    pub fn from_class_set(source: Iri, classes: Vec<Iri>) -> Self {
        if classes.is_empty() {
            return Prediction {
                source,
                graph: None,
                classes,
                notes: vec!["no candidate classes".into()],
            };
        }
        Prediction {
            graph: Some(star_graph(&source, &classes)),
            source,
            classes,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub source_iri: Iri,
    pub valid: bool,
    pub s: f64,
    pub class_prec: f64,
    pub class_rec: f64,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<EvaluationRow>,
    pub m_c: usize,
    pub m_r: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub class_precision: f64,
    pub class_recall: f64,
    pub class_f1: f64,
    /// No valid statement at all: precision reported as 0.
    pub precision_undefined: bool,
    /// Some edit distances came from the beam approximation.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub task: String,
    pub variant: String,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "class_P")]
    pub class_p: f64,
    #[serde(rename = "class_R")]
    pub class_r: f64,
    #[serde(rename = "class_F1")]
    pub class_f1: f64,
    pub m_c: usize,
    pub m_r: usize,
    #[serde(default)]
    pub precision_undefined: bool,
    #[serde(default)]
    pub approximate: bool,
}

impl EvaluationReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("source_iri\tvalid\ts\tclass_prec\tclass_rec\tnotes\n");
        for r in &self.rows {
            let notes = r.notes.replace(['\t', '\n'], " ");
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
                r.source_iri, r.valid, r.s, r.class_prec, r.class_rec, notes
            );
        }
        out
    }

    pub fn summary(&self, task: &str, variant: &str) -> SummaryRecord {
        SummaryRecord {
            task: task.into(),
            variant: variant.into(),
            p: self.precision,
            r: self.recall,
            f1: self.f1,
            class_p: self.class_precision,
            class_r: self.class_recall,
            class_f1: self.class_f1,
            m_c: self.m_c,
            m_r: self.m_r,
            precision_undefined: self.precision_undefined,
            approximate: self.approximate,
        }
    }
}

/// Scores every prediction against its reference. Precision divides the
/// summed scores by the number of valid statements, recall by `m_r`; class
/// metrics are averaged over all rows.
pub fn alignment_metrics(
    results: &[(Prediction, &ComplexMapping)],
    hierarchy: &Hierarchy,
    cost: &CostModel,
    m_r: usize,
    approximate: bool,
) -> Result<EvaluationReport, EvalError> {
    cost.validate()?;
    if results.len() > m_r {
        return Err(EvalError::TooManyRows {
            rows: results.len(),
            m_r,
        });
    }
    let mut rows = Vec::with_capacity(results.len());
    let mut any_approx = false;
    for (prediction, reference) in results {
        let ref_graph = to_graph(reference);
        let ref_classes: Vec<Iri> = reference.expression.class_iris().into_iter().cloned().collect();
        let mut notes = prediction.notes.clone();
        let (valid, s) = match &prediction.graph {
            Some(g) => {
                let score = mapping_score(g, &ref_graph, hierarchy, cost, approximate)?;
                if !score.exact {
                    any_approx = true;
                    notes.push("approximate edit distance".into());
                }
                (true, score.s)
            }
            None => (false, 0.0),
        };
        let class = if prediction.classes.is_empty() {
            ClassScores {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
            }
        } else {
            class_set_scores(&prediction.classes, &ref_classes, hierarchy)
        };
        rows.push(EvaluationRow {
            source_iri: prediction.source.clone(),
            valid,
            s,
            class_prec: class.precision,
            class_rec: class.recall,
            notes: notes.join("; "),
        });
    }
    Ok(aggregate_rows(rows, m_r, any_approx))
}

/// Recomputes the aggregates from per-row values.
pub fn aggregate_rows(rows: Vec<EvaluationRow>, m_r: usize, approximate: bool) -> EvaluationReport {
    let m_c = rows.iter().filter(|r| r.valid).count();
    let total: f64 = rows.iter().filter(|r| r.valid).map(|r| r.s).sum();
    let precision = if m_c == 0 { 0.0 } else { total / m_c as f64 };
    let recall = if m_r == 0 { 0.0 } else { total / m_r as f64 };
    let n = rows.len().max(1) as f64;
    let class_precision = rows.iter().map(|r| r.class_prec).sum::<f64>() / n;
    let class_recall = rows.iter().map(|r| r.class_rec).sum::<f64>() / n;
    EvaluationReport {
        m_c,
        m_r,
        precision,
        recall,
        f1: f1(precision, recall),
        class_precision,
        class_recall,
        class_f1: f1(class_precision, class_recall),
        precision_undefined: m_c == 0,
        approximate,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::owl::ClassExpression;

    fn iri(s: &str) -> Iri {
        Iri::new(format!("http://x.org/{s}")).unwrap()
    }

    #[test]
    fn entity_credits() {
        // Asup is the direct superclass of A.
        let h = Hierarchy::from_edges([(iri("A"), iri("Asup"))]);
        assert_eq!(relaxed_precision_entity(&iri("A"), &iri("A"), &h), 1.0);
        assert_eq!(relaxed_precision_entity(&iri("Asup"), &iri("A"), &h), 0.5);
        assert_eq!(relaxed_precision_entity(&iri("A"), &iri("Asup"), &h), 1.0);
        assert_eq!(relaxed_precision_entity(&iri("Z"), &iri("A"), &h), 0.0);
        assert_eq!(relaxed_recall_entity(&iri("Asup"), &iri("A"), &h), 1.0);
        assert_eq!(relaxed_recall_entity(&iri("A"), &iri("Asup"), &h), 0.5);
        assert_eq!(relaxed_recall_entity(&iri("Z"), &iri("A"), &h), 0.0);
    }

    #[test]
    fn set_scores() {
        let h = Hierarchy::from_edges([(iri("A"), iri("Asup"))]);
        let s = class_set_scores(&[iri("A"), iri("B")], &[iri("A"), iri("B")], &h);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = class_set_scores(&[iri("A")], &[iri("A"), iri("B")], &h);
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
        // Superclass predicted: half precision credit, full recall credit.
        let s = class_set_scores(&[iri("Asup"), iri("B")], &[iri("A"), iri("B")], &h);
        assert_eq!((s.precision, s.recall), (0.75, 1.0));
        let s = class_set_scores(&[], &[iri("A")], &h);
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn report_denominators() {
        let reference = ComplexMapping::new(iri("S1"), ClassExpression::Named(iri("B"))).unwrap();
        let reference2 = ComplexMapping::new(iri("S2"), ClassExpression::Named(iri("C"))).unwrap();
        let h = Hierarchy::default();
        let cost = CostModel::with_total(10);
        let results = vec![
            (Prediction::from_mapping(iri("S1"), Some(&reference)), &reference),
            (Prediction::from_mapping(iri("S2"), None), &reference2),
        ];
        let report = alignment_metrics(&results, &h, &cost, 2, false).unwrap();
        assert_eq!((report.m_c, report.m_r), (1, 2));
        assert_eq!((report.precision, report.recall), (1.0, 0.5));
        assert!(report.to_tsv().lines().count() == 3);
        let empty = aggregate_rows(Vec::new(), 2, false);
        assert!(empty.precision_undefined);
    }
}
