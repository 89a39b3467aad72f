use std::collections::HashMap;

use super::{CandidateSet, SelectionConfig};
use crate::owl::Iri;

/// Scores closer than this are treated as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Merges the sets from both strategies: identical class multisets collapse
/// to their best-scoring entry, and only the top score (with every set tied
/// with it) survives, capped at `max_results_per_source`.
pub fn aggregate(lexical: &[CandidateSet], embedding: &[CandidateSet], config: &SelectionConfig) -> Vec<CandidateSet> {
    let mut merged: Vec<CandidateSet> = Vec::new();
    let mut slot: HashMap<Vec<Iri>, usize> = HashMap::new();
    for set in lexical.iter().chain(embedding) {
        if set.classes.is_empty() {
            continue;
        }
        let key: Vec<Iri> = set.class_key().into_iter().cloned().collect();
        match slot.get(&key) {
            Some(&i) => {
                if set.score > merged[i].score {
                    merged[i] = set.clone();
                }
            }
            None => {
                slot.insert(key, merged.len());
                merged.push(set.clone());
            }
        }
    }
    // Stable: tied sets keep their arrival order.
    merged.sort_by(|a, b| b.score.total_cmp(&a.score));
    let Some(top) = merged.first().map(|s| s.score) else {
        return Vec::new();
    };
    merged
        .into_iter()
        .take_while(|s| top - s.score <= TIE_TOLERANCE)
        .take(config.max_results_per_source)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::Origin;

    fn set(classes: &[&str], score: f64, origin: Origin) -> CandidateSet {
        CandidateSet {
            classes: classes.iter().map(|c| Iri::new(format!("http://x.org/{c}")).unwrap()).collect(),
            score,
            origin,
            source_name: "s".into(),
        }
    }

    #[test]
    fn strict_order_keeps_best() {
        let out = aggregate(
            &[set(&["A", "B"], 0.90, Origin::Lexical)],
            &[set(&["A", "C"], 0.95, Origin::Embedding)],
            &SelectionConfig::default(),
        );
        assert_eq!(out, vec![set(&["A", "C"], 0.95, Origin::Embedding)]);
    }

    #[test]
    fn ties_all_returned() {
        let out = aggregate(
            &[set(&["A"], 0.9, Origin::Lexical), set(&["B"], 0.9, Origin::Lexical), set(&["C"], 0.5, Origin::Lexical)],
            &[],
            &SelectionConfig::default(),
        );
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn duplicates_collapse_to_max() {
        let out = aggregate(
            &[set(&["B", "A"], 0.8, Origin::Lexical)],
            &[set(&["A", "B"], 0.9, Origin::Embedding)],
            &SelectionConfig::default(),
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn multiset_not_set() {
        let out = aggregate(
            &[set(&["A", "A"], 0.9, Origin::Lexical), set(&["A"], 0.9, Origin::Lexical)],
            &[],
            &SelectionConfig::default(),
        );
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn cap_and_empty() {
        let many: Vec<_> = (0..20).map(|i| set(&[&format!("C{i}")], 0.5, Origin::Lexical)).collect();
        let cfg = SelectionConfig {
            max_results_per_source: 3,
            ..Default::default()
        };
        assert_eq!(aggregate(&many, &[], &cfg).len(), 3);
        assert!(aggregate(&[], &[], &cfg).is_empty());
    }
}
