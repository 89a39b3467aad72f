use std::collections::BTreeSet;

use log::warn;

use super::{CandidateSet, Origin, SelectionConfig, SelectionError};
use crate::vocabulary::{Vocabulary, VocabularyKind, WeightedName};

/// All combinations of target names whose token sets are pairwise disjoint
/// subsets of the source token set and together cover it exactly.
///
/// Each combination lists name indices ordered by the position in the source
/// of the earliest token they cover; combinations come out in search order.
pub fn lexical_covers(source_tokens: &[String], vocab: &Vocabulary, max_combo_size: usize) -> Vec<Vec<usize>> {
    // Bit positions follow first occurrence in the source name.
    let mut universe: Vec<&str> = Vec::new();
    for t in source_tokens {
        if !universe.contains(&t.as_str()) {
            universe.push(t);
        }
    }
    if universe.is_empty() {
        return Vec::new();
    }
    if universe.len() > 64 {
        warn!("source name with {} distinct tokens exceeds the cover limit", universe.len());
        return Vec::new();
    }
    let bit = |token: &str| universe.iter().position(|u| *u == token);
    let full: u64 = if universe.len() == 64 { u64::MAX } else { (1u64 << universe.len()) - 1 };

    // Names sharing at least one word with the source, restricted to those
    // that fit inside it.
    let sharing: BTreeSet<usize> = universe.iter().flat_map(|t| vocab.names_with_token(t)).collect();
    let mut options: Vec<(usize, u64)> = Vec::new();
    for i in sharing {
        let mut mask = 0u64;
        let fits = vocab.names()[i].tokens.iter().all(|t| match bit(t) {
            Some(b) => {
                mask |= 1 << b;
                true
            }
            None => false,
        });
        if fits {
            options.push((i, mask));
        }
    }

    let mut by_lowest_bit: Vec<Vec<(usize, u64)>> = vec![Vec::new(); universe.len()];
    for &(i, mask) in &options {
        by_lowest_bit[mask.trailing_zeros() as usize].push((i, mask));
    }
    // An option can only be chosen when its lowest bit is the lowest
    // uncovered bit, so each cover is produced exactly once.
    let mut out = Vec::new();
    let mut stack = Vec::new();
    search(0, full, &by_lowest_bit, max_combo_size, &mut stack, &mut out);
    out
}

fn search(
    covered: u64,
    full: u64,
    by_lowest_bit: &[Vec<(usize, u64)>],
    max_size: usize,
    stack: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if covered == full {
        out.push(stack.clone());
        return;
    }
    if stack.len() == max_size {
        return;
    }
    let lowest = (!covered).trailing_zeros() as usize;
    for &(i, mask) in &by_lowest_bit[lowest] {
        if mask & covered == 0 {
            stack.push(i);
            search(covered | mask, full, by_lowest_bit, max_size, stack, out);
            stack.pop();
        }
    }
}

/// One candidate set per exact cover, scored by the product of the member
/// name weights.
pub fn lexical_select(
    source: &WeightedName,
    vocab: &Vocabulary,
    config: &SelectionConfig,
) -> Result<Vec<CandidateSet>, SelectionError> {
    if vocab.kind != VocabularyKind::Target {
        return Err(SelectionError::WrongVocabulary);
    }
    Ok(lexical_covers(&source.tokens, vocab, config.max_combo_size)
        .into_iter()
        .map(|combo| {
            let names: Vec<&WeightedName> = combo.iter().map(|&i| &vocab.names()[i]).collect();
            CandidateSet {
                classes: names.iter().map(|n| n.class_iri.clone()).collect(),
                score: names.iter().map(|n| n.weight).product(),
                origin: Origin::Lexical,
                source_name: source.text.clone(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::owl::{Iri, LabelProvenance};
    use crate::vocabulary::normalize_name;

    fn name(class: &str, text: &str, weight: f64) -> WeightedName {
        WeightedName {
            class_iri: Iri::new(format!("http://x.org/{class}")).unwrap(),
            text: text.into(),
            tokens: normalize_name(text).unwrap(),
            provenance: LabelProvenance::Label,
            weight,
            ontology_tag: "X".into(),
        }
    }

    fn target(names: Vec<WeightedName>) -> Vocabulary {
        Vocabulary::from_parts(VocabularyKind::Target, names, vec![])
    }

    #[test]
    fn increased_heart_rate() {
        let v = target(vec![
            name("PATO_1", "increased", 0.95),
            name("UBERON_1", "heart rate", 0.95),
            name("UBERON_2", "heart", 0.95),
        ]);
        let src = name("HP_1", "increased heart rate", 0.95);
        let sets = lexical_select(&src, &v, &SelectionConfig::default()).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(
            sets[0].classes,
            vec![Iri::new("http://x.org/PATO_1").unwrap(), Iri::new("http://x.org/UBERON_1").unwrap()]
        );
        assert!((sets[0].score - 0.9025).abs() < 1e-15);
    }

    #[test]
    fn exact_single_name() {
        let v = target(vec![name("UBERON_0000178", "blood", 1.0), name("X_2", "blood cell", 0.9)]);
        let sets = lexical_select(&name("S", "blood", 1.0), &v, &SelectionConfig::default()).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].score, 1.0);
    }

    #[test]
    fn repeated_source_token_covered_once() {
        let v = target(vec![name("A", "left", 0.9), name("B", "right", 0.9)]);
        let covers = lexical_covers(&normalize_name("left right left").unwrap(), &v, 6);
        assert_eq!(covers, vec![vec![0, 1]]);
    }

    #[test]
    fn combo_size_limit() {
        let v = target(vec![name("A", "a", 0.9), name("B", "b", 0.9), name("C", "c", 0.9), name("D", "a b c", 0.9)]);
        let tokens = normalize_name("a b c").unwrap();
        assert_eq!(lexical_covers(&tokens, &v, 6).len(), 2);
        assert_eq!(lexical_covers(&tokens, &v, 2), vec![vec![3]]);
    }

    #[test]
    fn rejects_source_vocabulary() {
        let v = Vocabulary::from_parts(VocabularyKind::Source, vec![], vec![]);
        assert!(lexical_select(&name("S", "x", 1.0), &v, &SelectionConfig::default()).is_err());
    }
}
