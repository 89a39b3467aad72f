use std::collections::BTreeMap;

use super::{ClassExpression, ComplexMapping, Iri};

/// Renders `EquivalentTo: ...` in Manchester syntax. Non-atomic restriction
/// fillers and non-atomic conjuncts/disjuncts are parenthesised; unlabelled
/// IRIs fall back to their fragment.
pub fn to_manchester(mapping: &ComplexMapping, labels: &BTreeMap<Iri, String>) -> String {
    format!("EquivalentTo: {}", render(&mapping.expression, labels))
}

fn render(expr: &ClassExpression, labels: &BTreeMap<Iri, String>) -> String {
    match expr {
        ClassExpression::Named(iri) => name(iri, labels),
        ClassExpression::Intersection(ms) => join(ms, " and ", labels),
        ClassExpression::Union(ms) => join(ms, " or ", labels),
        ClassExpression::SomeValuesFrom { property, filler } => {
            format!("{} some {}", name(property, labels), operand(filler, labels))
        }
    }
}

fn join(members: &[ClassExpression], sep: &str, labels: &BTreeMap<Iri, String>) -> String {
    members
        .iter()
        .map(|m| operand(m, labels))
        .collect::<Vec<_>>()
        .join(sep)
}

fn operand(expr: &ClassExpression, labels: &BTreeMap<Iri, String>) -> String {
    if expr.is_atomic() {
        render(expr, labels)
    } else {
        format!("({})", render(expr, labels))
    }
}

fn name(iri: &Iri, labels: &BTreeMap<Iri, String>) -> String {
    labels
        .get(iri)
        .cloned()
        .unwrap_or_else(|| iri.fragment().to_string())
}
