//! The decreased-circulating-cortisol logical definition, end to end through
//! the OWL model, graph form and signatures.

use std::collections::BTreeMap;

use cmom_core::eval::{to_graph, EdgeLabel, NodeKind};
use cmom_core::owl::{
    parse_equivalence, parse_ontology, serialize_mapping, serialize_mapping_with_labels, to_manchester,
    ClassExpression, Iri,
};
use cmom_core::patterns::namespace_signature;

const DOC: &str = include_str!("fixtures/cortisol_definition.owl");

fn obo(id: &str) -> Iri {
    Iri::new(format!("http://purl.obolibrary.org/obo/{id}")).unwrap()
}

fn named(id: &str) -> ClassExpression {
    ClassExpression::Named(obo(id))
}

fn expected_tree() -> ClassExpression {
    ClassExpression::some(
        obo("BFO_0000051"),
        ClassExpression::Intersection(vec![
            named("PATO_0001997"),
            ClassExpression::some(
                obo("RO_0000052"),
                ClassExpression::Intersection(vec![
                    named("CHEBI_17650"),
                    ClassExpression::some(obo("BFO_0000050"), named("UBERON_0000178")),
                ]),
            ),
            ClassExpression::some(obo("RO_0002573"), named("PATO_0000460")),
        ]),
    )
}

fn labels() -> BTreeMap<Iri, String> {
    [
        ("HP_0008163", "decreased circulating cortisol level"),
        ("BFO_0000051", "has part"),
        ("PATO_0001997", "decreased amount"),
        ("RO_0000052", "inheres in"),
        ("CHEBI_17650", "cortisol"),
        ("BFO_0000050", "part of"),
        ("UBERON_0000178", "blood"),
        ("RO_0002573", "has modifier"),
        ("PATO_0000460", "abnormal"),
    ]
    .into_iter()
    .map(|(id, l)| (obo(id), l.to_string()))
    .collect()
}

#[test]
fn ontology_view() {
    let o = parse_ontology(DOC).unwrap();
    assert_eq!(o.total_class_count(), 1);
    let class = o.get(&obo("HP_0008163")).unwrap();
    assert_eq!(class.equivalent_to.len(), 1);
    let expr = &class.equivalent_to[0];
    let mut referenced: Vec<&Iri> = expr.property_iris();
    referenced.extend(expr.class_iris());
    referenced.sort();
    referenced.dedup();
    assert_eq!(referenced.len(), 8);
}

#[test]
fn expression_tree() {
    let m = parse_equivalence(DOC, &obo("HP_0008163")).unwrap();
    assert_eq!(m.expression, expected_tree());
    assert_eq!(m.relation(), "equivalence");
}

#[test]
fn round_trip() {
    let m = parse_equivalence(DOC, &obo("HP_0008163")).unwrap();
    let text = serialize_mapping(&m);
    assert!(parse_equivalence(&text, &m.source).unwrap().same_structure(&m));
    let commented = serialize_mapping_with_labels(&m, &labels());
    assert!(commented.contains("<!-- abnormal -->"));
    assert!(parse_equivalence(&commented, &m.source).unwrap().same_structure(&m));
}

/// Element names and attributes, ignoring whitespace and comments.
fn shape(node: roxmltree::Node) -> String {
    let mut attrs: Vec<String> = node
        .attributes()
        .map(|a| format!("{}{}={}", a.namespace().unwrap_or(""), a.name(), a.value()))
        .collect();
    attrs.sort();
    let kids: Vec<String> = node.children().filter(|c| c.is_element()).map(shape).collect();
    format!(
        "{}{}[{}]({})",
        node.tag_name().namespace().unwrap_or(""),
        node.tag_name().name(),
        attrs.join(","),
        kids.join(",")
    )
}

fn class_element(doc: &roxmltree::Document) -> String {
    let class = doc
        .root_element()
        .children()
        .find(|c| c.is_element() && c.tag_name().name() == "Class")
        .unwrap();
    shape(class)
}

#[test]
fn serialization_matches_listing_structure() {
    let m = parse_equivalence(DOC, &obo("HP_0008163")).unwrap();
    let ours = serialize_mapping_with_labels(&m, &labels());
    let a = roxmltree::Document::parse(&ours).unwrap();
    let b = roxmltree::Document::parse_with_options(
        DOC,
        roxmltree::ParsingOptions {
            allow_dtd: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(class_element(&a), class_element(&b));
}

#[test]
fn manchester() {
    let m = parse_equivalence(DOC, &obo("HP_0008163")).unwrap();
    assert_eq!(
        to_manchester(&m, &labels()),
        "EquivalentTo: has part some (decreased amount and (inheres in some (cortisol and (part of some blood))) and (has modifier some abnormal))"
    );
}

#[test]
fn graph_form() {
    let m = parse_equivalence(DOC, &obo("HP_0008163")).unwrap();
    let g = to_graph(&m);
    assert_eq!(g.node_count(), 9);
    assert_eq!(g.edge_count(), 8);
    let kinds: Vec<(String, NodeKind)> = g.nodes().iter().map(|n| (n.iri.fragment().to_string(), n.kind)).collect();
    for p in ["BFO_0000051", "RO_0000052", "BFO_0000050", "RO_0002573"] {
        assert!(kinds.contains(&(p.to_string(), NodeKind::Property)), "{p}");
    }
    for c in ["PATO_0001997", "CHEBI_17650", "UBERON_0000178", "PATO_0000460"] {
        assert!(kinds.contains(&(c.to_string(), NodeKind::Class)), "{c}");
    }
    use EdgeLabel::*;
    let expected = [
        ("HP_0008163", "BFO_0000051", EquivalentClass),
        ("BFO_0000051", "PATO_0001997", SomeValuesFrom),
        ("BFO_0000051", "RO_0000052", SomeValuesFrom),
        ("BFO_0000051", "RO_0002573", SomeValuesFrom),
        ("RO_0000052", "CHEBI_17650", SomeValuesFrom),
        ("RO_0000052", "BFO_0000050", SomeValuesFrom),
        ("BFO_0000050", "UBERON_0000178", SomeValuesFrom),
        ("RO_0002573", "PATO_0000460", SomeValuesFrom),
    ];
    let want: std::collections::BTreeSet<_> = expected.iter().map(|(a, b, l)| (obo(a), obo(b), *l)).collect();
    assert_eq!(g.edge_triples(), want);
}

#[test]
fn signature_exclusions() {
    let m = parse_equivalence(DOC, &obo("HP_0008163")).unwrap();
    let (sig, warnings) = namespace_signature(m.expression.class_iris());
    assert!(warnings.is_empty());
    let entries: Vec<(&str, usize)> = sig.entries().iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(entries, vec![("CHEBI", 1), ("PATO", 1), ("UBERON", 1)]);
}
