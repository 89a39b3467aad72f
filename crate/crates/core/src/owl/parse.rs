use std::collections::BTreeMap;

use log::warn;
use roxmltree::{Document, Node, ParsingOptions};

use super::{
    ClassExpression, ComplexMapping, Iri, LabelProvenance, Ontology, OntologyClass, OwlError,
    CHEBI_FORMULA, OBO_IN_OWL_NS, OWL_NS, RDFS_NS, RDF_NS,
};

/// Annotation properties (full IRIs) behind the synonym categories that OBO
/// does not name itself.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub internal_synonym_properties: Vec<String>,
    pub external_synonym_properties: Vec<String>,
    pub formula_properties: Vec<String>,
    /// Overrides the inferred namespace tag.
    pub namespace_tag: Option<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            internal_synonym_properties: Vec::new(),
            external_synonym_properties: Vec::new(),
            formula_properties: vec![CHEBI_FORMULA.to_string()],
            namespace_tag: None,
        }
    }
}

pub fn parse_ontology(document: &str) -> Result<Ontology, OwlError> {
    parse_ontology_with(document, &ParseOptions::default())
}

pub fn parse_ontology_with(document: &str, options: &ParseOptions) -> Result<Ontology, OwlError> {
    let doc = load(document)?;
    let mut ontology = Ontology::default();

    for node in top_level(&doc) {
        if !is(node, OWL_NS, "Class") {
            continue;
        }
        let Some(about) = rdf_attr(node, "about") else {
            let msg = format!("line {}: owl:Class without rdf:about skipped", line_of(&doc, node));
            warn!("{msg}");
            ontology.warnings.push(msg);
            continue;
        };
        let iri = match Iri::new(about) {
            Ok(iri) => iri,
            Err(e) => {
                let msg = format!("line {}: {e}; class skipped", line_of(&doc, node));
                warn!("{msg}");
                ontology.warnings.push(msg);
                continue;
            }
        };
        let class = ontology
            .classes
            .entry(iri.clone())
            .or_insert_with(|| OntologyClass::new(iri.clone()));
        if class.names.is_empty() {
            if let Some(local) = iri.local_name() {
                class.names.push((local, LabelProvenance::LocalName));
            }
        }
        for child in node.children().filter(Node::is_element) {
            if let Some(provenance) = name_provenance(child, options) {
                let text = element_text(child);
                if !text.is_empty() && !class.names.iter().any(|(t, p)| *t == text && *p == provenance) {
                    class.names.push((text, provenance));
                }
            } else if is(child, RDFS_NS, "subClassOf") {
                if let Some(sup) = named_reference(child) {
                    match Iri::new(sup) {
                        Ok(sup) if sup != iri => {
                            class.direct_superclasses.insert(sup);
                        }
                        Ok(_) => {}
                        Err(e) => ontology.warnings.push(format!("line {}: {e}", line_of(&doc, child))),
                    }
                }
            } else if is(child, OWL_NS, "equivalentClass") {
                match class_property(&doc, child) {
                    Ok(expr) => class.equivalent_to.push(expr),
                    Err(e) => {
                        let msg = format!("{iri}: equivalentClass ignored: {e}");
                        warn!("{msg}");
                        ontology.warnings.push(msg);
                    }
                }
            }
        }
    }

    let edges: Vec<(Iri, Iri)> = ontology
        .classes
        .values()
        .flat_map(|c| c.direct_superclasses.iter().map(move |s| (c.iri.clone(), s.clone())))
        .collect();
    for (sub, sup) in edges {
        if let Some(parent) = ontology.classes.get_mut(&sup) {
            parent.direct_subclasses.insert(sub);
        }
    }

    ontology.namespace_tag = match &options.namespace_tag {
        Some(tag) => tag.clone(),
        None => infer_tag(&ontology),
    };
    Ok(ontology)
}

fn infer_tag(ontology: &Ontology) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for iri in ontology.classes.keys() {
        if let Some((prefix, _)) = iri.fragment().split_once('_') {
            if !prefix.is_empty() && prefix.chars().all(|c| c.is_ascii_alphabetic()) {
                *counts.entry(prefix.to_ascii_uppercase()).or_default() += 1;
            }
        }
    }
    // max_by_key keeps the last maximum; iterate in reverse so ties resolve
    // to the lexicographically smallest tag.
    counts
        .into_iter()
        .rev()
        .max_by_key(|(_, n)| *n)
        .map(|(tag, _)| tag)
        .unwrap_or_default()
}

fn name_provenance(node: Node, options: &ParseOptions) -> Option<LabelProvenance> {
    let tag = node.tag_name();
    let ns = tag.namespace().unwrap_or("");
    let full = format!("{ns}{}", tag.name());
    if options.formula_properties.iter().any(|p| *p == full) {
        return Some(LabelProvenance::Formula);
    }
    if options.internal_synonym_properties.iter().any(|p| *p == full) {
        return Some(LabelProvenance::InternalSynonym);
    }
    if options.external_synonym_properties.iter().any(|p| *p == full) {
        return Some(LabelProvenance::ExternalSynonym);
    }
    match (ns, tag.name()) {
        (RDFS_NS, "label") => Some(LabelProvenance::Label),
        (OBO_IN_OWL_NS, "hasExactSynonym") => Some(LabelProvenance::ExactSynonym),
        (OBO_IN_OWL_NS, "hasRelatedSynonym" | "hasBroadSynonym" | "hasNarrowSynonym") => {
            Some(LabelProvenance::OtherSynonym)
        }
        _ => None,
    }
}

/// Parses the expression under exactly one `owl:equivalentClass` of
/// `class_iri`.
pub fn parse_equivalence(document: &str, class_iri: &Iri) -> Result<ComplexMapping, OwlError> {
    let doc = load(document)?;
    parse_equivalence_in(&doc, class_iri)
}

/// Subjects of top-level classes carrying at least one `equivalentClass`,
/// in document order.
pub fn equivalence_subjects(document: &str) -> Result<Vec<Iri>, OwlError> {
    let doc = load(document)?;
    Ok(subjects_in(&doc))
}

/// Parses the equivalence of the first class in the document that has one.
pub fn parse_first_equivalence(document: &str) -> Result<ComplexMapping, OwlError> {
    let doc = load(document)?;
    let subject = subjects_in(&doc)
        .into_iter()
        .next()
        .ok_or_else(|| OwlError::MissingEquivalence("any class".into()))?;
    parse_equivalence_in(&doc, &subject)
}

fn subjects_in(doc: &Document) -> Vec<Iri> {
    let mut out: Vec<Iri> = Vec::new();
    for node in top_level(doc) {
        if !is(node, OWL_NS, "Class") {
            continue;
        }
        let has_axiom = node.children().any(|c| is(c, OWL_NS, "equivalentClass"));
        if let (true, Some(Ok(iri))) = (has_axiom, rdf_attr(node, "about").map(Iri::new)) {
            if !out.contains(&iri) {
                out.push(iri);
            }
        }
    }
    out
}

fn parse_equivalence_in(doc: &Document, class_iri: &Iri) -> Result<ComplexMapping, OwlError> {
    let axioms: Vec<Node> = top_level(doc)
        .into_iter()
        .filter(|n| is(*n, OWL_NS, "Class"))
        .filter(|n| rdf_attr(*n, "about").map(str::trim) == Some(class_iri.as_str()))
        .flat_map(|n| n.children().filter(|c| is(*c, OWL_NS, "equivalentClass")))
        .collect();
    match axioms.len() {
        0 => Err(OwlError::MissingEquivalence(class_iri.to_string())),
        1 => ComplexMapping::new(class_iri.clone(), class_property(doc, axioms[0])?),
        count => Err(OwlError::MultipleEquivalences {
            iri: class_iri.to_string(),
            count,
        }),
    }
}

/// A property element whose object is a class description
/// (`equivalentClass`, `someValuesFrom`).
fn class_property(doc: &Document, node: Node) -> Result<ClassExpression, OwlError> {
    if let Some(resource) = rdf_attr(node, "resource") {
        return Ok(ClassExpression::Named(iri_at(doc, node, resource)?));
    }
    if rdf_attr(node, "nodeID").is_some() {
        return Err(unsupported(doc, node, "rdf:nodeID".into()));
    }
    let children: Vec<Node> = node.children().filter(Node::is_element).collect();
    match children.as_slice() {
        [only] => description(doc, *only),
        [] => Err(malformed(doc, node, format!("{} has no class description", qname(node)))),
        _ => Err(malformed(
            doc,
            node,
            format!("{} has {} class descriptions", qname(node), children.len()),
        )),
    }
}

fn description(doc: &Document, node: Node) -> Result<ClassExpression, OwlError> {
    let is_class = is(node, OWL_NS, "Class");
    if is_class || is(node, RDF_NS, "Description") {
        if let Some(about) = rdf_attr(node, "about") {
            return Ok(ClassExpression::Named(iri_at(doc, node, about)?));
        }
    }
    if is_class {
        let children: Vec<Node> = node.children().filter(Node::is_element).collect();
        let [only] = children.as_slice() else {
            return Err(malformed(
                doc,
                node,
                format!("anonymous owl:Class with {} child elements", children.len()),
            ));
        };
        return if is(*only, OWL_NS, "intersectionOf") {
            Ok(ClassExpression::Intersection(collection(doc, *only)?))
        } else if is(*only, OWL_NS, "unionOf") {
            Ok(ClassExpression::Union(collection(doc, *only)?))
        } else {
            Err(unsupported(doc, *only, qname(*only)))
        };
    }
    if is(node, OWL_NS, "Restriction") {
        return restriction(doc, node);
    }
    Err(unsupported(doc, node, qname(node)))
}

fn restriction(doc: &Document, node: Node) -> Result<ClassExpression, OwlError> {
    let mut property = None;
    let mut filler = None;
    for child in node.children().filter(Node::is_element) {
        if is(child, OWL_NS, "onProperty") {
            let iri = named_reference(child)
                .ok_or_else(|| malformed(doc, child, "owl:onProperty without a named property".into()))?;
            property = Some(iri_at(doc, child, iri)?);
        } else if is(child, OWL_NS, "someValuesFrom") {
            filler = Some(class_property(doc, child)?);
        } else {
            return Err(unsupported(doc, child, qname(child)));
        }
    }
    match (property, filler) {
        (Some(property), Some(filler)) => Ok(ClassExpression::some(property, filler)),
        (None, _) => Err(malformed(doc, node, "owl:Restriction without owl:onProperty".into())),
        (_, None) => Err(malformed(doc, node, "owl:Restriction without owl:someValuesFrom".into())),
    }
}

fn collection(doc: &Document, node: Node) -> Result<Vec<ClassExpression>, OwlError> {
    if rdf_attr(node, "parseType") != Some("Collection") {
        return Err(unsupported(
            doc,
            node,
            format!("{} without rdf:parseType=\"Collection\"", qname(node)),
        ));
    }
    let members = node
        .children()
        .filter(Node::is_element)
        .map(|c| description(doc, c))
        .collect::<Result<Vec<_>, _>>()?;
    if members.len() < 2 {
        return Err(malformed(
            doc,
            node,
            format!("{} needs at least two members, found {}", qname(node), members.len()),
        ));
    }
    Ok(members)
}

fn load(document: &str) -> Result<Document<'_>, OwlError> {
    let options = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    Document::parse_with_options(document, options).map_err(|e| {
        let pos = e.pos();
        OwlError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })
}

fn top_level<'a, 'input>(doc: &'a Document<'input>) -> Vec<Node<'a, 'input>> {
    let root = doc.root_element();
    if is(root, RDF_NS, "RDF") {
        root.children().filter(Node::is_element).collect()
    } else {
        vec![root]
    }
}

fn is(node: Node, ns: &str, name: &str) -> bool {
    node.is_element() && node.tag_name().namespace() == Some(ns) && node.tag_name().name() == name
}

fn rdf_attr<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    node.attribute((RDF_NS, name))
}

/// `rdf:resource` on the element, or the `rdf:about` of a single nested
/// named node.
fn named_reference<'a>(node: Node<'a, '_>) -> Option<&'a str> {
    rdf_attr(node, "resource").or_else(|| {
        node.children()
            .filter(Node::is_element)
            .find_map(|c| rdf_attr(c, "about"))
    })
}

fn element_text(node: Node) -> String {
    node.descendants()
        .filter(Node::is_text)
        .filter_map(|n| n.text())
        .collect::<String>()
        .trim()
        .to_string()
}

fn qname(node: Node) -> String {
    let tag = node.tag_name();
    let prefix = match tag.namespace() {
        Some(OWL_NS) => "owl:",
        Some(RDF_NS) => "rdf:",
        Some(RDFS_NS) => "rdfs:",
        _ => "",
    };
    if prefix.is_empty() {
        format!("{}{}", tag.namespace().unwrap_or(""), tag.name())
    } else {
        format!("{prefix}{}", tag.name())
    }
}

fn line_of(doc: &Document, node: Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

fn iri_at(doc: &Document, node: Node, value: &str) -> Result<Iri, OwlError> {
    Iri::new(value).map_err(|_| malformed(doc, node, format!("invalid IRI {value:?}")))
}

fn unsupported(doc: &Document, node: Node, construct: String) -> OwlError {
    OwlError::UnsupportedConstruct {
        construct,
        line: line_of(doc, node),
    }
}

fn malformed(doc: &Document, node: Node, message: String) -> OwlError {
    OwlError::MalformedExpression {
        line: line_of(doc, node),
        message,
    }
}
