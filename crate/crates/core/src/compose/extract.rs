use super::ComposeError;
use crate::owl::{equivalence_subjects, parse_equivalence, ComplexMapping, Iri, OwlError, OWL_NS, RDFS_NS, RDF_NS};

/// Cuts the RDF/XML document out of a model answer: code fences and prose
/// around it are dropped. Returns `None` when nothing XML-like is present.
pub fn locate_rdf(raw: &str) -> Option<String> {
    let body = fenced_block(raw).unwrap_or(raw);
    let start = ["<?xml", "<rdf:RDF", "<RDF"]
        .iter()
        .filter_map(|m| body.find(m))
        .min()
        .or_else(|| body.find("<owl:"))?;
    let tail = &body[start..];
    let end = ["</rdf:RDF>", "</RDF>"]
        .iter()
        .filter_map(|m| tail.rfind(m).map(|i| i + m.len()))
        .max()
        .or_else(|| tail.rfind('>').map(|i| i + 1))?;
    Some(tail[..end].to_string())
}

/// Body of the first fenced block that looks like markup.
fn fenced_block(raw: &str) -> Option<&str> {
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // Skip the info string (e.g. "xml").
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let body = &after[body_start..];
        let close = body.find("```").unwrap_or(body.len());
        let block = &body[..close];
        if block.contains('<') {
            return Some(block);
        }
        if close >= body.len() {
            break;
        }
        rest = &body[close + 3..];
    }
    None
}

/// Wraps a bare fragment (e.g. a lone `owl:Class` element) in an `rdf:RDF`
/// root with the standard prefixes bound.
fn wrap_fragment(fragment: &str) -> String {
    let without_decl = match fragment.find("?>") {
        Some(i) if fragment.trim_start().starts_with("<?xml") => &fragment[i + 2..],
        _ => fragment,
    };
    format!(
        "<rdf:RDF xmlns:rdf=\"{RDF_NS}\" xmlns:rdfs=\"{RDFS_NS}\" xmlns:owl=\"{OWL_NS}\">\n{}\n</rdf:RDF>",
        without_decl.trim()
    )
}

/// Parses the equivalence axiom for `source` out of a model answer. IRIs
/// rejected by `known` are kept and reported as warnings.
pub fn extract_mapping(
    raw: &str,
    source: &Iri,
    known: Option<&dyn Fn(&Iri) -> bool>,
) -> Result<(ComplexMapping, Vec<String>), ComposeError> {
    let located = locate_rdf(raw).ok_or_else(|| ComposeError::InvalidOutput("no XML found".into()))?;
    let (doc, subjects) = match equivalence_subjects(&located) {
        Ok(s) => (located, s),
        Err(first) => {
            let wrapped = wrap_fragment(&located);
            match equivalence_subjects(&wrapped) {
                Ok(s) => (wrapped, s),
                Err(_) => return Err(ComposeError::InvalidOutput(first.to_string())),
            }
        }
    };
    if subjects.is_empty() {
        return Err(ComposeError::MissingAxiom);
    }
    if !subjects.contains(source) {
        return Err(ComposeError::WrongSubject {
            expected: source.clone(),
            found: subjects[0].clone(),
        });
    }
    let mapping = parse_equivalence(&doc, source).map_err(|e| match e {
        OwlError::Xml { .. } => ComposeError::InvalidOutput(e.to_string()),
        other => ComposeError::Unsupported(other),
    })?;
    let mut warnings = Vec::new();
    if let Some(known) = known {
        let mut seen = Vec::new();
        for iri in mapping.expression.class_iris().into_iter().chain(mapping.expression.property_iris()) {
            if !known(iri) && !seen.contains(&iri) {
                seen.push(iri);
                warnings.push(format!("{iri} is not in the loaded vocabularies"));
            }
        }
    }
    Ok((mapping, warnings))
}
