use std::collections::BTreeMap;
use std::fmt::Write;

use super::{ClassExpression, ComplexMapping, Iri, OWL_NS, RDFS_NS, RDF_NS};

const INDENT: &str = "  ";

pub fn serialize_mapping(mapping: &ComplexMapping) -> String {
    serialize_mapping_with_labels(mapping, &BTreeMap::new())
}

/// Same as [`serialize_mapping`], with a trailing `<!-- label -->` comment on
/// every line that names a labelled entity.
pub fn serialize_mapping_with_labels(mapping: &ComplexMapping, labels: &BTreeMap<Iri, String>) -> String {
    let mut w = Writer {
        out: String::new(),
        labels,
    };
    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        w.out,
        "<rdf:RDF xmlns:rdf=\"{RDF_NS}\"\n{INDENT}xmlns:rdfs=\"{RDFS_NS}\"\n{INDENT}xmlns:owl=\"{OWL_NS}\">"
    );
    w.line(1, &format!("<owl:Class rdf:about=\"{}\">", attr(mapping.source.as_str())), Some(&mapping.source));
    w.property(2, "owl:equivalentClass", &mapping.expression);
    w.line(1, "</owl:Class>", None);
    w.out.push_str("</rdf:RDF>\n");
    w.out
}

struct Writer<'a> {
    out: String,
    labels: &'a BTreeMap<Iri, String>,
}

impl Writer<'_> {
    fn line(&mut self, depth: usize, text: &str, about: Option<&Iri>) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        if let Some(label) = about.and_then(|iri| self.labels.get(iri)) {
            let _ = write!(self.out, "\t<!-- {} -->", comment(label));
        }
        self.out.push('\n');
    }

    /// A property element whose object is a class description.
    fn property(&mut self, depth: usize, tag: &str, expr: &ClassExpression) {
        if let ClassExpression::Named(iri) = expr {
            self.line(depth, &format!("<{tag} rdf:resource=\"{}\"/>", attr(iri.as_str())), Some(iri));
            return;
        }
        self.line(depth, &format!("<{tag}>"), None);
        self.description(depth + 1, expr);
        self.line(depth, &format!("</{tag}>"), None);
    }

    fn description(&mut self, depth: usize, expr: &ClassExpression) {
        match expr {
            ClassExpression::Named(iri) => {
                self.line(depth, &format!("<rdf:Description rdf:about=\"{}\"/>", attr(iri.as_str())), Some(iri))
            }
            ClassExpression::Intersection(members) => self.collection(depth, "owl:intersectionOf", members),
            ClassExpression::Union(members) => self.collection(depth, "owl:unionOf", members),
            ClassExpression::SomeValuesFrom { property, filler } => {
                self.line(depth, "<owl:Restriction>", None);
                self.line(
                    depth + 1,
                    &format!("<owl:onProperty rdf:resource=\"{}\"/>", attr(property.as_str())),
                    Some(property),
                );
                self.property(depth + 1, "owl:someValuesFrom", filler);
                self.line(depth, "</owl:Restriction>", None);
            }
        }
    }

    fn collection(&mut self, depth: usize, tag: &str, members: &[ClassExpression]) {
        self.line(depth, "<owl:Class>", None);
        self.line(depth + 1, &format!("<{tag} rdf:parseType=\"Collection\">"), None);
        for m in members {
            self.description(depth + 2, m);
        }
        self.line(depth + 1, &format!("</{tag}>"), None);
        self.line(depth, "</owl:Class>", None);
    }
}

fn attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

// "--" may not appear inside an XML comment.
fn comment(text: &str) -> String {
    let mut s = text.replace("--", "- -");
    if s.ends_with('-') {
        s.push(' ');
    }
    s
}
