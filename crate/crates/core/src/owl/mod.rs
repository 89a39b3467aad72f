//! OWL subset used by logical definitions: named classes with labels and
//! asserted subclass axioms, plus `equivalentClass` expressions built from
//! intersections, unions and existential restrictions.

mod manchester;
mod parse;
mod serialize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manchester::to_manchester;
pub use parse::{
    equivalence_subjects, parse_equivalence, parse_first_equivalence, parse_ontology,
    parse_ontology_with, ParseOptions,
};
pub use serialize::{serialize_mapping, serialize_mapping_with_labels};

pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";
pub const OBO_IN_OWL_NS: &str = "http://www.geneontology.org/formats/oboInOwl#";
pub const CHEBI_FORMULA: &str = "http://purl.obolibrary.org/obo/chebi/formula";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OwlError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("invalid IRI {0:?}: expected an absolute IRI containing \"://\"")]
    InvalidIri(String),
    #[error("unsupported OWL construct {construct} at line {line}")]
    UnsupportedConstruct { construct: String, line: u32 },
    #[error("malformed class expression at line {line}: {message}")]
    MalformedExpression { line: u32, message: String },
    #[error("no equivalentClass axiom found for {0}")]
    MissingEquivalence(String),
    #[error("{count} equivalentClass axioms found for {iri}; expected exactly one")]
    MultipleEquivalences { iri: String, count: usize },
    #[error("mapping source {0} appears inside its own expression")]
    SelfReference(String),
}

/// Absolute IRI. Surrounding whitespace is trimmed on construction and
/// comparison is exact byte equality afterwards.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl AsRef<str>) -> Result<Self, OwlError> {
        let trimmed = value.as_ref().trim();
        match trimmed.find("://") {
            Some(pos) if pos > 0 && trimmed.len() > pos + 3 => Ok(Iri(trimmed.to_string())),
            _ => Err(OwlError::InvalidIri(value.as_ref().to_string())),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Text after the last '/' or '#'.
    pub fn fragment(&self) -> &str {
        match self.0.rfind(['/', '#']) {
            Some(pos) => &self.0[pos + 1..],
            None => &self.0,
        }
    }

    /// Lexical local name derived from the fragment, with '_' read as a space.
    /// OBO-style identifiers (`UBERON_0000178`, `0000178`) carry no lexical
    /// content and yield `None`.
    pub fn local_name(&self) -> Option<String> {
        let fragment = self.fragment();
        if fragment.is_empty() || is_numeric_identifier(fragment) {
            return None;
        }
        let name = fragment.replace('_', " ");
        if name.trim().is_empty() {
            None
        } else {
            Some(name)
        }
    }
}

fn is_numeric_identifier(fragment: &str) -> bool {
    let digits = match fragment.split_once('_') {
        Some((prefix, rest)) if prefix.chars().all(|c| c.is_ascii_alphabetic()) => rest,
        _ => fragment,
    };
    !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit())
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Iri {
    type Error = OwlError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> Self {
        iri.0
    }
}

impl std::str::FromStr for Iri {
    type Err = OwlError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Iri::new(s)
    }
}

/// Where an extracted class name came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelProvenance {
    LocalName,
    Label,
    ExactSynonym,
    InternalSynonym,
    OtherSynonym,
    ExternalSynonym,
    Formula,
}

impl LabelProvenance {
    pub const ALL: [LabelProvenance; 7] = [
        LabelProvenance::LocalName,
        LabelProvenance::Label,
        LabelProvenance::ExactSynonym,
        LabelProvenance::InternalSynonym,
        LabelProvenance::OtherSynonym,
        LabelProvenance::ExternalSynonym,
        LabelProvenance::Formula,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct OntologyClass {
    pub iri: Iri,
    pub names: Vec<(String, LabelProvenance)>,
    pub direct_superclasses: BTreeSet<Iri>,
    pub direct_subclasses: BTreeSet<Iri>,
    /// Supported `equivalentClass` expressions asserted on this class.
    pub equivalent_to: Vec<ClassExpression>,
}

impl OntologyClass {
    pub fn new(iri: Iri) -> Self {
        OntologyClass {
            iri,
            names: Vec::new(),
            direct_superclasses: BTreeSet::new(),
            direct_subclasses: BTreeSet::new(),
            equivalent_to: Vec::new(),
        }
    }

    /// First `rdfs:label`, falling back to the first name of any kind.
    pub fn main_label(&self) -> Option<&str> {
        self.names
            .iter()
            .find(|(_, p)| *p == LabelProvenance::Label)
            .or_else(|| self.names.first())
            .map(|(text, _)| text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ontology {
    pub namespace_tag: String,
    pub classes: BTreeMap<Iri, OntologyClass>,
    /// Non-fatal problems met while parsing (skipped classes, unsupported
    /// equivalence axioms).
    pub warnings: Vec<String>,
}

impl Ontology {
    pub fn total_class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn get(&self, iri: &Iri) -> Option<&OntologyClass> {
        self.classes.get(iri)
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.namespace_tag = tag.into();
        self
    }

    pub fn labels(&self) -> BTreeMap<Iri, String> {
        self.classes
            .values()
            .filter_map(|c| c.main_label().map(|l| (c.iri.clone(), l.to_string())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClassExpression {
    Named(Iri),
    Intersection(Vec<ClassExpression>),
    Union(Vec<ClassExpression>),
    SomeValuesFrom {
        property: Iri,
        filler: Box<ClassExpression>,
    },
}

impl ClassExpression {
    pub fn named(iri: Iri) -> Self {
        ClassExpression::Named(iri)
    }

    pub fn some(property: Iri, filler: ClassExpression) -> Self {
        ClassExpression::SomeValuesFrom {
            property,
            filler: Box::new(filler),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, ClassExpression::Named(_))
    }

    /// Named class IRIs in document order (property IRIs excluded).
    pub fn class_iris(&self) -> Vec<&Iri> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ClassExpression::Named(iri) = e {
                out.push(iri);
            }
        });
        out
    }

    pub fn property_iris(&self) -> Vec<&Iri> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ClassExpression::SomeValuesFrom { property, .. } = e {
                out.push(property);
            }
        });
        out
    }

    pub fn mentions(&self, iri: &Iri) -> bool {
        let mut found = false;
        self.walk(&mut |e| match e {
            ClassExpression::Named(i) if i == iri => found = true,
            ClassExpression::SomeValuesFrom { property, .. } if property == iri => found = true,
            _ => {}
        });
        found
    }

    pub fn depth(&self) -> usize {
        match self {
            ClassExpression::Named(_) => 1,
            ClassExpression::Intersection(ms) | ClassExpression::Union(ms) => {
                1 + ms.iter().map(|m| m.depth()).max().unwrap_or(0)
            }
            ClassExpression::SomeValuesFrom { filler, .. } => 1 + filler.depth(),
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a ClassExpression)) {
        visit(self);
        match self {
            ClassExpression::Named(_) => {}
            ClassExpression::Intersection(ms) | ClassExpression::Union(ms) => {
                for m in ms {
                    m.walk(visit);
                }
            }
            ClassExpression::SomeValuesFrom { filler, .. } => filler.walk(visit),
        }
    }

    /// Rebuilds the tree with every named class passed through `f`, in
    /// document order. Property IRIs are left untouched.
    pub fn map_classes(&self, f: &mut impl FnMut(&Iri) -> Iri) -> ClassExpression {
        match self {
            ClassExpression::Named(iri) => ClassExpression::Named(f(iri)),
            ClassExpression::Intersection(ms) => {
                ClassExpression::Intersection(ms.iter().map(|m| m.map_classes(f)).collect())
            }
            ClassExpression::Union(ms) => {
                ClassExpression::Union(ms.iter().map(|m| m.map_classes(f)).collect())
            }
            ClassExpression::SomeValuesFrom { property, filler } => ClassExpression::SomeValuesFrom {
                property: property.clone(),
                filler: Box::new(filler.map_classes(f)),
            },
        }
    }
}

/// `source ≡ expression`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMapping {
    pub source: Iri,
    pub expression: ClassExpression,
    pub confidence: Option<f64>,
}

impl ComplexMapping {
    pub const RELATION: &'static str = "equivalence";

    pub fn new(source: Iri, expression: ClassExpression) -> Result<Self, OwlError> {
        if expression.mentions(&source) {
            return Err(OwlError::SelfReference(source.to_string()));
        }
        Ok(ComplexMapping {
            source,
            expression,
            confidence: None,
        })
    }

    pub fn relation(&self) -> &'static str {
        Self::RELATION
    }

    /// Structural equality that ignores the confidence value.
    pub fn same_structure(&self, other: &ComplexMapping) -> bool {
        self.source == other.source && self.expression == other.expression
    }
}
