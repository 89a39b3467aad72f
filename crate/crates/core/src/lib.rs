//! Generation and evaluation of complex multi-ontology equivalence mappings:
//! OWL model, weighted vocabularies, candidate selection, example patterns,
//! prompt composition and reference-based metrics.

pub mod compose;
pub mod eval;
pub mod http;
pub mod owl;
pub mod patterns;
pub mod selection;
pub mod vocabulary;

pub use owl::{ClassExpression, ComplexMapping, Iri, Ontology};
pub use vocabulary::{Vocabulary, VocabularyKind, WeightedName};
