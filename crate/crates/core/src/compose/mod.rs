//! Prompt assembly, chat-model access and extraction of the returned OWL.

mod client;
mod extract;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::HttpFailure;
use crate::owl::{ComplexMapping, Iri, OwlError};
use crate::patterns::MappingExample;

pub use client::{AuditLog, ChatClient, ChatModel, Completion, MockModel};
pub use extract::{extract_mapping, locate_rdf};

pub const SYSTEM_MESSAGE: &str = "You will receive a request to construct a complex mapping in OWL format. You have to answer with an ontology in OWL format that can be read by rdflib, no explanations. Make sure to use an equivalentClass statement.";
pub const PROPERTY_REQUIREMENT: &str =
    "You are only allowed to use properties from the Relation Ontology (RO) and the Basic Formal Ontology (BFO).";
pub const CORRECTIVE_REQUEST: &str = "Your previous answer could not be used";
const EXAMPLES_HEADER: &str = "This is a list of possible equivalentClass examples for complex mappings: ";
const SELECTED_PREFIX: &str = "You should use the following classes: ";
const SELECTED_SUFFIX: &str = " and any others you find necessary to match the appropriate pattern in the examples.";

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("no answer after {attempts} attempt(s)")]
    Transport {
        attempts: u32,
        #[source]
        source: HttpFailure,
    },
    #[error("malformed model endpoint response: {0}")]
    BadResponse(String),
    #[error("model configuration: {0}")]
    Config(String),
    #[error("no parseable RDF/XML in model output: {0}")]
    InvalidOutput(String),
    #[error("model output has no equivalentClass axiom")]
    MissingAxiom,
    #[error("model output defines {found} instead of {expected}")]
    WrongSubject { expected: Iri, found: Iri },
    #[error("model output uses an unsupported expression: {0}")]
    Unsupported(OwlError),
    #[error("audit log: {0}")]
    Audit(#[from] std::io::Error),
}

impl ComposeError {
    /// Failures of the model output itself, as opposed to the endpoint.
    pub fn is_output_error(&self) -> bool {
        matches!(
            self,
            ComposeError::InvalidOutput(_)
                | ComposeError::MissingAxiom
                | ComposeError::WrongSubject { .. }
                | ComposeError::Unsupported(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMessage {
    pub role: Role,
    pub content: String,
}

impl PromptMessage {
    pub fn system(content: impl Into<String>) -> Self {
        PromptMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        PromptMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        PromptMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptVariant {
    Full,
    NoExamples,
    NoClasses,
    LmBaseline,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 4] = [
        PromptVariant::Full,
        PromptVariant::NoExamples,
        PromptVariant::NoClasses,
        PromptVariant::LmBaseline,
    ];

    pub fn uses_classes(self) -> bool {
        matches!(self, PromptVariant::Full | PromptVariant::NoExamples)
    }

    pub fn uses_examples(self) -> bool {
        matches!(self, PromptVariant::Full | PromptVariant::NoClasses)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Full => "full",
            PromptVariant::NoExamples => "no-examples",
            PromptVariant::NoClasses => "no-classes",
            PromptVariant::LmBaseline => "lm-baseline",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "full" => Ok(PromptVariant::Full),
            "no-examples" => Ok(PromptVariant::NoExamples),
            "no-classes" => Ok(PromptVariant::NoClasses),
            "lm-baseline" => Ok(PromptVariant::LmBaseline),
            other => Err(format!(
                "unknown variant {other:?}; expected full, no-examples, no-classes or lm-baseline"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExcerptKind {
    InitialRequest,
    SelectedClasses,
    Examples,
    PropertyRequirement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptExcerpt {
    pub kind: ExcerptKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub messages: Vec<PromptMessage>,
    pub excerpts: Vec<PromptExcerpt>,
    pub warnings: Vec<String>,
}

/// An IRI with the label shown next to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledClass {
    pub iri: Iri,
    pub label: String,
}

impl LabeledClass {
    pub fn new(iri: Iri, label: impl Into<String>) -> Self {
        LabeledClass {
            iri,
            label: label.into(),
        }
    }
}

/// Builds the system message and the user request for one source class.
/// Inputs the variant does not use are ignored.
pub fn build_prompt(
    source: &LabeledClass,
    selected: &[LabeledClass],
    examples: &[&MappingExample],
    variant: PromptVariant,
) -> Prompt {
    let mut warnings = Vec::new();
    let mut with_examples = variant.uses_examples();
    if with_examples && examples.is_empty() {
        warnings.push(format!(
            "{}: no matching examples; falling back to the request without examples",
            source.iri
        ));
        with_examples = false;
    }
    let mut with_classes = variant.uses_classes();
    if with_classes && selected.is_empty() {
        warnings.push(format!("{}: no selected classes; excerpt omitted", source.iri));
        with_classes = false;
    }

    let mut excerpts = Vec::new();
    let mut request = format!(
        "Create a complex mapping in OWL format for the class {} ({})",
        source.iri, source.label
    );
    if with_examples {
        request.push_str(" according to the examples provided");
    }
    request.push('.');
    excerpts.push(PromptExcerpt {
        kind: ExcerptKind::InitialRequest,
        text: request,
    });
    if with_classes {
        let list: Vec<String> = selected.iter().map(|c| format!("{} ({})", c.iri, c.label)).collect();
        excerpts.push(PromptExcerpt {
            kind: ExcerptKind::SelectedClasses,
            text: format!("{SELECTED_PREFIX}{}{SELECTED_SUFFIX}", list.join(", ")),
        });
    }
    if with_examples {
        let bodies: Vec<&str> = examples.iter().map(|e| e.owl_text.trim_end()).collect();
        excerpts.push(PromptExcerpt {
            kind: ExcerptKind::Examples,
            text: format!("{EXAMPLES_HEADER}\n{}\n.", bodies.join("\n\n")),
        });
    }
    excerpts.push(PromptExcerpt {
        kind: ExcerptKind::PropertyRequirement,
        text: PROPERTY_REQUIREMENT.to_string(),
    });

    let user: Vec<&str> = excerpts.iter().map(|e| e.text.as_str()).collect();
    Prompt {
        messages: vec![PromptMessage::system(SYSTEM_MESSAGE), PromptMessage::user(user.join("\n"))],
        excerpts,
        warnings,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub model_name: String,
    pub seed: i64,
    pub temperature: f64,
    /// Base URL of an OpenAI-compatible API.
    pub endpoint: String,
    pub max_attempts: u32,
    pub max_in_flight: usize,
    /// Environment variable holding the bearer credential.
    pub api_key_env: String,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model_name: "gpt-4o-mini".into(),
            seed: 42,
            temperature: 0.0,
            endpoint: "https://api.openai.com/v1".into(),
            max_attempts: 3,
            max_in_flight: 4,
            api_key_env: "OPENAI_API_KEY".into(),
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
            timeout_secs: 120,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ComposeError> {
        if self.max_attempts == 0 || self.max_in_flight == 0 {
            return Err(ComposeError::Config("max_attempts and max_in_flight must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ComposeError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.model_name.trim().is_empty() {
            return Err(ComposeError::Config("empty model name".into()));
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> crate::http::RetryPolicy {
        crate::http::RetryPolicy {
            max_attempts: self.max_attempts,
            initial_backoff: std::time::Duration::from_millis(self.initial_backoff_ms),
            max_backoff: std::time::Duration::from_millis(self.max_backoff_ms),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationResult {
    pub raw_text: String,
    pub parsed: Option<ComplexMapping>,
    /// Model completions requested (the initial one plus any corrective
    /// re-prompt).
    pub attempts: u32,
    pub warnings: Vec<String>,
    /// Why extraction failed, when it did.
    pub failure: Option<String>,
}

/// Prompt, complete, extract; on an unusable answer, re-ask once with the
/// failure appended.
pub fn generate_mapping(
    model: &dyn ChatModel,
    source: &LabeledClass,
    selected: &[LabeledClass],
    examples: &[&MappingExample],
    variant: PromptVariant,
    known: Option<&dyn Fn(&Iri) -> bool>,
) -> Result<GenerationResult, ComposeError> {
    let prompt = build_prompt(source, selected, examples, variant);
    let mut warnings = prompt.warnings;
    let mut messages = prompt.messages;

    let first = model.complete(&messages)?;
    let error = match extract_mapping(&first.content, &source.iri, known) {
        Ok((mapping, w)) => {
            warnings.extend(w);
            return Ok(GenerationResult {
                raw_text: first.content,
                parsed: Some(mapping),
                attempts: 1,
                warnings,
                failure: None,
            });
        }
        Err(e) if e.is_output_error() => e,
        Err(e) => return Err(e),
    };

    warnings.push(format!("first answer rejected: {error}"));
    messages.push(PromptMessage::assistant(first.content));
    messages.push(PromptMessage::user(format!(
        "{CORRECTIVE_REQUEST} ({error}). Please answer with an ontology in OWL format only, containing one equivalentClass statement for {}.",
        source.iri
    )));
    let second = model.complete(&messages)?;
    match extract_mapping(&second.content, &source.iri, known) {
        Ok((mapping, w)) => {
            warnings.extend(w);
            Ok(GenerationResult {
                raw_text: second.content,
                parsed: Some(mapping),
                attempts: 2,
                warnings,
                failure: None,
            })
        }
        Err(e) if e.is_output_error() => Ok(GenerationResult {
            raw_text: second.content,
            parsed: None,
            attempts: 2,
            warnings,
            failure: Some(e.to_string()),
        }),
        Err(e) => Err(e),
    }
}
