use std::io::Write;
use std::path::Path;

use parking_lot::Mutex;
use serde::Deserialize;
use serde_json::json;

use super::{ComposeError, ModelConfig, PromptMessage, Role, EXAMPLES_HEADER, SELECTED_PREFIX};
use crate::http::{InFlightLimit, JsonTransport};
use crate::owl::{parse_first_equivalence, serialize_mapping, ClassExpression, ComplexMapping, Iri};
use crate::patterns::is_excluded;

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub content: String,
    /// HTTP attempts spent on this completion.
    pub attempts: u32,
}

pub trait ChatModel: Send + Sync {
    fn complete(&self, messages: &[PromptMessage]) -> Result<Completion, ComposeError>;
}

/// Line-delimited log of raw requests and responses, shared across threads.
pub struct AuditLog {
    out: Mutex<Box<dyn Write + Send>>,
}

impl AuditLog {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        AuditLog { out: Mutex::new(out) }
    }

    pub fn create(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self::new(Box::new(file)))
    }

    pub fn record(&self, entry: &serde_json::Value) -> std::io::Result<()> {
        let line = serde_json::to_string(entry)?;
        let mut out = self.out.lock();
        writeln!(out, "{line}")?;
        out.flush()
    }
}

/// OpenAI-compatible chat-completions client.
pub struct ChatClient<T: JsonTransport> {
    transport: T,
    config: ModelConfig,
    limit: InFlightLimit,
    audit: Option<AuditLog>,
}

impl<T: JsonTransport> ChatClient<T> {
    pub fn new(transport: T, config: ModelConfig) -> Result<Self, ComposeError> {
        config.validate()?;
        Ok(ChatClient {
            transport,
            limit: InFlightLimit::new(config.max_in_flight),
            config,
            audit: None,
        })
    }

    pub fn with_audit(mut self, audit: AuditLog) -> Self {
        self.audit = Some(audit);
        self
    }

    pub fn request_body(&self, messages: &[PromptMessage]) -> serde_json::Value {
        json!({
            "model": self.config.model_name,
            "messages": messages,
            "seed": self.config.seed,
            "temperature": self.config.temperature,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

impl<T: JsonTransport> ChatModel for ChatClient<T> {
    fn complete(&self, messages: &[PromptMessage]) -> Result<Completion, ComposeError> {
        let body = self.request_body(messages);
        let (result, attempts) = self.config.retry_policy().run(|| {
            let _permit = self.limit.acquire();
            self.transport.post(&body)
        });
        if let Some(audit) = &self.audit {
            let outcome = match &result {
                Ok(text) => json!({ "response": text }),
                Err(e) => json!({ "error": e.to_string() }),
            };
            audit.record(&json!({ "request": body, "attempts": attempts, "outcome": outcome }))?;
        }
        let text = result.map_err(|source| ComposeError::Transport { attempts, source })?;
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| ComposeError::BadResponse(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ComposeError::BadResponse("response has no choices".into()))?;
        Ok(Completion { content, attempts })
    }
}

/// Offline stand-in for the language model.
///
/// With examples in the prompt it returns the first example with its class
/// slots (document order, relations and the modifier class left alone)
/// filled by the selected classes in order, reusing the last one when the
/// example has more slots. Without examples it intersects the selected
/// classes; with neither it answers a fixed skeleton.
#[derive(Debug, Default)]
pub struct MockModel {
    audit: Option<Mutex<Vec<Vec<PromptMessage>>>>,
}

pub const MOCK_SKELETON_PROPERTY: &str = "http://purl.obolibrary.org/obo/BFO_0000051";
pub const MOCK_SKELETON_FILLER: &str = "http://purl.obolibrary.org/obo/PATO_0000001";

impl MockModel {
    pub fn new() -> Self {
        MockModel::default()
    }

    /// Keeps every prompt received, for inspection.
    pub fn recording() -> Self {
        MockModel {
            audit: Some(Mutex::new(Vec::new())),
        }
    }

    pub fn prompts(&self) -> Vec<Vec<PromptMessage>> {
        self.audit.as_ref().map(|a| a.lock().clone()).unwrap_or_default()
    }

    pub fn answer(request: &str) -> Result<String, ComposeError> {
        let source = request_source(request)
            .ok_or_else(|| ComposeError::BadResponse("mock: prompt names no source class".into()))?;
        let selected = selected_iris(request);
        let example = first_example(request);

        let expression = match (example, selected.is_empty()) {
            (Some(example), _) => {
                let mut slot = 0usize;
                example.expression.map_classes(&mut |iri| {
                    if is_excluded(iri) || selected.is_empty() {
                        return iri.clone();
                    }
                    let pick = selected[slot.min(selected.len() - 1)].clone();
                    slot += 1;
                    pick
                })
            }
            (None, false) if selected.len() == 1 => ClassExpression::Named(selected[0].clone()),
            (None, false) => ClassExpression::Intersection(selected.into_iter().map(ClassExpression::Named).collect()),
            (None, true) => ClassExpression::some(skeleton(MOCK_SKELETON_PROPERTY), ClassExpression::Named(skeleton(MOCK_SKELETON_FILLER))),
        };
        let mapping = ComplexMapping::new(source.clone(), expression)
            .or_else(|_| {
                ComplexMapping::new(
                    source,
                    ClassExpression::some(skeleton(MOCK_SKELETON_PROPERTY), ClassExpression::Named(skeleton(MOCK_SKELETON_FILLER))),
                )
            })
            .map_err(|e| ComposeError::BadResponse(e.to_string()))?;
        Ok(serialize_mapping(&mapping))
    }
}

fn skeleton(iri: &str) -> Iri {
    Iri::new(iri).expect("constant IRI")
}

impl ChatModel for MockModel {
    fn complete(&self, messages: &[PromptMessage]) -> Result<Completion, ComposeError> {
        if let Some(audit) = &self.audit {
            audit.lock().push(messages.to_vec());
        }
        let request = messages
            .iter()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| ComposeError::BadResponse("mock: no user message".into()))?;
        Ok(Completion {
            content: Self::answer(&request.content)?,
            attempts: 1,
        })
    }
}

fn request_source(request: &str) -> Option<Iri> {
    let marker = "for the class ";
    let start = request.find(marker)? + marker.len();
    let rest = &request[start..];
    let end = rest.find(' ').unwrap_or(rest.len());
    Iri::new(&rest[..end]).ok()
}

fn selected_iris(request: &str) -> Vec<Iri> {
    let Some(line) = request.lines().find(|l| l.starts_with(SELECTED_PREFIX)) else {
        return Vec::new();
    };
    // Entries are "IRI (label)" joined by ", ": an IRI is the first word or
    // a word right after a closing "),".
    let mut out = Vec::new();
    let mut boundary = true;
    for word in line[SELECTED_PREFIX.len()..].split(' ') {
        if boundary {
            if let Ok(iri) = Iri::new(word) {
                out.push(iri);
            }
        }
        boundary = word.ends_with("),");
    }
    out
}

fn first_example(request: &str) -> Option<ComplexMapping> {
    let after = &request[request.find(EXAMPLES_HEADER)? + EXAMPLES_HEADER.len()..];
    let start = after.find('<')?;
    let doc = &after[start..];
    let end = doc.find("</rdf:RDF>")? + "</rdf:RDF>".len();
    parse_first_equivalence(&doc[..end]).ok()
}
