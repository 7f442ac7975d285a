use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::io::{parse_json, read_to_string};
use crate::corpus::{Dialogue, Schema, SlotSchema};
use crate::evaluator::NONE_VALUE;
use crate::{Error, Result};

pub const HISTORY: &str = "[History]";
pub const DOMAIN: &str = "[Domain]";
pub const QUESTION: &str = "[Question]";
pub const CHOICES: &str = "[Choices]";

pub const DEFAULT_TEMPLATE: &str = "Dialogue: [History] Domain: [Domain] Question: [Question] [Choices]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    template_text: String,
    choices_section_marker: String,
}

impl PromptTemplate {
    pub fn new(template_text: impl Into<String>) -> Result<Self> {
        let template_text = template_text.into();
        for (marker, max) in [(HISTORY, Some(1)), (QUESTION, Some(1)), (CHOICES, None)] {
            let n = template_text.matches(marker).count();
            let ok = match max {
                Some(exact) => n == exact,
                None => n <= 1,
            };
            if !ok {
                return Err(Error::InvalidTemplate(format!("`{marker}` occurs {n} times")));
            }
        }
        Ok(Self {
            template_text,
            choices_section_marker: "Choices".to_string(),
        })
    }

    /// Template text from a file; one trailing newline is ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = read_to_string(path.as_ref())?;
        Self::new(text.strip_suffix('\n').unwrap_or(&text))
    }

    pub fn text(&self) -> &str {
        &self.template_text
    }

    pub fn choices_section_marker(&self) -> &str {
        &self.choices_section_marker
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::new(DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

/// Hand-written questions that replace the generated ones, keyed by slot id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuestionOverrides(BTreeMap<String, String>);

impl QuestionOverrides {
    pub fn new(map: BTreeMap<String, String>, schema: &Schema) -> Result<Self> {
        if let Some(unknown) = map.keys().find(|k| !schema.contains(k)) {
            return Err(Error::UnknownSlot(unknown.clone()));
        }
        Ok(Self(map))
    }

    pub fn from_file(path: impl AsRef<Path>, schema: &Schema) -> Result<Self> {
        let path = path.as_ref();
        let map = parse_json(&read_to_string(path)?, &path.display().to_string())?;
        Self::new(map, schema)
    }

    pub fn get(&self, slot_id: &str) -> Option<&str> {
        self.0.get(slot_id).map(String::as_str)
    }
}

pub fn build_question(slot: &SlotSchema, overrides: &QuestionOverrides) -> String {
    if let Some(q) = overrides.get(&slot.slot_id) {
        return q.to_string();
    }
    let description = slot.description.trim();
    let description = description.strip_suffix('.').unwrap_or(description).trim_end();
    if description.ends_with('?') {
        format!("What's {description}")
    } else {
        format!("What's {description}?")
    }
}

/// `"system: <a>"`; the tag stands alone when the utterance is empty.
pub(crate) fn speaker_line(tag: &str, utterance: &str) -> String {
    let utterance = utterance.trim();
    if utterance.is_empty() {
        format!("{tag}:")
    } else {
        format!("{tag}: {utterance}")
    }
}

pub(crate) fn render_pair(system: &str, user: &str) -> String {
    format!("{} {}", speaker_line("system", system), speaker_line("user", user))
}

pub fn render_history(dialogue: &Dialogue, query_turn: usize) -> Result<String> {
    dialogue.turn(query_turn)?;
    Ok(dialogue.turns[..query_turn]
        .iter()
        .map(|t| render_pair(&t.system_utterance, &t.user_utterance))
        .collect::<Vec<_>>()
        .join(" "))
}

pub fn render_prompt(
    dialogue: &Dialogue,
    query_turn: usize,
    slot: &SlotSchema,
    template: &PromptTemplate,
    overrides: &QuestionOverrides,
) -> Result<String> {
    let history = render_history(dialogue, query_turn)?;
    let question = build_question(slot, overrides);
    let mut text = template
        .text()
        .replace(HISTORY, &history)
        .replace(QUESTION, &question)
        .replace(DOMAIN, &slot.domain);
    match &slot.possible_values {
        Some(values) => {
            let mut choices: Vec<&str> = values.iter().map(String::as_str).collect();
            choices.push(NONE_VALUE);
            let block = format!("{}: {}", template.choices_section_marker(), choices.join(", "));
            text = text.replace(CHOICES, &block);
        }
        None => {
            text = if text.contains(&format!(" {CHOICES}")) {
                text.replace(&format!(" {CHOICES}"), "")
            } else {
                text.replace(CHOICES, "")
            };
        }
    }
    Ok(text)
}
