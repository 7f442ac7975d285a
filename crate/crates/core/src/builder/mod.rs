//! Turns dialogue samples into prompt/target training records.
//!
//! A record's input is the rendered prompt over the dialogue history up to
//! the query turn. Its target is the slot value, optionally followed by the
//! coarse explanation: the utterance pairs of the turns where the slot changed.

mod prompt;
mod target;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chains::{extract_chain, is_active, SlotChain};
use crate::corpus::{Corpus, Dialogue, Split};
use crate::evaluator::NONE_VALUE;
use crate::{Error, Result};

pub use prompt::{
    build_question, render_history, render_prompt, PromptTemplate, QuestionOverrides, CHOICES, DEFAULT_TEMPLATE,
    DOMAIN, HISTORY, QUESTION,
};
pub use target::{parse_generation, render_target, TARGET_SEPARATOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationKind {
    Coarse,
    Refined,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleMeta {
    pub dialogue_id: String,
    pub split: Split,
    pub query_turn: usize,
    pub slot_id: String,
    pub step_count: usize,
    pub dialogue_turns: usize,
    pub avg_utterance_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoTExample {
    pub example_id: String,
    pub input_text: String,
    pub target_value: String,
    pub explanation: String,
    pub explanation_kind: ExplanationKind,
    pub meta: ExampleMeta,
}

impl CoTExample {
    pub fn target_text(&self) -> String {
        render_target(&self.target_value, &self.explanation)
    }
}

pub fn example_id(dialogue_id: &str, turn: usize, slot_id: &str) -> String {
    format!("{dialogue_id}:{turn}:{slot_id}")
}

/// Chronological `system: .. user: ..` pairs of the chain's change turns.
pub fn build_coarse_explanation(chain: &SlotChain, dialogue: &Dialogue) -> Result<String> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if chain.dialogue_id != dialogue.dialogue_id {
        return Err(Error::Validation(format!(
            "chain of `{}` applied to dialogue `{}`",
            chain.dialogue_id, dialogue.dialogue_id
        )));
    }
    let mut turns = chain.change_turns.clone();
    turns.sort_unstable();
    let pairs = turns
        .into_iter()
        .map(|i| {
            let t = dialogue.turn(i)?;
            Ok(prompt::render_pair(&t.system_utterance, &t.user_utterance))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub include_explanations: bool,
    pub include_inactive: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            include_explanations: true,
            include_inactive: false,
        }
    }
}

/// One record per (dialogue, turn, slot), ordered by dialogue id, turn, then
/// slot id. Inactive slots are emitted with target `none` only when
/// `include_inactive` is set.
pub fn build_dataset(
    corpus: &Corpus,
    template: &PromptTemplate,
    overrides: &QuestionOverrides,
    options: BuildOptions,
) -> Result<Vec<CoTExample>> {
    let schema = corpus.schema();
    let mut dialogues: Vec<&Dialogue> = corpus.dialogues().iter().collect();
    dialogues.sort_by(|a, b| a.dialogue_id.cmp(&b.dialogue_id));
    let slot_ids = schema.sorted_slot_ids();

    let mut out = Vec::new();
    for dialogue in dialogues {
        let avg_len = dialogue.avg_utterance_len();
        for turn in 1..=dialogue.n_turns() {
            for &slot_id in &slot_ids {
                let active = is_active(dialogue, turn, slot_id);
                if !active && !options.include_inactive {
                    continue;
                }
                let slot = schema.slot(slot_id).expect("slot from schema");
                let chain = extract_chain(dialogue, schema, slot_id, turn)?;
                let (target_value, explanation, kind) = if active {
                    let value = dialogue.turns[turn - 1].gold_state[slot_id].clone();
                    if options.include_explanations {
                        let e = build_coarse_explanation(&chain, dialogue)?;
                        (value, e, ExplanationKind::Coarse)
                    } else {
                        (value, String::new(), ExplanationKind::None)
                    }
                } else {
                    (NONE_VALUE.to_string(), String::new(), ExplanationKind::None)
                };
                out.push(CoTExample {
                    example_id: example_id(&dialogue.dialogue_id, turn, slot_id),
                    input_text: render_prompt(dialogue, turn, slot, template, overrides)?,
                    target_value,
                    explanation,
                    explanation_kind: kind,
                    meta: ExampleMeta {
                        dialogue_id: dialogue.dialogue_id.clone(),
                        split: dialogue.split,
                        query_turn: turn,
                        slot_id: slot_id.to_string(),
                        step_count: chain.change_turns.len(),
                        dialogue_turns: dialogue.n_turns(),
                        avg_utterance_len: avg_len,
                    },
                });
            }
        }
    }
    Ok(out)
}

pub fn write_examples<W: Write>(mut writer: W, examples: &[CoTExample]) -> std::io::Result<()> {
    for e in examples {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_examples(path: impl AsRef<Path>) -> Result<Vec<CoTExample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let example =
            serde_json::from_str(&line).map_err(|e| Error::format(format!("{}:{}", path.display(), i + 1), e))?;
        out.push(example);
    }
    Ok(out)
}
