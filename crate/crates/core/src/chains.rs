//! Per-slot reasoning chains: the turns at which a slot's value changed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dialogue, Schema, Split};
use crate::evaluator::{Normalizer, NONE_VALUE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotChain {
    pub dialogue_id: String,
    pub slot_id: String,
    pub query_turn: usize,
    pub change_turns: Vec<usize>,
    /// Value after each change; [`NONE_VALUE`] marks a deletion.
    pub values: Vec<String>,
}

impl SlotChain {
    pub fn is_empty(&self) -> bool {
        self.change_turns.is_empty()
    }
}

pub fn reasoning_steps(chain: &SlotChain) -> usize {
    chain.change_turns.len()
}

/// Value of `slot_id` after turn `i` as seen by change detection: the
/// normalized value, with `none` aliases read as absent.
fn effective_value(dialogue: &Dialogue, turn: usize, slot_id: &str) -> Option<(String, String)> {
    let raw = dialogue.turns[turn - 1].gold_state.get(slot_id)?;
    let norm = Normalizer::default_policy().normalize(raw);
    (norm != NONE_VALUE).then(|| (norm, raw.clone()))
}

/// Every change of one slot over the whole dialogue, as `(turn, value)`.
/// Chains at any query turn are prefixes of this list.
pub fn slot_changes(dialogue: &Dialogue, slot_id: &str) -> Vec<(usize, String)> {
    let mut changes = Vec::new();
    let mut previous: Option<String> = None;
    for turn in 1..=dialogue.n_turns() {
        let current = effective_value(dialogue, turn, slot_id);
        let current_norm = current.as_ref().map(|(n, _)| n.clone());
        if current_norm != previous {
            let value = current.map_or_else(|| NONE_VALUE.to_string(), |(_, raw)| raw);
            changes.push((turn, value));
        }
        previous = current_norm;
    }
    changes
}

pub fn extract_chain(dialogue: &Dialogue, schema: &Schema, slot_id: &str, query_turn: usize) -> Result<SlotChain> {
    if !schema.contains(slot_id) {
        return Err(Error::UnknownSlot(slot_id.to_string()));
    }
    dialogue.turn(query_turn)?;
    let (change_turns, values) = slot_changes(dialogue, slot_id)
        .into_iter()
        .take_while(|(t, _)| *t <= query_turn)
        .unzip();
    Ok(SlotChain {
        dialogue_id: dialogue.dialogue_id.clone(),
        slot_id: slot_id.to_string(),
        query_turn,
        change_turns,
        values,
    })
}

/// Step counts of every schema slot at every turn of one dialogue, indexed
/// `[turn - 1][slot position in schema]`.
pub(crate) fn step_table(dialogue: &Dialogue, schema: &Schema) -> Vec<Vec<usize>> {
    let n = dialogue.n_turns();
    let mut table = vec![vec![0; schema.len()]; n];
    for (col, slot) in schema.slots().iter().enumerate() {
        let changes = slot_changes(dialogue, &slot.slot_id);
        let mut steps = 0;
        let mut next = changes.iter().peekable();
        for turn in 1..=n {
            while next.peek().is_some_and(|(t, _)| *t == turn) {
                steps += 1;
                next.next();
            }
            table[turn - 1][col] = steps;
        }
    }
    table
}

/// Whether the slot carries a (non-`none`) value at `turn`.
pub(crate) fn is_active(dialogue: &Dialogue, turn: usize, slot_id: &str) -> bool {
    effective_value(dialogue, turn, slot_id).is_some()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepHistogram {
    pub counts: BTreeMap<usize, usize>,
    pub total_active: usize,
}

impl StepHistogram {
    pub fn add(&mut self, steps: usize) {
        debug_assert!(steps >= 1);
        *self.counts.entry(steps).or_default() += 1;
        self.total_active += 1;
    }

    pub fn merge(&mut self, other: &StepHistogram) {
        for (&k, &v) in &other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        self.total_active += other.total_active;
    }

    /// Share of samples needing at least `min_steps` steps; 0 when empty.
    pub fn fraction_at_least(&self, min_steps: usize) -> f64 {
        if self.total_active == 0 {
            return 0.0;
        }
        let n: usize = self.counts.range(min_steps..).map(|(_, v)| v).sum();
        n as f64 / self.total_active as f64
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:>6}  {:>10}  {:>8}", "step", "samples", "percent").unwrap();
        for (step, count) in &self.counts {
            let pct = 100.0 * *count as f64 / self.total_active as f64;
            writeln!(out, "{step:>6}  {count:>10}  {pct:>7.2}%").unwrap();
        }
        let total_pct = if self.total_active > 0 { 100.0 } else { 0.0 };
        writeln!(out, "{:>6}  {:>10}  {total_pct:>7.2}%", "total", self.total_active).unwrap();
        writeln!(out, "multi-step (step>=2): {:.2}%", 100.0 * self.fraction_at_least(2)).unwrap();
        out
    }
}

/// One sample per (dialogue, slot, turn) where the slot holds a value,
/// keyed by that sample's reasoning-step count.
pub fn step_histogram(corpus: &Corpus, split: Split) -> StepHistogram {
    let schema = corpus.schema();
    let mut hist = StepHistogram::default();
    for dialogue in corpus.split(split) {
        let table = step_table(dialogue, schema);
        for (row, turn) in table.iter().zip(1..) {
            for (steps, slot) in row.iter().zip(schema.slots()) {
                if is_active(dialogue, turn, &slot.slot_id) {
                    hist.add(*steps);
                }
            }
        }
    }
    hist
}
