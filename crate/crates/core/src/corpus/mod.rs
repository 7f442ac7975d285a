//! Canonical data model for schema-guided dialogue corpora.
//!
//! A [`Corpus`] couples a [`Schema`] with dialogues whose per-turn gold state
//! is stored cumulatively. All constructors validate, so a value of any of
//! these types satisfies its invariants for as long as it lives.

pub(crate) mod io;
mod legacy;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::evaluator::{normalize_value, NormalizationPolicy};
use crate::{Error, Result};

pub use io::{load_corpus, load_dialogues, load_schema, parse_schema, save_corpus, save_schema};
pub use legacy::{ingest_legacy, LegacyStyle};

/// One slot: `(domain, name, description, possible values)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSchema {
    pub slot_id: String,
    pub domain: String,
    pub name: String,
    pub description: String,
    pub possible_values: Option<Vec<String>>,
    pub is_categorical: bool,
}

impl SlotSchema {
    pub fn new(
        domain: impl Into<String>,
        name: impl Into<String>,
        description: impl Into<String>,
        possible_values: Option<Vec<String>>,
    ) -> Result<Self> {
        let domain = domain.into();
        let name = name.into();
        let slot_id = format!("{domain}-{name}");
        let possible_values = possible_values.filter(|v| !v.is_empty());
        if let Some(values) = &possible_values {
            let policy = NormalizationPolicy::default();
            let mut seen = HashSet::new();
            for v in values {
                if !seen.insert(normalize_value(v, &policy)) {
                    return Err(Error::Validation(format!(
                        "slot `{slot_id}` lists possible value `{v}` twice"
                    )));
                }
            }
        }
        Ok(Self {
            slot_id,
            domain,
            name,
            description: description.into(),
            is_categorical: possible_values.is_some(),
            possible_values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    slots: Vec<SlotSchema>,
    domains: BTreeSet<String>,
    index: HashMap<String, usize>,
}

impl Schema {
    pub fn new(slots: Vec<SlotSchema>) -> Result<Self> {
        let mut index = HashMap::with_capacity(slots.len());
        for (i, slot) in slots.iter().enumerate() {
            if slot.slot_id != format!("{}-{}", slot.domain, slot.name) {
                return Err(Error::Validation(format!(
                    "slot_id `{}` does not equal `<domain>-<name>`",
                    slot.slot_id
                )));
            }
            if index.insert(slot.slot_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate slot_id `{}`", slot.slot_id)));
            }
        }
        let domains = slots.iter().map(|s| s.domain.clone()).collect();
        Ok(Self { slots, domains, index })
    }

    pub fn slots(&self) -> &[SlotSchema] {
        &self.slots
    }

    pub fn domains(&self) -> &BTreeSet<String> {
        &self.domains
    }

    pub fn slot(&self, slot_id: &str) -> Option<&SlotSchema> {
        self.index.get(slot_id).map(|&i| &self.slots[i])
    }

    pub fn contains(&self, slot_id: &str) -> bool {
        self.index.contains_key(slot_id)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Slot ids in lexicographic order.
    pub fn sorted_slot_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.slots.iter().map(|s| s.slot_id.as_str()).collect();
        ids.sort_unstable();
        ids
    }

    pub fn without_domains(&self, excluded: &BTreeSet<String>) -> Schema {
        let slots = self
            .slots
            .iter()
            .filter(|s| !excluded.contains(&s.domain))
            .cloned()
            .collect();
        Schema::new(slots).expect("subset of a valid schema is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "val" | "valid" | "validate" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split `{other}`"))),
        }
    }
}

/// One system/user exchange. `gold_state` is the cumulative state after the turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnPair {
    pub index: usize,
    #[serde(rename = "system")]
    pub system_utterance: String,
    #[serde(rename = "user")]
    pub user_utterance: String,
    #[serde(rename = "state", default)]
    pub gold_state: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub split: Split,
    pub turns: Vec<TurnPair>,
}

impl Dialogue {
    pub fn n_turns(&self) -> usize {
        self.turns.len()
    }

    /// Turn `index` (1-based).
    pub fn turn(&self, index: usize) -> Result<&TurnPair> {
        if index == 0 || index > self.turns.len() {
            return Err(Error::TurnOutOfRange {
                dialogue_id: self.dialogue_id.clone(),
                turn: index,
                n_turns: self.turns.len(),
            });
        }
        Ok(&self.turns[index - 1])
    }

    /// Mean whitespace-token count over all 2N utterances.
    pub fn avg_utterance_len(&self) -> f64 {
        if self.turns.is_empty() {
            return 0.0;
        }
        let tokens: usize = self
            .turns
            .iter()
            .map(|t| t.system_utterance.split_whitespace().count() + t.user_utterance.split_whitespace().count())
            .sum();
        tokens as f64 / (2 * self.turns.len()) as f64
    }

    /// Every slot id that carries a value in some turn.
    pub fn annotated_slots(&self) -> BTreeSet<&str> {
        self.turns
            .iter()
            .flat_map(|t| t.gold_state.keys().map(String::as_str))
            .collect()
    }

    fn validate(&self, schema: &Schema) -> Result<()> {
        if self.turns.is_empty() {
            return Err(Error::Validation(format!(
                "dialogue `{}` has no turns",
                self.dialogue_id
            )));
        }
        for (pos, turn) in self.turns.iter().enumerate() {
            if turn.index != pos + 1 {
                return Err(Error::Validation(format!(
                    "dialogue `{}`: turn at position {} has index {} (expected {})",
                    self.dialogue_id,
                    pos + 1,
                    turn.index,
                    pos + 1
                )));
            }
            if turn.user_utterance.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "dialogue `{}` turn {}: empty user utterance",
                    self.dialogue_id, turn.index
                )));
            }
            for (slot_id, value) in &turn.gold_state {
                if !schema.contains(slot_id) {
                    return Err(Error::Validation(format!(
                        "dialogue `{}` turn {}: unknown slot `{slot_id}`",
                        self.dialogue_id, turn.index
                    )));
                }
                if value.trim().is_empty() {
                    return Err(Error::Validation(format!(
                        "dialogue `{}` turn {}: empty value for `{slot_id}`",
                        self.dialogue_id, turn.index
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    name: String,
    schema: Schema,
    dialogues: Vec<Dialogue>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, schema: Schema, dialogues: Vec<Dialogue>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(dialogues.len());
        for d in &dialogues {
            if !ids.insert(d.dialogue_id.as_str()) {
                return Err(Error::Validation(format!("duplicate dialogue_id `{}`", d.dialogue_id)));
            }
            d.validate(&schema)?;
        }
        Ok(Self {
            name: name.into(),
            schema,
            dialogues,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn dialogue(&self, dialogue_id: &str) -> Option<&Dialogue> {
        self.dialogues.iter().find(|d| d.dialogue_id == dialogue_id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Dialogue> {
        self.dialogues.iter().filter(move |d| d.split == split)
    }

    pub fn split_counts(&self) -> BTreeMap<Split, usize> {
        let mut counts: BTreeMap<Split, usize> = Split::ALL.iter().map(|&s| (s, 0)).collect();
        for d in &self.dialogues {
            *counts.entry(d.split).or_default() += 1;
        }
        counts
    }

    pub fn n_turns(&self) -> usize {
        self.dialogues.iter().map(Dialogue::n_turns).sum()
    }

    /// A corpus restricted to one split, sharing the schema.
    pub fn only_split(&self, split: Split) -> Corpus {
        self.with_dialogues(self.split(split).cloned().collect())
    }

    pub(crate) fn with_dialogues(&self, dialogues: Vec<Dialogue>) -> Corpus {
        Corpus {
            name: self.name.clone(),
            schema: self.schema.clone(),
            dialogues,
        }
    }

    /// Removes the slots of `excluded` domains from the schema and every gold
    /// state, and drops dialogues whose annotations all fell in those domains.
    /// Dialogues without any annotation are kept.
    pub fn exclude_domains(&self, excluded: &BTreeSet<String>) -> Corpus {
        if excluded.is_empty() {
            return self.clone();
        }
        let schema = self.schema.without_domains(excluded);
        let dialogues = self
            .dialogues
            .iter()
            .filter(|d| {
                let annotated = d.annotated_slots();
                annotated.is_empty() || annotated.iter().any(|s| schema.contains(s))
            })
            .map(|d| {
                let mut d = d.clone();
                for turn in &mut d.turns {
                    turn.gold_state.retain(|slot_id, _| schema.contains(slot_id));
                }
                d
            })
            .collect();
        Corpus {
            name: self.name.clone(),
            schema,
            dialogues,
        }
    }
}
