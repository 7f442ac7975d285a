//! Random small corpora and brute-force oracles shared by property suites.
//!
//! The oracles deliberately avoid the library's own helpers: normalization,
//! chain diffing and JGA recounting are all re-derived here from the plain
//! definitions.

#![allow(dead_code)]

use std::collections::BTreeMap;

use cote_core::{Corpus, Dialogue, PredictionRecord, Schema, SlotSchema, Split, TurnPair};
use rand::seq::SliceRandom;
use rand::Rng;

const SLOTS: [(&str, &str, Option<&[&str]>); 6] = [
    ("hotel", "name", None),
    ("hotel", "pricerange", Some(&["cheap", "moderate", "expensive"])),
    ("restaurant", "area", Some(&["north", "south", "centre"])),
    ("restaurant", "food", None),
    ("taxi", "leaveat", None),
    ("train", "day", Some(&["monday", "friday"])),
];

/// Surface variants chosen so that several spellings collapse together.
const VALUES: [&str; 14] = [
    "cheap",
    "Cheap",
    "cheap.",
    "moderate",
    "north",
    " South ",
    "south",
    "dontcare",
    "don't care",
    "none",
    "the york",
    "The  York",
    "italian",
    "17:15",
];

const WORDS: [&str; 8] = ["i", "need", "a", "hotel", "in", "the", "north", "please"];

pub fn schema<R: Rng>(rng: &mut R) -> Schema {
    let n = rng.gen_range(1..=4);
    let mut picked: Vec<_> = SLOTS.iter().collect();
    picked.shuffle(rng);
    let slots = picked[..n]
        .iter()
        .map(|(d, s, pv)| {
            let pv = pv.map(|v| v.iter().map(|x| x.to_string()).collect());
            SlotSchema::new(*d, *s, format!("the {s} of the {d}"), pv).unwrap()
        })
        .collect();
    Schema::new(slots).unwrap()
}

fn utterance<R: Rng>(rng: &mut R, allow_empty: bool) -> String {
    let lo = if allow_empty { 0 } else { 1 };
    let n = rng.gen_range(lo..=8);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn corpus<R: Rng>(rng: &mut R) -> Corpus {
    let schema = schema(rng);
    let ids: Vec<String> = schema.slots().iter().map(|s| s.slot_id.clone()).collect();
    let n_dialogues = rng.gen_range(1..=5);
    let dialogues = (0..n_dialogues)
        .map(|d| {
            let n_turns = rng.gen_range(1..=6);
            let mut state: BTreeMap<String, String> = BTreeMap::new();
            let turns = (1..=n_turns)
                .map(|index| {
                    for id in &ids {
                        match rng.gen_range(0..10) {
                            0..=2 => {
                                state.insert(id.clone(), VALUES.choose(rng).unwrap().to_string());
                            }
                            3 => {
                                state.remove(id);
                            }
                            _ => {}
                        }
                    }
                    TurnPair {
                        index,
                        system_utterance: utterance(rng, true),
                        user_utterance: utterance(rng, false),
                        gold_state: state.clone(),
                    }
                })
                .collect();
            Dialogue {
                dialogue_id: format!("r{d}"),
                split: *[Split::Train, Split::Dev, Split::Test].choose(rng).unwrap(),
                turns,
            }
        })
        .collect();
    Corpus::new("random", schema, dialogues).unwrap()
}

/// Predictions covering most (turn, slot) pairs: some exact, some
/// respelled, some wrong, some value-only, some empty, some missing.
pub fn predictions<R: Rng>(rng: &mut R, corpus: &Corpus) -> Vec<PredictionRecord> {
    let mut out = Vec::new();
    for d in corpus.dialogues() {
        for t in &d.turns {
            for slot in corpus.schema().slots() {
                let gold = t
                    .gold_state
                    .get(&slot.slot_id)
                    .cloned()
                    .unwrap_or_else(|| "none".into());
                let value = match rng.gen_range(0..10) {
                    0 => continue,
                    1 | 2 => VALUES.choose(rng).unwrap().to_string(),
                    3 => gold.to_uppercase(),
                    _ => gold,
                };
                let text = match rng.gen_range(0..6) {
                    0 => value,
                    1 => String::from("   "),
                    _ => format!("{value} | system: hi user: {}", utterance(rng, false)),
                };
                out.push(PredictionRecord {
                    dialogue_id: d.dialogue_id.clone(),
                    query_turn: t.index,
                    slot_id: slot.slot_id.clone(),
                    generated_text: text,
                });
            }
        }
    }
    out.shuffle(rng);
    out
}

/// Independent canonical form: case, edge punctuation, inner spaces, aliases.
pub fn oracle_norm(raw: &str) -> String {
    let lower = raw.to_lowercase();
    let trimmed = lower.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let collapsed: String = trimmed
        .split(' ')
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    match collapsed.as_str() {
        "" | "none" => "none".into(),
        "dont care" | "don't care" | "dontcare" => "dontcare".into(),
        _ => collapsed,
    }
}

fn gold_at(d: &Dialogue, turn: usize, slot_id: &str) -> String {
    if turn == 0 {
        return "none".into();
    }
    oracle_norm(d.turns[turn - 1].gold_state.get(slot_id).map_or("none", String::as_str))
}

/// State-diff chain: every turn up to `query_turn` whose canonical value
/// differs from the previous turn's, with the raw new value or `none`.
pub fn oracle_chain(d: &Dialogue, slot_id: &str, query_turn: usize) -> (Vec<usize>, Vec<String>) {
    let mut turns = Vec::new();
    let mut values = Vec::new();
    for t in 1..=query_turn {
        let (prev, cur) = (gold_at(d, t - 1, slot_id), gold_at(d, t, slot_id));
        if prev != cur {
            turns.push(t);
            values.push(if cur == "none" {
                "none".into()
            } else {
                d.turns[t - 1].gold_state[slot_id].clone()
            });
        }
    }
    (turns, values)
}

/// Turn-level correctness recounted from scratch, in corpus order.
pub fn oracle_turn_correct(corpus: &Corpus, predictions: &[PredictionRecord]) -> Vec<((String, usize), bool)> {
    let mut out = Vec::new();
    for d in corpus.dialogues() {
        for t in 1..=d.n_turns() {
            let correct = corpus.schema().slots().iter().all(|slot| {
                let pred = predictions
                    .iter()
                    .find(|p| p.dialogue_id == d.dialogue_id && p.query_turn == t && p.slot_id == slot.slot_id)
                    .map(|p| {
                        let text = p.generated_text.as_str();
                        match text.find(" | ") {
                            Some(i) => text[..i].to_string(),
                            None => text.to_string(),
                        }
                    })
                    .unwrap_or_else(|| "none".into());
                oracle_norm(&pred) == gold_at(d, t, &slot.slot_id)
            });
            out.push(((d.dialogue_id.clone(), t), correct));
        }
    }
    out
}

/// Step-axis key of a turn: the largest per-slot change count so far.
pub fn oracle_turn_steps(corpus: &Corpus, d: &Dialogue, turn: usize) -> usize {
    corpus
        .schema()
        .slots()
        .iter()
        .map(|s| oracle_chain(d, &s.slot_id, turn).0.len())
        .max()
        .unwrap_or(0)
}
