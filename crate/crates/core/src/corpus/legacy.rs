//! Converters from released dataset layouts into the canonical corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use super::io::{parse_json, read_to_string};
use super::{Corpus, Dialogue, Schema, Split, TurnPair};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegacyStyle {
    /// WOZ 2.0: `dialogue_idx` + `dialogue[]` with cumulative `belief_state`.
    WozBelief,
    /// M2M simulated dialogues: `turns[]` with flat cumulative `dialogue_state`.
    M2mFlat,
    /// MultiWOZ 2.2 release: alternating USER/SYSTEM turns with per-service frames.
    MultiWoz22,
}

impl FromStr for LegacyStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "woz_belief" => Ok(Self::WozBelief),
            "m2m_flat" => Ok(Self::M2mFlat),
            "multiwoz22" => Ok(Self::MultiWoz22),
            other => Err(Error::Validation(format!("unknown legacy style `{other}`"))),
        }
    }
}

/// Converts a legacy file, or every `*.json` file under a directory, into a
/// validated corpus. Splits are inferred from file and directory names.
pub fn ingest_legacy(path: impl AsRef<Path>, style: LegacyStyle, schema: &Schema) -> Result<Corpus> {
    let path = path.as_ref();
    let resolver = SlotResolver::new(schema);
    let mut dialogues = Vec::new();
    for file in input_files(path)? {
        let split = infer_split(&file)?;
        let location = file.display().to_string();
        let text = read_to_string(&file)?;
        let converted = match style {
            LegacyStyle::WozBelief => convert_woz(&text, &location, &file, split, &resolver)?,
            LegacyStyle::M2mFlat => convert_m2m(&text, &location, split, &resolver)?,
            LegacyStyle::MultiWoz22 => convert_multiwoz(&text, &location, split, schema)?,
        };
        dialogues.extend(converted);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Corpus::new(name, schema.clone(), dialogues)
}

fn input_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            ));
        }
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::format(path.display().to_string(), e))?;
        let p = entry.path();
        if entry.file_type().is_file()
            && p.extension().is_some_and(|e| e == "json")
            && p.file_name().is_some_and(|n| n != "schema.json")
        {
            files.push(p.to_path_buf());
        }
    }
    Ok(files)
}

fn infer_split(file: &Path) -> Result<Split> {
    let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned());
    let parents = file
        .ancestors()
        .skip(1)
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()));
    for component in stem.into_iter().chain(parents) {
        for token in component
            .split(|c: char| !c.is_ascii_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            if let Ok(split) = token.parse::<Split>() {
                return Ok(split);
            }
        }
    }
    Err(Error::format(
        file.display().to_string(),
        "cannot infer split (train/dev/test) from the path",
    ))
}

fn slot_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Maps dataset-specific slot names onto schema slot ids.
struct SlotResolver<'a> {
    schema: &'a Schema,
    by_id: HashMap<String, String>,
    by_name: HashMap<String, Vec<String>>,
}

impl<'a> SlotResolver<'a> {
    fn new(schema: &'a Schema) -> Self {
        let mut by_id = HashMap::new();
        let mut by_name: HashMap<String, Vec<String>> = HashMap::new();
        for slot in schema.slots() {
            by_id.insert(slot_key(&slot.slot_id), slot.slot_id.clone());
            by_name
                .entry(slot_key(&slot.name))
                .or_default()
                .push(slot.slot_id.clone());
        }
        Self { schema, by_id, by_name }
    }

    fn candidates(&self, raw: &str) -> Vec<&str> {
        let key = slot_key(raw);
        if let Some(id) = self.by_id.get(&key) {
            return vec![id.as_str()];
        }
        self.by_name
            .get(&key)
            .map(|ids| ids.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Resolves every raw slot name of one dialogue. Names shared by several
    /// domains are settled by the domains the dialogue's other slots (or its
    /// `hints`, e.g. intents) point at.
    fn resolve_dialogue(
        &self,
        raw_names: &BTreeSet<String>,
        hints: &[String],
        location: &str,
    ) -> Result<HashMap<String, String>> {
        let mut resolved = HashMap::new();
        let mut domains = BTreeSet::new();
        let mut ambiguous = Vec::new();
        for raw in raw_names {
            match self.candidates(raw).as_slice() {
                [] => {
                    return Err(Error::format(
                        location,
                        format!("slot `{raw}` does not resolve against the schema"),
                    ))
                }
                [one] => {
                    domains.insert(self.schema.slot(one).unwrap().domain.clone());
                    resolved.insert(raw.clone(), one.to_string());
                }
                many => ambiguous.push((raw.clone(), many.to_vec())),
            }
        }
        for hint in hints {
            let hint = hint.to_lowercase();
            for domain in self.schema.domains() {
                if hint.contains(domain.as_str()) {
                    domains.insert(domain.clone());
                }
            }
        }
        for (raw, candidates) in ambiguous {
            let in_scope: Vec<_> = candidates
                .iter()
                .filter(|id| domains.contains(&self.schema.slot(id).unwrap().domain))
                .collect();
            let chosen = match in_scope.as_slice() {
                [one] => one.to_string(),
                _ => {
                    return Err(Error::format(
                        location,
                        format!("slot `{raw}` is ambiguous between {}", candidates.join(", ")),
                    ))
                }
            };
            resolved.insert(raw, chosen);
        }
        Ok(resolved)
    }
}

#[derive(Deserialize)]
struct WozDialogue {
    dialogue_idx: serde_json::Value,
    dialogue: Vec<WozTurn>,
}

#[derive(Deserialize)]
struct WozTurn {
    turn_idx: usize,
    #[serde(default)]
    system_transcript: String,
    transcript: String,
    #[serde(default)]
    belief_state: Vec<WozBelief>,
}

#[derive(Deserialize)]
struct WozBelief {
    slots: Vec<Vec<String>>,
    #[serde(default)]
    act: String,
}

fn convert_woz(
    text: &str,
    location: &str,
    file: &Path,
    split: Split,
    resolver: &SlotResolver,
) -> Result<Vec<Dialogue>> {
    let raw: Vec<WozDialogue> = parse_json(text, location)?;
    let stem = file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    raw.into_iter()
        .map(|d| {
            let idx = match &d.dialogue_idx {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            let dialogue_id = format!("{stem}-{idx}");
            let mut states = Vec::with_capacity(d.dialogue.len());
            for (pos, turn) in d.dialogue.iter().enumerate() {
                let turn_loc = format!("{location}: dialogue {dialogue_id} turn {}", pos + 1);
                if turn.turn_idx != pos {
                    return Err(Error::format(
                        turn_loc,
                        format!("turn_idx {} out of sequence", turn.turn_idx),
                    ));
                }
                let mut state = BTreeMap::new();
                for belief in turn.belief_state.iter().filter(|b| b.act != "request") {
                    for pair in &belief.slots {
                        match pair.as_slice() {
                            [name, value] => {
                                state.insert(name.clone(), value.clone());
                            }
                            _ => return Err(Error::format(turn_loc, "belief slot is not a [name, value] pair")),
                        }
                    }
                }
                states.push(state);
            }
            let utterances = d
                .dialogue
                .iter()
                .map(|t| (t.system_transcript.clone(), t.transcript.clone()))
                .collect();
            build_dialogue(dialogue_id, split, utterances, states, &[], resolver, location)
        })
        .collect()
}

#[derive(Deserialize)]
struct M2mDialogue {
    dialogue_id: String,
    turns: Vec<M2mTurn>,
}

#[derive(Deserialize)]
struct M2mTurn {
    #[serde(default)]
    system_utterance: Option<M2mUtterance>,
    user_utterance: M2mUtterance,
    #[serde(default)]
    dialogue_state: Vec<M2mSlotValue>,
    #[serde(default)]
    user_intents: Vec<String>,
}

#[derive(Deserialize)]
struct M2mUtterance {
    text: String,
}

#[derive(Deserialize)]
struct M2mSlotValue {
    slot: String,
    value: String,
}

fn convert_m2m(text: &str, location: &str, split: Split, resolver: &SlotResolver) -> Result<Vec<Dialogue>> {
    let raw: Vec<M2mDialogue> = parse_json(text, location)?;
    raw.into_iter()
        .map(|d| {
            let hints: Vec<String> = d.turns.iter().flat_map(|t| t.user_intents.iter().cloned()).collect();
            let utterances = d
                .turns
                .iter()
                .map(|t| {
                    (
                        t.system_utterance.as_ref().map(|u| u.text.clone()).unwrap_or_default(),
                        t.user_utterance.text.clone(),
                    )
                })
                .collect();
            let states = d
                .turns
                .iter()
                .map(|t| {
                    t.dialogue_state
                        .iter()
                        .map(|sv| (sv.slot.clone(), sv.value.clone()))
                        .collect()
                })
                .collect();
            build_dialogue(d.dialogue_id, split, utterances, states, &hints, resolver, location)
        })
        .collect()
}

fn build_dialogue(
    dialogue_id: String,
    split: Split,
    utterances: Vec<(String, String)>,
    raw_states: Vec<BTreeMap<String, String>>,
    hints: &[String],
    resolver: &SlotResolver,
    location: &str,
) -> Result<Dialogue> {
    let raw_names: BTreeSet<String> = raw_states.iter().flat_map(|s| s.keys().cloned()).collect();
    let dialogue_loc = format!("{location}: dialogue {dialogue_id}");
    let mapping = resolver.resolve_dialogue(&raw_names, hints, &dialogue_loc)?;
    let turns = utterances
        .into_iter()
        .zip(raw_states)
        .enumerate()
        .map(|(pos, ((system, user), state))| TurnPair {
            index: pos + 1,
            system_utterance: system,
            user_utterance: user,
            gold_state: state
                .into_iter()
                .filter(|(_, v)| !v.trim().is_empty())
                .map(|(k, v)| (mapping[&k].clone(), v))
                .collect(),
        })
        .collect();
    Ok(Dialogue {
        dialogue_id,
        split,
        turns,
    })
}

#[derive(Deserialize)]
struct MwzDialogue {
    dialogue_id: String,
    turns: Vec<MwzTurn>,
}

#[derive(Deserialize)]
struct MwzTurn {
    speaker: String,
    utterance: String,
    #[serde(default)]
    frames: Vec<MwzFrame>,
}

#[derive(Deserialize)]
struct MwzFrame {
    #[serde(default)]
    state: Option<MwzState>,
}

#[derive(Deserialize)]
struct MwzState {
    #[serde(default)]
    slot_values: BTreeMap<String, Vec<String>>,
}

fn convert_multiwoz(text: &str, location: &str, split: Split, schema: &Schema) -> Result<Vec<Dialogue>> {
    let raw: Vec<MwzDialogue> = parse_json(text, location)?;
    raw.into_iter()
        .map(|d| {
            let mut turns = Vec::new();
            let mut pending_system = String::new();
            for (pos, turn) in d.turns.iter().enumerate() {
                match turn.speaker.as_str() {
                    "SYSTEM" => pending_system = turn.utterance.clone(),
                    "USER" => {
                        let index = turns.len() + 1;
                        let mut gold_state = BTreeMap::new();
                        for frame in &turn.frames {
                            let Some(state) = &frame.state else { continue };
                            for (slot_id, values) in &state.slot_values {
                                if !schema.contains(slot_id) {
                                    return Err(Error::format(
                                        format!("{location}: dialogue {} turn {index}", d.dialogue_id),
                                        format!("unknown slot `{slot_id}`"),
                                    ));
                                }
                                if let Some(v) = values.iter().find(|v| !v.trim().is_empty()) {
                                    gold_state.insert(slot_id.clone(), v.clone());
                                }
                            }
                        }
                        turns.push(TurnPair {
                            index,
                            system_utterance: std::mem::take(&mut pending_system),
                            user_utterance: turn.utterance.clone(),
                            gold_state,
                        });
                    }
                    other => {
                        return Err(Error::format(
                            format!("{location}: dialogue {} utterance {}", d.dialogue_id, pos),
                            format!("unknown speaker `{other}`"),
                        ))
                    }
                }
            }
            Ok(Dialogue {
                dialogue_id: d.dialogue_id,
                split,
                turns,
            })
        })
        .collect()
}
