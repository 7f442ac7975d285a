use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Corpus, Dialogue, Schema, SlotSchema};
use crate::{Error, Result};

/// On-disk form of one schema slot.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotRecord {
    slot_id: String,
    domain: String,
    name: String,
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    possible_values: Option<Vec<String>>,
}

/// Service entry of a schema-guided (SGD / MultiWOZ 2.2) `schema.json`.
#[derive(Debug, Deserialize)]
struct ServiceRecord {
    service_name: String,
    slots: Vec<ServiceSlot>,
}

#[derive(Debug, Deserialize)]
struct ServiceSlot {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    is_categorical: bool,
    #[serde(default)]
    possible_values: Vec<String>,
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_json<T: DeserializeOwned>(text: &str, location: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::format(format!("{location}: {path}"), e.into_inner())
    })
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema> {
    let path = path.as_ref();
    parse_schema(&read_to_string(path)?, &path.display().to_string())
}

/// Parses either the canonical slot list or a service-grouped schema file.
pub fn parse_schema(text: &str, location: &str) -> Result<Schema> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::format(location, e))?;
    let is_service_list = value
        .as_array()
        .and_then(|a| a.first())
        .is_some_and(|first| first.get("service_name").is_some());
    if is_service_list {
        let services: Vec<ServiceRecord> = parse_json(text, location)?;
        let mut slots = Vec::new();
        for service in services {
            for slot in service.slots {
                let prefix = format!("{}-", service.service_name);
                let name = slot.name.strip_prefix(&prefix).unwrap_or(&slot.name).to_string();
                let values = (slot.is_categorical && !slot.possible_values.is_empty()).then_some(slot.possible_values);
                slots.push(SlotSchema::new(
                    service.service_name.clone(),
                    name,
                    slot.description,
                    values,
                )?);
            }
        }
        return Schema::new(slots);
    }

    let records: Vec<SlotRecord> = parse_json(text, location)?;
    let slots = records
        .into_iter()
        .map(|r| {
            let slot = SlotSchema::new(r.domain, r.name, r.description, r.possible_values)?;
            if slot.slot_id != r.slot_id {
                return Err(Error::Validation(format!(
                    "slot_id `{}` does not equal `{}`",
                    r.slot_id, slot.slot_id
                )));
            }
            Ok(slot)
        })
        .collect::<Result<Vec<_>>>()?;
    Schema::new(slots)
}

pub fn save_schema(schema: &Schema, path: impl AsRef<Path>) -> Result<()> {
    let records: Vec<SlotRecord> = schema
        .slots()
        .iter()
        .map(|s| SlotRecord {
            slot_id: s.slot_id.clone(),
            domain: s.domain.clone(),
            name: s.name.clone(),
            description: s.description.clone(),
            possible_values: s.possible_values.clone(),
        })
        .collect();
    write_json(path.as_ref(), &records)
}

/// Reads one canonical dialogue file without schema validation.
pub fn load_dialogues(path: impl AsRef<Path>) -> Result<Vec<Dialogue>> {
    let path = path.as_ref();
    parse_json(&read_to_string(path)?, &path.display().to_string())
}

pub fn load_corpus<P: AsRef<Path>>(
    dialogue_paths: &[P],
    schema: &Schema,
    exclude_domains: &BTreeSet<String>,
) -> Result<Corpus> {
    let mut dialogues = Vec::new();
    for path in dialogue_paths {
        dialogues.extend(load_dialogues(path)?);
    }
    let name = dialogue_paths
        .first()
        .and_then(|p| p.as_ref().file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Corpus::new(name, schema.clone(), dialogues)?.exclude_domains(exclude_domains))
}

/// Writes the dialogues in canonical form. State keys are emitted sorted, so
/// repeated saves of the same corpus are byte-identical.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_json(path.as_ref(), corpus.dialogues())
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
