use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::buckets::{bucketize, Axis, BucketSpec};
use super::normalize::{similarity, NormalizationPolicy, Normalizer, DONTCARE_VALUE, NONE_VALUE};
use crate::builder::parse_generation;
use crate::corpus::Corpus;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub dialogue_id: String,
    #[serde(rename = "turn")]
    pub query_turn: usize,
    pub slot_id: String,
    #[serde(rename = "text")]
    pub generated_text: String,
}

/// Reads a JSONL prediction file; format errors carry the 1-based line number.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|e| Error::format(format!("{} line {}", path.display(), i + 1), e))?;
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketScore {
    pub axis: Axis,
    pub label: String,
    pub lo: f64,
    pub hi: Option<f64>,
    pub n_turns: usize,
    pub n_correct: usize,
    /// `None` for an empty bucket.
    pub jga: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Correct turns over all turns; 0 for an empty corpus.
    pub overall_jga: f64,
    pub n_dialogues: usize,
    pub n_turns: usize,
    pub n_correct: usize,
    /// (turn, slot) pairs scored as `none` because no prediction was given.
    pub n_missing_predictions: usize,
    pub per_bucket: Vec<BucketScore>,
    pub policy: NormalizationPolicy,
}

impl EvalReport {
    pub fn buckets(&self, axis: Axis) -> impl Iterator<Item = &BucketScore> {
        self.per_bucket.iter().filter(move |b| b.axis == axis)
    }

    pub fn axes(&self) -> Vec<Axis> {
        let mut axes: Vec<Axis> = Vec::new();
        for b in &self.per_bucket {
            if !axes.contains(&b.axis) {
                axes.push(b.axis);
            }
        }
        axes
    }
}

type PredictionKey<'a> = (&'a str, usize, &'a str);

fn index_predictions<'a>(
    corpus: &Corpus,
    predictions: &'a [PredictionRecord],
) -> Result<HashMap<PredictionKey<'a>, String>> {
    let n_turns: HashMap<&str, usize> = corpus
        .dialogues()
        .iter()
        .map(|d| (d.dialogue_id.as_str(), d.n_turns()))
        .collect();
    let mut index = HashMap::with_capacity(predictions.len());
    for p in predictions {
        let n = *n_turns
            .get(p.dialogue_id.as_str())
            .ok_or_else(|| Error::UnknownDialogue(p.dialogue_id.clone()))?;
        if !corpus.schema().contains(&p.slot_id) {
            return Err(Error::UnknownSlot(p.slot_id.clone()));
        }
        if p.query_turn == 0 || p.query_turn > n {
            return Err(Error::TurnOutOfRange {
                dialogue_id: p.dialogue_id.clone(),
                turn: p.query_turn,
                n_turns: n,
            });
        }
        let value = match parse_generation(&p.generated_text) {
            Ok((value, _)) => value,
            Err(_) => NONE_VALUE.to_string(),
        };
        let key = (p.dialogue_id.as_str(), p.query_turn, p.slot_id.as_str());
        if index.insert(key, value).is_some() {
            return Err(Error::DuplicatePrediction {
                dialogue_id: p.dialogue_id.clone(),
                turn: p.query_turn,
                slot_id: p.slot_id.clone(),
            });
        }
    }
    Ok(index)
}

fn values_match(pred: &str, gold: &str, categorical: bool, normalizer: &Normalizer, fuzzy: Option<f64>) -> bool {
    let p = normalizer.normalize(pred);
    let g = normalizer.normalize(gold);
    if p == g {
        return true;
    }
    let special = |v: &str| v == NONE_VALUE || v == DONTCARE_VALUE;
    match fuzzy {
        Some(t) if !categorical && !special(&p) && !special(&g) => similarity(&p, &g) >= t,
        _ => false,
    }
}

struct TurnScores {
    /// `(dialogue_id, turn) -> correct`, in corpus order.
    turns: Vec<((String, usize), bool)>,
    missing: usize,
}

fn score_turns(corpus: &Corpus, predictions: &[PredictionRecord], policy: &NormalizationPolicy) -> Result<TurnScores> {
    policy.validate()?;
    let index = index_predictions(corpus, predictions)?;
    let normalizer = Normalizer::new(policy);
    let schema = corpus.schema();
    let mut turns = Vec::with_capacity(corpus.n_turns());
    let mut missing = 0;
    for dialogue in corpus.dialogues() {
        for turn in &dialogue.turns {
            let mut correct = true;
            for slot in schema.slots() {
                let gold = turn.gold_state.get(&slot.slot_id).map_or(NONE_VALUE, String::as_str);
                let key = (dialogue.dialogue_id.as_str(), turn.index, slot.slot_id.as_str());
                let pred = match index.get(&key) {
                    Some(v) => v.as_str(),
                    None => {
                        missing += 1;
                        NONE_VALUE
                    }
                };
                if !values_match(
                    pred,
                    gold,
                    slot.is_categorical,
                    &normalizer,
                    policy.fuzzy_ratio_threshold,
                ) {
                    correct = false;
                }
            }
            turns.push(((dialogue.dialogue_id.clone(), turn.index), correct));
        }
    }
    Ok(TurnScores { turns, missing })
}

fn ratio(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// A turn is correct when every schema slot's predicted value matches gold
/// (absent gold and absent predictions both read as `none`).
pub fn compute_jga(
    corpus: &Corpus,
    predictions: &[PredictionRecord],
    policy: &NormalizationPolicy,
) -> Result<EvalReport> {
    fine_grained_report(corpus, predictions, policy, &[])
}

pub fn fine_grained_report(
    corpus: &Corpus,
    predictions: &[PredictionRecord],
    policy: &NormalizationPolicy,
    specs: &[BucketSpec],
) -> Result<EvalReport> {
    let scores = score_turns(corpus, predictions, policy)?;
    let n_turns = scores.turns.len();
    let n_correct = scores.turns.iter().filter(|(_, c)| *c).count();
    let mut per_bucket = Vec::new();
    for spec in specs {
        let assignment = bucketize(corpus, spec);
        let mut tallies = vec![(0usize, 0usize); spec.ranges().len()];
        for (key, correct) in &scores.turns {
            let tally = &mut tallies[assignment[key]];
            tally.0 += 1;
            tally.1 += *correct as usize;
        }
        for (range, (n, c)) in spec.ranges().iter().zip(tallies) {
            per_bucket.push(BucketScore {
                axis: spec.axis(),
                label: range.label(),
                lo: range.lo,
                hi: range.hi,
                n_turns: n,
                n_correct: c,
                jga: (n > 0).then(|| c as f64 / n as f64),
            });
        }
    }
    Ok(EvalReport {
        overall_jga: ratio(n_correct, n_turns),
        n_dialogues: corpus.dialogues().len(),
        n_turns,
        n_correct,
        n_missing_predictions: scores.missing,
        per_bucket,
        policy: policy.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dialogue, Schema, SlotSchema, Split, TurnPair};

    fn corpus() -> Corpus {
        let schema = Schema::new(vec![
            SlotSchema::new("hotel", "name", "name of the hotel", None).unwrap(),
            SlotSchema::new("hotel", "stars", "stars", Some(vec!["4".into(), "5".into()])).unwrap(),
        ])
        .unwrap();
        let dialogue = |id: &str| Dialogue {
            dialogue_id: id.into(),
            split: Split::Test,
            turns: (1..=3)
                .map(|i| TurnPair {
                    index: i,
                    system_utterance: String::new(),
                    user_utterance: "u".into(),
                    gold_state: if i >= 2 {
                        [("hotel-name".to_string(), "the york".to_string())].into()
                    } else {
                        Default::default()
                    },
                })
                .collect(),
        };
        Corpus::new("c", schema, vec![dialogue("a"), dialogue("b")]).unwrap()
    }

    fn gold_predictions(c: &Corpus) -> Vec<PredictionRecord> {
        let mut out = Vec::new();
        for d in c.dialogues() {
            for t in &d.turns {
                for (slot, value) in &t.gold_state {
                    out.push(PredictionRecord {
                        dialogue_id: d.dialogue_id.clone(),
                        query_turn: t.index,
                        slot_id: slot.clone(),
                        generated_text: format!("{value} | system: x user: y"),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn perfect_predictions() {
        let c = corpus();
        let r = compute_jga(&c, &gold_predictions(&c), &NormalizationPolicy::default()).unwrap();
        assert_eq!(r.overall_jga, 1.0);
        assert_eq!(r.n_turns, 6);
        assert_eq!(r.n_missing_predictions, 12 - 4);
    }

    #[test]
    fn one_wrong_slot() {
        let c = corpus();
        let mut preds = gold_predictions(&c);
        preds[0].generated_text = "the yorkk".into();
        let r = compute_jga(&c, &preds, &NormalizationPolicy::default()).unwrap();
        assert_eq!(r.overall_jga, 5.0 / 6.0);

        let fuzzy = NormalizationPolicy {
            fuzzy_ratio_threshold: Some(0.8),
            ..Default::default()
        };
        assert_eq!(compute_jga(&c, &preds, &fuzzy).unwrap().overall_jga, 1.0);
    }

    #[test]
    fn all_none_on_active_turns_scores_zero() {
        let c = corpus().exclude_domains(&Default::default());
        let active_only: Vec<_> = c
            .dialogues()
            .iter()
            .map(|d| Dialogue {
                turns: d.turns[1..]
                    .iter()
                    .cloned()
                    .enumerate()
                    .map(|(i, mut t)| {
                        t.index = i + 1;
                        t
                    })
                    .collect(),
                ..d.clone()
            })
            .collect();
        let c = Corpus::new("c", c.schema().clone(), active_only).unwrap();
        let r = compute_jga(&c, &[], &NormalizationPolicy::default()).unwrap();
        assert_eq!(r.overall_jga, 0.0);
    }

    #[test]
    fn prediction_errors() {
        let c = corpus();
        let p = |d: &str, t: usize, s: &str| PredictionRecord {
            dialogue_id: d.into(),
            query_turn: t,
            slot_id: s.into(),
            generated_text: "x".into(),
        };
        let policy = NormalizationPolicy::default();
        assert!(matches!(
            compute_jga(&c, &[p("zz", 1, "hotel-name")], &policy),
            Err(Error::UnknownDialogue(_))
        ));
        assert!(matches!(
            compute_jga(&c, &[p("a", 1, "taxi-x")], &policy),
            Err(Error::UnknownSlot(_))
        ));
        assert!(matches!(
            compute_jga(&c, &[p("a", 4, "hotel-name")], &policy),
            Err(Error::TurnOutOfRange { .. })
        ));
        assert!(matches!(
            compute_jga(&c, &[p("a", 1, "hotel-name"), p("a", 1, "hotel-name")], &policy),
            Err(Error::DuplicatePrediction { .. })
        ));
    }

    #[test]
    fn empty_bucket_is_undefined() {
        let c = corpus();
        let spec = BucketSpec::new(Axis::Turn, vec![(0.0, Some(3.0)), (3.0, Some(10.0)), (10.0, None)]).unwrap();
        let r = fine_grained_report(&c, &gold_predictions(&c), &NormalizationPolicy::default(), &[spec]).unwrap();
        assert_eq!(r.per_bucket[0].n_turns, 0);
        assert_eq!(r.per_bucket[0].jga, None);
        assert_eq!(r.per_bucket[1].jga, Some(1.0));
        assert_eq!(r.per_bucket[2].jga, None);
    }

    #[test]
    fn single_bucket_equals_overall() {
        let c = corpus();
        let mut preds = gold_predictions(&c);
        preds[1].generated_text = "wrong".into();
        let spec = BucketSpec::new(Axis::Len, vec![(0.0, None)]).unwrap();
        let r = fine_grained_report(&c, &preds, &NormalizationPolicy::default(), &[spec]).unwrap();
        assert_eq!(r.per_bucket[0].jga, Some(r.overall_jga));
        assert_eq!(r.per_bucket[0].n_turns, r.n_turns);
    }

    #[test]
    fn malformed_prediction_line_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        std::fs::write(
            &path,
            "{\"dialogue_id\":\"a\",\"turn\":1,\"slot_id\":\"s\",\"text\":\"x\"}\n\n{oops\n",
        )
        .unwrap();
        match load_predictions(&path) {
            Err(Error::Format { location, .. }) => assert!(location.ends_with("line 3"), "{location}"),
            other => panic!("{other:?}"),
        }
    }
}
