use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chains::step_table;
use crate::corpus::io::read_to_string;
use crate::corpus::Corpus;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Largest reasoning-step count over the slots at a turn.
    Step,
    /// Total number of turns in the dialogue.
    Turn,
    /// Mean whitespace-token length of the dialogue's utterances.
    Len,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Step => "step",
            Axis::Turn => "turn",
            Axis::Len => "len",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open range `[lo, hi)`; `hi = None` is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketRange {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl BucketRange {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && self.hi.is_none_or(|hi| x < hi)
    }

    /// `3` for `[3,4)`, `12-14` for `[12,15)`, `20+` for `[20,∞)`; ranges with
    /// fractional edges fall back to interval notation.
    pub fn label(&self) -> String {
        let integral = |x: f64| x.fract() == 0.0;
        match self.hi {
            None if integral(self.lo) => format!("{}+", self.lo),
            None => format!("[{},inf)", self.lo),
            Some(hi) if integral(self.lo) && integral(hi) => {
                if hi - self.lo == 1.0 {
                    format!("{}", self.lo)
                } else {
                    format!("{}-{}", self.lo, hi - 1.0)
                }
            }
            Some(hi) => format!("[{},{})", self.lo, hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BucketSpecFile", into = "BucketSpecFile")]
pub struct BucketSpec {
    axis: Axis,
    ranges: Vec<BucketRange>,
}

#[derive(Serialize, Deserialize)]
struct BucketSpecFile {
    axis: Axis,
    edges: Vec<(f64, Option<f64>)>,
}

impl TryFrom<BucketSpecFile> for BucketSpec {
    type Error = Error;

    fn try_from(f: BucketSpecFile) -> Result<Self> {
        BucketSpec::new(f.axis, f.edges)
    }
}

impl From<BucketSpec> for BucketSpecFile {
    fn from(s: BucketSpec) -> Self {
        BucketSpecFile {
            axis: s.axis,
            edges: s.ranges.iter().map(|r| (r.lo, r.hi)).collect(),
        }
    }
}

impl BucketSpec {
    /// Ranges must start at 0, abut one another, and end open-ended.
    pub fn new(axis: Axis, edges: Vec<(f64, Option<f64>)>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidBucketSpec("no ranges".into()));
        }
        if edges[0].0 != 0.0 {
            return Err(Error::InvalidBucketSpec(format!(
                "first range must start at 0, starts at {}",
                edges[0].0
            )));
        }
        for (i, &(lo, hi)) in edges.iter().enumerate() {
            let last = i + 1 == edges.len();
            match hi {
                None if !last => {
                    return Err(Error::InvalidBucketSpec(format!(
                        "range {i} is open-ended but not last"
                    )))
                }
                Some(_) if last => return Err(Error::InvalidBucketSpec("last range must be open-ended".into())),
                Some(hi) => {
                    if hi.is_nan() || hi <= lo {
                        return Err(Error::InvalidBucketSpec(format!("range [{lo}, {hi}) is empty")));
                    }
                    if edges[i + 1].0 != hi {
                        return Err(Error::InvalidBucketSpec(format!(
                            "range [{lo}, {hi}) is not followed by a range starting at {hi}"
                        )));
                    }
                }
                None => {}
            }
        }
        Ok(Self {
            axis,
            ranges: edges.into_iter().map(|(lo, hi)| BucketRange { lo, hi }).collect(),
        })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn ranges(&self) -> &[BucketRange] {
        &self.ranges
    }

    /// Index of the range holding `x`; total over non-negative inputs.
    pub fn locate(&self, x: f64) -> usize {
        self.ranges
            .iter()
            .position(|r| r.contains(x))
            .expect("bucket ranges cover [0, inf)")
    }

    /// Reads a file holding one spec object or an array of them.
    pub fn load(path: impl AsRef<Path>) -> Result<Vec<BucketSpec>> {
        let path = path.as_ref();
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn parse(text: &str, location: &str) -> Result<Vec<BucketSpec>> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            Many(Vec<BucketSpecFile>),
            One(BucketSpecFile),
        }
        let parsed: OneOrMany = serde_json::from_str(text).map_err(|e| Error::format(location, e))?;
        let files = match parsed {
            OneOrMany::Many(v) => v,
            OneOrMany::One(f) => vec![f],
        };
        files.into_iter().map(BucketSpec::try_from).collect()
    }
}

/// Bundled bucket layouts matching the fine-grained tables' column headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BucketPreset {
    MultiWoz,
    M2m,
    Woz,
}

impl std::str::FromStr for BucketPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mwz" | "multiwoz" => Ok(Self::MultiWoz),
            "m2m" => Ok(Self::M2m),
            "woz" => Ok(Self::Woz),
            other => Err(Error::Validation(format!("unknown bucket preset `{other}`"))),
        }
    }
}

impl BucketPreset {
    pub fn source(self) -> &'static str {
        match self {
            Self::MultiWoz => include_str!("../../resources/buckets/mwz.json"),
            Self::M2m => include_str!("../../resources/buckets/m2m.json"),
            Self::Woz => include_str!("../../resources/buckets/woz.json"),
        }
    }

    pub fn specs(self) -> Vec<BucketSpec> {
        BucketSpec::parse(self.source(), "bundled preset").expect("bundled bucket presets are valid")
    }
}

pub type TurnKey = (String, usize);

/// Maps every turn of the corpus to the index of its range under `spec`.
pub fn bucketize(corpus: &Corpus, spec: &BucketSpec) -> BTreeMap<TurnKey, usize> {
    let mut out = BTreeMap::new();
    for dialogue in corpus.dialogues() {
        let n = dialogue.n_turns();
        match spec.axis {
            Axis::Step => {
                let table = step_table(dialogue, corpus.schema());
                for (row, turn) in table.iter().zip(1..) {
                    let steps = row.iter().copied().max().unwrap_or(0);
                    out.insert((dialogue.dialogue_id.clone(), turn), spec.locate(steps as f64));
                }
            }
            Axis::Turn | Axis::Len => {
                let x = if spec.axis == Axis::Turn {
                    n as f64
                } else {
                    dialogue.avg_utterance_len()
                };
                let bucket = spec.locate(x);
                for turn in 1..=n {
                    out.insert((dialogue.dialogue_id.clone(), turn), bucket);
                }
            }
        }
    }
    out
}
