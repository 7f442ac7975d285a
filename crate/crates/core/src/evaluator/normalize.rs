use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Canonical value for "slot has no value".
pub const NONE_VALUE: &str = "none";
/// Canonical value for "user has no preference".
pub const DONTCARE_VALUE: &str = "dontcare";

/// How raw slot values are canonicalised before comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationPolicy {
    pub lowercase: bool,
    pub collapse_whitespace: bool,
    pub strip_punctuation_edges: bool,
    pub none_aliases: BTreeSet<String>,
    pub dontcare_aliases: BTreeSet<String>,
    /// Similarity threshold for non-categorical slots. `None` means exact match.
    pub fuzzy_ratio_threshold: Option<f64>,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self {
            lowercase: true,
            collapse_whitespace: true,
            strip_punctuation_edges: true,
            none_aliases: ["none", ""].iter().map(|s| s.to_string()).collect(),
            dontcare_aliases: ["dontcare", "dont care", "don't care"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            fuzzy_ratio_threshold: None,
        }
    }
}

impl NormalizationPolicy {
    pub fn validate(&self) -> crate::Result<()> {
        if let Some(t) = self.fuzzy_ratio_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(crate::Error::Validation(format!(
                    "fuzzy_ratio_threshold must lie in (0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }

    fn surface(&self, raw: &str) -> String {
        let mut s = if self.lowercase {
            raw.to_lowercase()
        } else {
            raw.to_string()
        };
        if self.strip_punctuation_edges {
            s = s
                .trim_matches(|c: char| c.is_whitespace() || is_punctuation(c))
                .to_string();
        }
        if self.collapse_whitespace {
            s = s.split_whitespace().collect::<Vec<_>>().join(" ");
        }
        s
    }
}

/// A policy with its alias lists pre-normalized, for repeated use.
#[derive(Debug, Clone)]
pub(crate) struct Normalizer {
    policy: NormalizationPolicy,
    none: HashSet<String>,
    dontcare: HashSet<String>,
}

impl Normalizer {
    pub(crate) fn new(policy: &NormalizationPolicy) -> Self {
        let surfaced = |aliases: &BTreeSet<String>, canonical: &str| {
            aliases
                .iter()
                .map(|a| policy.surface(a))
                .chain(std::iter::once(canonical.to_string()))
                .collect()
        };
        Self {
            none: surfaced(&policy.none_aliases, NONE_VALUE),
            dontcare: surfaced(&policy.dontcare_aliases, DONTCARE_VALUE),
            policy: policy.clone(),
        }
    }

    /// Normalizer for the default policy, built once.
    pub(crate) fn default_policy() -> &'static Normalizer {
        static DEFAULT: OnceLock<Normalizer> = OnceLock::new();
        DEFAULT.get_or_init(|| Normalizer::new(&NormalizationPolicy::default()))
    }

    pub(crate) fn normalize(&self, raw: &str) -> String {
        let s = self.policy.surface(raw);
        if self.none.contains(&s) {
            NONE_VALUE.to_string()
        } else if self.dontcare.contains(&s) {
            DONTCARE_VALUE.to_string()
        } else {
            s
        }
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2026}' | '\u{00BF}' | '\u{00A1}'
        )
}

/// Canonical form of a slot value under `policy`. Alias spellings collapse to
/// [`NONE_VALUE`] or [`DONTCARE_VALUE`].
pub fn normalize_value(raw: &str, policy: &NormalizationPolicy) -> String {
    Normalizer::new(policy).normalize(raw)
}

/// Normalized edit similarity in [0, 1]; 1 means identical.
pub fn similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}
