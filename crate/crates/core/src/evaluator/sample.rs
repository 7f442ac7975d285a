use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Split};
use crate::{Error, Result};

/// Number of train dialogues kept at `fraction`: the ceiling of
/// `fraction * n_train`, at least 1. Products within 1e-9 of an integer are
/// taken as that integer so that e.g. 0.07 * 100 keeps 7, not 8.
pub fn sample_size(fraction: f64, n_train: usize) -> usize {
    let x = fraction * n_train as f64;
    let k = if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else {
        x.ceil()
    };
    (k as usize).clamp(1, n_train.max(1))
}

/// Keeps a seeded random subset of whole train dialogues; dev and test are
/// untouched. Ids are sorted before shuffling, so the result depends only on
/// the corpus contents, `fraction` and `seed`.
pub fn low_resource_sample(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let mut ids: Vec<&str> = corpus.split(Split::Train).map(|d| d.dialogue_id.as_str()).collect();
    if ids.is_empty() {
        return Err(Error::Validation("train split is empty".into()));
    }
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let keep: std::collections::HashSet<&str> = ids
        .into_iter()
        .take(sample_size(fraction, corpus.split(Split::Train).count()))
        .collect();
    let dialogues = corpus
        .dialogues()
        .iter()
        .filter(|d| d.split != Split::Train || keep.contains(d.dialogue_id.as_str()))
        .cloned()
        .collect();
    Ok(corpus.with_dialogues(dialogues))
}
