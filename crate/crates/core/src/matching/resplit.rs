//! Train/test resplitting with a bound on lexical overlap.
//!
//! For a split produced with bound `n`, every non-stopword token of every
//! test head occurs in at most `n` training heads.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{GroupLabels, MatcherDataset};
use super::MatchError;
use crate::relations::RelationGroup;
use crate::text::{content_tokens, is_stopword, tokenize, STOPWORDS_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct ResplitConfig {
    /// Maximum number of training heads any test non-stopword may occur in.
    pub n: usize,
    pub seed: u64,
    /// Upper bound on the test set size as a fraction of the pool.
    pub test_fraction: f64,
    /// Only add whole rounds (one head per group), stopping at the first
    /// round that cannot be completed. When false, a group without an
    /// admissible head drops out and selection continues for the rest.
    pub strict_balance: bool,
    pub stopwords_version: String,
}

impl Default for ResplitConfig {
    fn default() -> Self {
        Self {
            n: 0,
            seed: 0,
            test_fraction: 0.1,
            strict_balance: true,
            stopwords_version: STOPWORDS_VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub overlap_without_stopwords: f64,
    pub overlap_with_stopwords: f64,
    pub n_train: usize,
    pub n_test: usize,
}

fn distinct(tokens: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    tokens.into_iter().filter(|t| seen.insert(t.clone())).collect()
}

/// Greedy rarest-first construction of a group-balanced test set.
///
/// Heads are ranked by the largest pool frequency among their non-stopwords
/// (ties broken by a seeded shuffle). Selection is round-robin over the
/// groups; within a round a head is only taken if none of its groups has
/// been served yet. A head is admissible only if, once it leaves the
/// training side, each of its non-stopwords remains in at most `n` training
/// heads. See [`ResplitConfig::strict_balance`] for what happens when a
/// group runs out of admissible heads.
pub fn resplit_dataset(
    pool: &MatcherDataset,
    config: &ResplitConfig,
) -> Result<(MatcherDataset, MatcherDataset), MatchError> {
    if pool.is_empty() {
        return Err(MatchError::InvalidDataset("resplit pool is empty".into()));
    }
    if config.stopwords_version != STOPWORDS_VERSION {
        return Err(MatchError::InvalidDataset(format!(
            "stopword list `{}` is not available (have `{STOPWORDS_VERSION}`)",
            config.stopwords_version
        )));
    }
    let examples = pool.examples();
    let tokens: Vec<Vec<String>> = examples
        .iter()
        .map(|ex| distinct(content_tokens(&ex.head)))
        .collect();

    let mut train_count: HashMap<&str, usize> = HashMap::new();
    for toks in &tokens {
        for t in toks {
            *train_count.entry(t.as_str()).or_default() += 1;
        }
    }

    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let rarity: Vec<usize> = tokens
        .iter()
        .map(|toks| toks.iter().map(|t| train_count[t.as_str()]).max().unwrap_or(0))
        .collect();
    // stable sort keeps the shuffled order among ties
    order.sort_by_key(|&i| rarity[i]);

    let mut active: Vec<RelationGroup> = RelationGroup::MATCHABLE
        .into_iter()
        .filter(|g| examples.iter().any(|ex| ex.labels.get(*g)))
        .collect();
    let target = ((config.test_fraction.clamp(0.0, 1.0) * examples.len() as f64).floor() as usize).max(1);

    let mut in_test = vec![false; examples.len()];
    let mut n_test = 0usize;
    'rounds: while n_test < target && !active.is_empty() {
        if config.strict_balance && n_test + active.len() > target {
            break;
        }
        let mut needed = GroupLabels::from_groups(active.iter().copied());
        let mut picked: Vec<usize> = Vec::new();
        let mut retired = Vec::new();
        for &g in &active {
            if n_test + picked.len() == target {
                break;
            }
            if !needed.get(g) {
                continue;
            }
            let candidate = order.iter().copied().find(|&i| {
                let labels = examples[i].labels;
                !in_test[i]
                    && labels.get(g)
                    && labels.is_subset(&needed)
                    && tokens[i]
                        .iter()
                        .all(|t| train_count[t.as_str()] - 1 <= config.n)
            });
            let Some(i) = candidate else {
                if config.strict_balance {
                    for i in picked {
                        in_test[i] = false;
                        for t in &tokens[i] {
                            *train_count.get_mut(t.as_str()).expect("counted") += 1;
                        }
                    }
                    break 'rounds;
                }
                retired.push(g);
                continue;
            };
            in_test[i] = true;
            for t in &tokens[i] {
                *train_count.get_mut(t.as_str()).expect("counted") -= 1;
            }
            for lg in examples[i].labels.groups() {
                needed.set(lg, false);
            }
            picked.push(i);
        }
        n_test += picked.len();
        active.retain(|g| !retired.contains(g));
    }

    if n_test == 0 {
        return Err(MatchError::Infeasible(format!(
            "no group-balanced test set satisfies the overlap bound n = {}",
            config.n
        )));
    }
    let (test, train): (Vec<_>, Vec<_>) = examples
        .iter()
        .cloned()
        .enumerate()
        .partition(|(i, _)| in_test[*i]);
    let strip = |v: Vec<(usize, _)>| v.into_iter().map(|(_, e)| e).collect::<Vec<_>>();
    Ok((MatcherDataset::new(strip(train))?, MatcherDataset::new(strip(test))?))
}

/// Fraction of test heads sharing at least one token with some training
/// head, with and without stopwords.
pub fn compute_overlap(train: &MatcherDataset, test: &MatcherDataset) -> Result<OverlapReport, MatchError> {
    if test.is_empty() {
        return Err(MatchError::InvalidDataset("test set is empty".into()));
    }
    let train_vocab: HashSet<String> = train.iter().flat_map(|ex| tokenize(&ex.head)).collect();
    let mut with = 0usize;
    let mut without = 0usize;
    for ex in test.iter() {
        let toks = tokenize(&ex.head);
        if toks.iter().any(|t| train_vocab.contains(t)) {
            with += 1;
        }
        if toks
            .iter()
            .any(|t| !is_stopword(t) && train_vocab.contains(t))
        {
            without += 1;
        }
    }
    let n = test.len() as f64;
    Ok(OverlapReport {
        overlap_without_stopwords: without as f64 / n,
        overlap_with_stopwords: with as f64 / n,
        n_train: train.len(),
        n_test: test.len(),
    })
}

/// Per-group head counts in a dataset, in (physical, social, event) order.
pub fn group_counts(ds: &MatcherDataset) -> [usize; 3] {
    let mut counts = [0; 3];
    for ex in ds.iter() {
        for (c, b) in counts.iter_mut().zip(ex.labels.as_array()) {
            *c += b as usize;
        }
    }
    counts
}
