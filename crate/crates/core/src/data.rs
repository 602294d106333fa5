//! Labeled-corpus types, leakage-filtered split construction, few-shot
//! sampling, cross-annotation intersection, and descriptive statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub enum DataError {
    DuplicateId {
        id: String,
    },
    EmptyText {
        id: String,
    },
    UnknownTestId {
        id: String,
    },
    InvalidPolicy {
        reason: String,
    },
    /// A split could not be filled to the requested size.
    InsufficientCandidates {
        split: &'static str,
        needed: usize,
        found: usize,
    },
    NotEnoughData {
        requested: usize,
        available: usize,
    },
    IdMismatch {
        detail: String,
    },
    EmptyCorpus,
    /// Post-hoc leakage check failed.
    LeakageViolation {
        split: &'static str,
        id_a: String,
        id_b: String,
        ratio: f64,
        limit: f64,
    },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::DuplicateId { id } => write!(f, "duplicate id '{id}'"),
            DataError::EmptyText { id } => write!(f, "empty text for id '{id}'"),
            DataError::UnknownTestId { id } => write!(f, "test id '{id}' not in corpus"),
            DataError::InvalidPolicy { reason } => write!(f, "invalid split policy: {reason}"),
            DataError::InsufficientCandidates {
                split,
                needed,
                found,
            } => write!(
                f,
                "insufficient candidates for {split} split: needed {needed}, found {found}"
            ),
            DataError::NotEnoughData {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} examples, only {available} available"
            ),
            DataError::IdMismatch { detail } => write!(f, "id mismatch: {detail}"),
            DataError::EmptyCorpus => write!(f, "empty corpus"),
            DataError::LeakageViolation {
                split,
                id_a,
                id_b,
                ratio,
                limit,
            } => write!(
                f,
                "leakage in {split} split: ratio({id_a}, {id_b}) = {ratio:.4} >= {limit}"
            ),
        }
    }
}

impl core::error::Error for DataError {}

/// Sentiment polarity of an example; with the profanity flag it identifies
/// one of the six corpus categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Neutral,
    Hateful,
}

impl Polarity {
    pub fn parse(s: &str) -> Option<Polarity> {
        match s {
            "positive" => Some(Polarity::Positive),
            "neutral" => Some(Polarity::Neutral),
            "hateful" => Some(Polarity::Hateful),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Neutral => "neutral",
            Polarity::Hateful => "hateful",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary classification target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BinaryLabel {
    NonHateful,
    Hateful,
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinaryLabel::NonHateful => "non_hateful",
            BinaryLabel::Hateful => "hateful",
        })
    }
}

/// Positive and neutral merge into the non-hateful class.
pub fn to_binary_label(polarity: Polarity) -> BinaryLabel {
    match polarity {
        Polarity::Hateful => BinaryLabel::Hateful,
        Polarity::Positive | Polarity::Neutral => BinaryLabel::NonHateful,
    }
}

/// One corpus sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    /// ISO 639-3 code.
    pub language: String,
    pub target_group: String,
    pub polarity: Polarity,
    pub profanity: bool,
    pub source: Option<String>,
    pub ai_generated: bool,
}

impl LabeledExample {
    pub fn binary_label(&self) -> BinaryLabel {
        to_binary_label(self.polarity)
    }
}

/// Check corpus invariants: unique ids, non-empty trimmed text.
pub fn validate_corpus(corpus: &[LabeledExample]) -> Result<(), DataError> {
    let mut seen = BTreeSet::new();
    for example in corpus {
        if example.text.trim().is_empty() {
            return Err(DataError::EmptyText {
                id: example.id.clone(),
            });
        }
        if !seen.insert(example.id.as_str()) {
            return Err(DataError::DuplicateId {
                id: example.id.clone(),
            });
        }
    }
    Ok(())
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let (short, long) = if a.len() <= b.len() {
        (&a, &b)
    } else {
        (&b, &a)
    };
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (j, &cl) in long.iter().enumerate() {
        let mut prev_diag = row[0];
        row[0] = j + 1;
        for (i, &cs) in short.iter().enumerate() {
            let prev = row[i + 1];
            row[i + 1] = if cs == cl {
                prev_diag
            } else {
                1 + prev_diag.min(prev).min(row[i])
            };
            prev_diag = prev;
        }
    }
    row[short.len()]
}

/// Similarity in `[0, 1]`: `1 - distance / max(|a|, |b|)` over chars.
///
/// Two empty strings are identical (`1.0`).
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let la = a.chars().count();
    let lb = b.chars().count();
    let max = la.max(lb);
    if max == 0 {
        return 1.0;
    }
    1.0 - levenshtein_distance(a, b) as f64 / max as f64
}

/// Quick upper bound on the ratio from lengths alone: the distance is at
/// least the length difference, so the ratio is at most `min / max`.
fn ratio_upper_bound(len_a: usize, len_b: usize) -> f64 {
    let max = len_a.max(len_b);
    if max == 0 {
        return 1.0;
    }
    len_a.min(len_b) as f64 / max as f64
}

/// Thresholds and sizes for split construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPolicy {
    /// Strict upper bound on a dev sentence's ratio against any test sentence.
    pub dev_max_ratio: f64,
    /// Strict upper bound on a train sentence's ratio against any test or
    /// dev sentence.
    pub train_max_ratio: f64,
    pub dev_size: usize,
}

impl SplitPolicy {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, value) in [
            ("dev_max_ratio", self.dev_max_ratio),
            ("train_max_ratio", self.train_max_ratio),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(DataError::InvalidPolicy {
                    reason: alloc::format!("{name} = {value} outside (0, 1]"),
                });
            }
        }
        Ok(())
    }
}

/// Disjoint train/dev/test id lists.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitSet {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

fn max_ratio_below(text: &str, others: &[&str], limit: f64) -> bool {
    let len = text.chars().count();
    for other in others {
        if ratio_upper_bound(len, other.chars().count()) < limit {
            continue;
        }
        if levenshtein_ratio(text, other) >= limit {
            return false;
        }
    }
    true
}

/// Build leakage-filtered splits around an externally supplied test set.
///
/// Dev sentences are drawn by seeded shuffle from the non-test pool,
/// accepting a candidate only while its similarity against every test
/// sentence stays below `dev_max_ratio`; train keeps every remaining
/// candidate whose similarity against all test and dev sentences stays
/// below `train_max_ratio`.
pub fn build_splits(
    corpus: &[LabeledExample],
    test_ids: &[String],
    policy: &SplitPolicy,
    seed: u64,
) -> Result<SplitSet, DataError> {
    policy.validate()?;
    let by_id: BTreeMap<&str, &LabeledExample> =
        corpus.iter().map(|e| (e.id.as_str(), e)).collect();
    let test_set: BTreeSet<&str> = test_ids.iter().map(String::as_str).collect();
    for id in &test_set {
        if !by_id.contains_key(id) {
            return Err(DataError::UnknownTestId { id: id.to_string() });
        }
    }
    let test_texts: Vec<&str> = test_ids
        .iter()
        .map(|id| by_id[id.as_str()].text.as_str())
        .collect();

    let mut candidates: Vec<&LabeledExample> = corpus
        .iter()
        .filter(|e| !test_set.contains(e.id.as_str()))
        .collect();

    let mut shuffled = candidates.clone();
    let mut rng = Rng::from_seed(derive_seed(seed, "dev-shuffle", 0));
    rng.shuffle(&mut shuffled);

    let mut dev: Vec<String> = Vec::new();
    let mut dev_texts: Vec<&str> = Vec::new();
    for candidate in &shuffled {
        if dev.len() == policy.dev_size {
            break;
        }
        if max_ratio_below(&candidate.text, &test_texts, policy.dev_max_ratio) {
            dev.push(candidate.id.clone());
            dev_texts.push(candidate.text.as_str());
        }
    }
    if dev.len() < policy.dev_size {
        return Err(DataError::InsufficientCandidates {
            split: "dev",
            needed: policy.dev_size,
            found: dev.len(),
        });
    }

    let dev_ids: BTreeSet<&str> = dev.iter().map(String::as_str).collect();
    candidates.retain(|e| !dev_ids.contains(e.id.as_str()));
    let mut train = Vec::new();
    for candidate in candidates {
        if max_ratio_below(&candidate.text, &test_texts, policy.train_max_ratio)
            && max_ratio_below(&candidate.text, &dev_texts, policy.train_max_ratio)
        {
            train.push(candidate.id.clone());
        }
    }

    Ok(SplitSet {
        train,
        dev,
        test: test_ids.to_vec(),
    })
}

/// Exhaustive all-pairs re-check of a split's leakage invariants.
pub fn verify_split_leakage(
    corpus: &[LabeledExample],
    split: &SplitSet,
    policy: &SplitPolicy,
) -> Result<(), DataError> {
    let by_id: BTreeMap<&str, &str> = corpus
        .iter()
        .map(|e| (e.id.as_str(), e.text.as_str()))
        .collect();
    let text = |id: &String| -> Result<&str, DataError> {
        by_id
            .get(id.as_str())
            .copied()
            .ok_or_else(|| DataError::UnknownTestId { id: id.clone() })
    };

    for dev_id in &split.dev {
        for test_id in &split.test {
            let ratio = levenshtein_ratio(text(dev_id)?, text(test_id)?);
            if ratio >= policy.dev_max_ratio {
                return Err(DataError::LeakageViolation {
                    split: "dev",
                    id_a: dev_id.clone(),
                    id_b: test_id.clone(),
                    ratio,
                    limit: policy.dev_max_ratio,
                });
            }
        }
    }
    for train_id in &split.train {
        for other_id in split.test.iter().chain(&split.dev) {
            let ratio = levenshtein_ratio(text(train_id)?, text(other_id)?);
            if ratio >= policy.train_max_ratio {
                return Err(DataError::LeakageViolation {
                    split: "train",
                    id_a: train_id.clone(),
                    id_b: other_id.clone(),
                    ratio,
                    limit: policy.train_max_ratio,
                });
            }
        }
    }
    Ok(())
}

/// Seeded label-balanced sample of `n` examples.
///
/// When both classes are available each gets `n/2` rounded up or down (the
/// seeded stream decides which side takes the odd one); a class without
/// enough examples is topped up from the other. With a single class present
/// the sample is unconstrained.
pub fn sample_few_shot(
    train: &[LabeledExample],
    n: usize,
    seed: u64,
) -> Result<Vec<LabeledExample>, DataError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if n > train.len() {
        return Err(DataError::NotEnoughData {
            requested: n,
            available: train.len(),
        });
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = Rng::from_seed(derive_seed(seed, "few-shot", 0));
    rng.shuffle(&mut order);

    let hateful: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| train[i].binary_label() == BinaryLabel::Hateful)
        .collect();
    let non_hateful: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| train[i].binary_label() == BinaryLabel::NonHateful)
        .collect();

    let picked: Vec<usize> = if hateful.is_empty() || non_hateful.is_empty() {
        order.into_iter().take(n).collect()
    } else {
        let ceil = n - n / 2;
        let floor = n / 2;
        let (quota_h, quota_n) = if rng.next_below(2) == 0 {
            (ceil, floor)
        } else {
            (floor, ceil)
        };
        let take_h = quota_h.min(hateful.len());
        let take_n = quota_n.min(non_hateful.len());
        let mut picked: Vec<usize> = hateful.iter().take(take_h).copied().collect();
        picked.extend(non_hateful.iter().take(take_n).copied());
        // Top up a short class from the other's remainder.
        if picked.len() < n {
            let missing = n - picked.len();
            let extra = hateful
                .iter()
                .skip(take_h)
                .chain(non_hateful.iter().skip(take_n));
            picked.extend(extra.take(missing).copied());
        }
        picked
    };

    Ok(picked.into_iter().map(|i| train[i].clone()).collect())
}

/// Keep the units whose binary labels agree across two annotation passes.
///
/// Inputs must cover the same id set; output follows annotator A's order and
/// labels.
pub fn intersect_agreed(
    annotations_a: &[LabeledExample],
    annotations_b: &[LabeledExample],
) -> Result<Vec<LabeledExample>, DataError> {
    if annotations_a.len() != annotations_b.len() {
        return Err(DataError::IdMismatch {
            detail: alloc::format!(
                "annotator A has {} units, annotator B has {}",
                annotations_a.len(),
                annotations_b.len()
            ),
        });
    }
    let mut by_id: BTreeMap<&str, &LabeledExample> = BTreeMap::new();
    for example in annotations_b {
        if by_id.insert(example.id.as_str(), example).is_some() {
            return Err(DataError::DuplicateId {
                id: example.id.clone(),
            });
        }
    }
    let mut agreed = Vec::new();
    for a in annotations_a {
        let b = by_id.remove(a.id.as_str()).ok_or(DataError::IdMismatch {
            detail: alloc::format!("id '{}' missing from annotator B", a.id),
        })?;
        if a.binary_label() == b.binary_label() {
            agreed.push(a.clone());
        }
    }
    Ok(agreed)
}

/// Descriptive corpus statistics over whitespace tokens.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub token_count: usize,
    pub vocab_size: usize,
    pub avg_sentence_len: f64,
    pub max_sentence_len: usize,
    pub min_sentence_len: usize,
    /// Population standard deviation of sentence lengths.
    pub std_sentence_len: f64,
    pub avg_word_len: f64,
    pub type_token_ratio: f64,
    /// Tokens occurring exactly once, over the total token count.
    pub hapax_ratio: f64,
}

pub fn corpus_stats(corpus: &[LabeledExample]) -> Result<CorpusStats, DataError> {
    if corpus.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let mut token_count = 0usize;
    let mut char_total = 0usize;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut lengths = Vec::with_capacity(corpus.len());
    for example in corpus {
        let mut len = 0usize;
        for token in example.text.split_whitespace() {
            len += 1;
            char_total += token.chars().count();
            *counts.entry(token).or_insert(0) += 1;
        }
        token_count += len;
        lengths.push(len);
    }
    let n = lengths.len() as f64;
    let avg = token_count as f64 / n;
    // Integer sums keep the result independent of sentence order.
    let sum: u128 = token_count as u128;
    let sum_sq: u128 = lengths.iter().map(|&l| (l as u128) * (l as u128)).sum();
    let count = lengths.len() as u128;
    let variance = (count * sum_sq - sum * sum) as f64 / (count * count) as f64;
    let hapax = counts.values().filter(|&&c| c == 1).count();

    Ok(CorpusStats {
        sentence_count: corpus.len(),
        token_count,
        vocab_size: counts.len(),
        avg_sentence_len: avg,
        max_sentence_len: lengths.iter().copied().max().unwrap_or(0),
        min_sentence_len: lengths.iter().copied().min().unwrap_or(0),
        std_sentence_len: libm::sqrt(variance),
        avg_word_len: if token_count == 0 {
            0.0
        } else {
            char_total as f64 / token_count as f64
        },
        type_token_ratio: if token_count == 0 {
            0.0
        } else {
            counts.len() as f64 / token_count as f64
        },
        hapax_ratio: if token_count == 0 {
            0.0
        } else {
            hapax as f64 / token_count as f64
        },
    })
}
