//! Classification metrics, multi-seed aggregation, inter-annotator
//! agreement, toxicity thresholding, and FL-vs-baseline deltas.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::data::BinaryLabel;
use crate::federation::RunReport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    LengthMismatch { expected: usize, got: usize },
    EmptyInput,
    ClientMismatch { detail: String },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: {expected} vs {got}")
            }
            EvalError::EmptyInput => write!(f, "empty input"),
            EvalError::ClientMismatch { detail } => write!(f, "client mismatch: {detail}"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Confusion counts and derived metrics for one class.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

/// Binary evaluation result; `macro_f1` is the unweighted mean of the two
/// per-class F1 scores.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EvalResult {
    pub macro_f1: f64,
    pub non_hateful: ClassMetrics,
    pub hateful: ClassMetrics,
}

fn class_metrics(gold: &[BinaryLabel], pred: &[BinaryLabel], class: BinaryLabel) -> ClassMetrics {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (&g, &p) in gold.iter().zip(pred) {
        match (g == class, p == class) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        true_pos: tp,
        false_pos: fp,
        false_neg: fn_,
        true_neg: tn,
    }
}

/// Macro-averaged F1 over the two binary classes.
///
/// A class with a zero precision-plus-recall denominator contributes an F1
/// of 0, so a class absent from both gold and predictions drags the macro
/// average down rather than being skipped.
pub fn macro_f1(gold: &[BinaryLabel], pred: &[BinaryLabel]) -> Result<EvalResult, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let non_hateful = class_metrics(gold, pred, BinaryLabel::NonHateful);
    let hateful = class_metrics(gold, pred, BinaryLabel::Hateful);
    Ok(EvalResult {
        macro_f1: (non_hateful.f1 + hateful.f1) / 2.0,
        non_hateful,
        hateful,
    })
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values
        .iter()
        .map(|v| {
            let d = v - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Some((mean, libm::sqrt(variance)))
}

/// Mean and population std of macro-F1 across seed results.
pub fn aggregate_seeds(results: &[EvalResult]) -> Result<(f64, f64), EvalError> {
    let values: Vec<f64> = results.iter().map(|r| r.macro_f1).collect();
    mean_std(&values).ok_or(EvalError::EmptyInput)
}

/// Cohen's kappa: `(p_o - p_e) / (1 - p_e)` with expected agreement from
/// marginal products. Defined as 1 when `p_e` is 1 (both annotators constant
/// and equal).
pub fn cohens_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;

    let mut count_a: BTreeMap<&T, usize> = BTreeMap::new();
    let mut count_b: BTreeMap<&T, usize> = BTreeMap::new();
    for x in a {
        *count_a.entry(x).or_insert(0) += 1;
    }
    for y in b {
        *count_b.entry(y).or_insert(0) += 1;
    }
    let mut expected = 0.0;
    for (category, &ca) in &count_a {
        if let Some(&cb) = count_b.get(category) {
            expected += (ca as f64 / n) * (cb as f64 / n);
        }
    }
    if (1.0 - expected).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Krippendorff's alpha for two annotators, nominal data, no missing values,
/// via the coincidence-matrix formulation. Defined as 1 when the expected
/// disagreement is 0 (all values identical).
pub fn krippendorff_alpha<T: Ord>(a: &[T], b: &[T]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    // Each unit contributes the ordered pairs (a,b) and (b,a) with weight
    // 1/(m_u - 1) = 1, so the coincidence matrix totals 2 per unit.
    let mut coincidence: BTreeMap<(&T, &T), f64> = BTreeMap::new();
    let mut totals: BTreeMap<&T, f64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *coincidence.entry((x, y)).or_insert(0.0) += 1.0;
        *coincidence.entry((y, x)).or_insert(0.0) += 1.0;
        *totals.entry(x).or_insert(0.0) += 1.0;
        *totals.entry(y).or_insert(0.0) += 1.0;
    }
    let n: f64 = totals.values().sum();
    let disagreement_observed: f64 = coincidence
        .iter()
        .filter(|((c, k), _)| c != k)
        .map(|(_, &count)| count)
        .sum::<f64>()
        / n;
    let mut disagreement_expected = 0.0;
    for (c, &nc) in &totals {
        for (k, &nk) in &totals {
            if c != k {
                disagreement_expected += nc * nk;
            }
        }
    }
    disagreement_expected /= n * (n - 1.0);
    if disagreement_expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - disagreement_observed / disagreement_expected)
}

/// Agreement metrics over one cross-annotated unit set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub alpha: f64,
    pub n_units: usize,
}

pub fn agreement_report<T: Ord>(a: &[T], b: &[T]) -> Result<AgreementReport, EvalError> {
    Ok(AgreementReport {
        kappa: cohens_kappa(a, b)?,
        alpha: krippendorff_alpha(a, b)?,
        n_units: a.len(),
    })
}

/// Hateful iff the score reaches the threshold.
pub fn classify_toxicity(score: f64, threshold: f64) -> BinaryLabel {
    if score >= threshold {
        BinaryLabel::Hateful
    } else {
        BinaryLabel::NonHateful
    }
}

/// Percentages of a corpus falling in the four
/// (hateful / non-hateful) x (profanity / no-profanity) cells.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CellBlock {
    pub hateful_profane: f64,
    pub hateful_clean: f64,
    pub non_hateful_profane: f64,
    pub non_hateful_clean: f64,
}

impl CellBlock {
    pub fn sum(&self) -> f64 {
        self.hateful_profane
            + self.hateful_clean
            + self.non_hateful_profane
            + self.non_hateful_clean
    }

    pub fn hateful_share(&self) -> f64 {
        self.hateful_profane + self.hateful_clean
    }

    /// Half-up rounding to two decimals, for presentation only.
    pub fn rounded2(&self) -> CellBlock {
        fn r2(x: f64) -> f64 {
            libm::floor(x * 100.0 + 0.5) / 100.0
        }
        CellBlock {
            hateful_profane: r2(self.hateful_profane),
            hateful_clean: r2(self.hateful_clean),
            non_hateful_profane: r2(self.non_hateful_profane),
            non_hateful_clean: r2(self.non_hateful_clean),
        }
    }
}

/// Gold-label cell percentages plus one predicted block per threshold.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdTable {
    pub gold: CellBlock,
    pub per_threshold: Vec<(f64, CellBlock)>,
}

fn cell_block<F: Fn(usize) -> BinaryLabel>(
    items: &[(BinaryLabel, bool)],
    label_of: F,
) -> CellBlock {
    let total = items.len() as f64;
    let mut counts = [0usize; 4];
    for (i, &(_, profane)) in items.iter().enumerate() {
        let hateful = label_of(i) == BinaryLabel::Hateful;
        let cell = match (hateful, profane) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[cell] += 1;
    }
    CellBlock {
        hateful_profane: counts[0] as f64 / total * 100.0,
        hateful_clean: counts[1] as f64 / total * 100.0,
        non_hateful_profane: counts[2] as f64 / total * 100.0,
        non_hateful_clean: counts[3] as f64 / total * 100.0,
    }
}

/// Build the threshold-analysis table from gold labels, profanity flags,
/// and per-item toxicity scores. Percentages are kept at full precision;
/// rounding happens at presentation.
pub fn threshold_table(
    items: &[(BinaryLabel, bool)],
    scores: &[f64],
    thresholds: &[f64],
) -> Result<ThresholdTable, EvalError> {
    if items.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            expected: items.len(),
            got: scores.len(),
        });
    }
    if items.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let gold = cell_block(items, |i| items[i].0);
    let per_threshold = thresholds
        .iter()
        .map(|&t| (t, cell_block(items, |i| classify_toxicity(scores[i], t))))
        .collect();
    Ok(ThresholdTable {
        gold,
        per_threshold,
    })
}

/// One FL-minus-baseline comparison cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DeltaEntry {
    pub client: String,
    pub shot_count: Option<u32>,
    pub baseline: String,
    pub fl_mean_f1: f64,
    pub baseline_mean_f1: f64,
    pub delta: f64,
    /// Positive deltas (FL improves on the baseline) are flagged.
    pub improvement: bool,
}

#[derive(Debug, Clone, PartialEq, Default, serde::Serialize)]
pub struct DeltaTable {
    pub entries: Vec<DeltaEntry>,
}

/// Per-client mean-F1 differences between an FL report and named baselines.
///
/// Baselines must cover the same clients; a baseline bound to a specific
/// shot count must match the FL report's (shot-agnostic baselines such as a
/// toxicity API pass with `shot_count = None`).
pub fn delta_table(
    fl: &RunReport,
    baselines: &BTreeMap<String, RunReport>,
) -> Result<DeltaTable, EvalError> {
    let mut entries = Vec::new();
    for (name, baseline) in baselines {
        if baseline.shot_count.is_some() && baseline.shot_count != fl.shot_count {
            return Err(EvalError::ClientMismatch {
                detail: alloc::format!(
                    "baseline '{name}' is for shot count {:?}, FL report is {:?}",
                    baseline.shot_count,
                    fl.shot_count
                ),
            });
        }
        for (client, summary) in &fl.per_client {
            let base =
                baseline
                    .per_client
                    .get(client)
                    .ok_or_else(|| EvalError::ClientMismatch {
                        detail: alloc::format!("client '{client}' missing from baseline '{name}'"),
                    })?;
            let delta = summary.mean_f1 - base.mean_f1;
            entries.push(DeltaEntry {
                client: client.clone(),
                shot_count: fl.shot_count,
                baseline: name.clone(),
                fl_mean_f1: summary.mean_f1,
                baseline_mean_f1: base.mean_f1,
                delta,
                improvement: delta > 0.0,
            });
        }
        for client in baseline.per_client.keys() {
            if !fl.per_client.contains_key(client) {
                return Err(EvalError::ClientMismatch {
                    detail: alloc::format!("client '{client}' missing from FL report"),
                });
            }
        }
    }
    Ok(DeltaTable { entries })
}
