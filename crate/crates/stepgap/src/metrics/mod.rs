//! Evaluation metrics and diagnostics over step verdicts.
//!
//! Everything operates on flat [`StepPrediction`] lists. The binary
//! projection (gap vs no-gap) drives step precision/recall/F1 and balanced
//! accuracy; the typed labels drive per-class and averaged F1 plus Cohen's κ;
//! question-level rollups (Q-F1, the answer/gap cross-tab, first-gap
//! localization) use per-question correctness supplied alongside.
//!
//! Two ground rules hold everywhere:
//!
//! * unchecked predictions are excluded from every metric and tallied
//!   separately, and
//! * a metric whose denominator is empty is reported as an explicit null,
//!   never silently zero.

mod bootstrap;
mod report;
mod trap;

pub use bootstrap::bootstrap_ci;
pub use report::{compute_report, render_text, MetricsReport, ReportConfig, StepCounts};
pub use trap::{qf1_trap_curve, trap_experiment, TrapReport, TrapRow};

use crate::gap::GapType;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("label lists have different lengths: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("stratum at w={target_w} needs {needed} questions but only {available} are available")]
    InsufficientQuestions {
        target_w: f64,
        needed: &'static str,
        available: usize,
    },
}

/// One checked step: what the checker said and, when known, what the gold
/// annotation says.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPrediction {
    pub question_id: String,
    pub step_index: usize,
    pub predicted: GapType,
    /// Gold label when the benchmark carries one; metrics that need gold
    /// skip unlabeled steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<GapType>,
    /// True when a judge failure prevented checking this step.
    #[serde(default)]
    pub unchecked: bool,
}

/// Per-question answer correctness, keyed by question id. `None` marks
/// questions whose correctness is unknown; they are excluded and tallied.
pub type CorrectnessMap = BTreeMap<String, Option<bool>>;

fn checked(preds: &[StepPrediction]) -> impl Iterator<Item = &StepPrediction> {
    preds.iter().filter(|p| !p.unchecked)
}

/// Count of predictions excluded for being unchecked.
pub fn unchecked_tally(preds: &[StepPrediction]) -> usize {
    preds.iter().filter(|p| p.unchecked).count()
}

/// Binary confusion counts plus the derived precision/recall/F1, as
/// percentages. Undefined ratios (empty denominators) are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Prf { tp, fp, fn_, tn }
    }

    pub fn precision(&self) -> Option<f64> {
        ratio_percent(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio_percent(self.tp, self.tp + self.fn_)
    }

    /// F1 = 200·TP / (2·TP + FP + FN), as a percentage.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            None
        } else {
            Some(200.0 * self.tp as f64 / denom as f64)
        }
    }
}

fn ratio_percent(num: usize, denom: usize) -> Option<f64> {
    if denom == 0 {
        None
    } else {
        Some(100.0 * num as f64 / denom as f64)
    }
}

/// Step-level precision/recall/F1 under the binary gap projection.
///
/// Steps without a gold label are skipped; an input with no labeled, checked
/// step is an error.
pub fn step_prf(preds: &[StepPrediction]) -> Result<Prf, MetricsError> {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    let mut any = false;
    for p in checked(preds) {
        let Some(gold) = p.gold else { continue };
        any = true;
        match (p.predicted.is_gap(), gold.is_gap()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    if !any {
        return Err(MetricsError::EmptyInput("no checked, gold-labeled steps"));
    }
    Ok(Prf::from_counts(tp, fp, fn_, tn))
}

/// True/false positive rates and their mean, as percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedAccuracy {
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    /// `(TPR + TNR) / 2`; null when either class is absent.
    pub ba: Option<f64>,
}

/// Balanced accuracy over the binary projection. An absent class makes the
/// result an explicit null rather than a bare error or a silent zero.
pub fn balanced_accuracy(preds: &[StepPrediction]) -> Result<BalancedAccuracy, MetricsError> {
    let prf = step_prf(preds)?;
    let tpr = ratio_percent(prf.tp, prf.tp + prf.fn_);
    let tnr = ratio_percent(prf.tn, prf.tn + prf.fp);
    let ba = match (tpr, tnr) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };
    Ok(BalancedAccuracy { tpr, tnr, ba })
}

/// Per-class one-vs-rest confusion for a typed label.
fn class_prf(preds: &[StepPrediction], class: GapType) -> Prf {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for p in checked(preds) {
        let Some(gold) = p.gold else { continue };
        match (p.predicted == class, gold == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Prf::from_counts(tp, fp, fn_, tn)
}

/// Typed F1 over the three gap classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypedF1 {
    pub contradicted_claim: Option<f64>,
    pub irrelevant_evidence: Option<f64>,
    pub missing_bridge: Option<f64>,
    /// Unweighted mean of the defined per-class F1 scores.
    pub macro_f1: Option<f64>,
    /// Pooled-count F1 over the gap classes; never exceeds the binary sF1.
    pub micro_f1: Option<f64>,
}

/// Per-class, macro, and micro F1 over {CC, IE, MB}.
///
/// Macro averages the per-class scores that are defined. Micro pools the
/// typed counts: a gap predicted with the wrong type contributes a false
/// positive for the predicted class and a false negative for the gold one,
/// which is exactly why micro typed F1 is a lower bound on binary sF1.
pub fn typed_f1(preds: &[StepPrediction]) -> Result<TypedF1, MetricsError> {
    step_prf(preds)?; // same emptiness precondition
    let classes = [
        GapType::ContradictedClaim,
        GapType::IrrelevantEvidence,
        GapType::MissingBridge,
    ];
    let per: Vec<(GapType, Prf)> = classes.iter().map(|&c| (c, class_prf(preds, c))).collect();
    let f1_of = |t: GapType| per.iter().find(|(c, _)| *c == t).unwrap().1.f1();

    let defined: Vec<f64> = per.iter().filter_map(|(_, prf)| prf.f1()).collect();
    let macro_f1 = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };

    let (tp, fp, fn_): (usize, usize, usize) = per.iter().fold((0, 0, 0), |acc, (_, prf)| {
        (acc.0 + prf.tp, acc.1 + prf.fp, acc.2 + prf.fn_)
    });
    let micro = Prf::from_counts(tp, fp, fn_, 0).f1();

    Ok(TypedF1 {
        contradicted_claim: f1_of(GapType::ContradictedClaim),
        irrelevant_evidence: f1_of(GapType::IrrelevantEvidence),
        missing_bridge: f1_of(GapType::MissingBridge),
        macro_f1,
        micro_f1: micro,
    })
}

/// Question-level contingency table of answer correctness against gap
/// detection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CrossTab {
    /// Wrong answer, at least one gap flagged.
    pub tp: usize,
    /// Wrong answer, nothing flagged.
    pub fn_: usize,
    /// Correct answer, at least one gap flagged.
    pub fp: usize,
    /// Correct answer, nothing flagged.
    pub tn: usize,
    /// Questions skipped for unknown correctness.
    pub excluded_unknown: usize,
}

impl CrossTab {
    /// Q-F1 as a fraction in [0, 1]: positives are wrong answers, a
    /// prediction is positive when any step is flagged.
    pub fn qf1_fraction(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            None
        } else {
            Some(2.0 * self.tp as f64 / denom as f64)
        }
    }

    pub fn qf1_percent(&self) -> Option<f64> {
        self.qf1_fraction().map(|f| 100.0 * f)
    }

    pub fn total_known(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

/// Group step predictions into (correctness, flagged) pairs per question and
/// tabulate. Questions absent from the correctness map or mapped to `None`
/// are excluded and tallied.
pub fn answer_gap_crosstab(
    preds: &[StepPrediction],
    correctness: &CorrectnessMap,
) -> Result<CrossTab, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput("no step predictions"));
    }
    let mut flagged: BTreeMap<&str, bool> = BTreeMap::new();
    for p in checked(preds) {
        let entry = flagged.entry(&p.question_id).or_insert(false);
        *entry |= p.predicted.is_gap();
    }
    let mut tab = CrossTab::default();
    for (qid, any_flag) in flagged {
        match correctness.get(qid).copied().flatten() {
            Some(true) => {
                if any_flag {
                    tab.fp += 1
                } else {
                    tab.tn += 1
                }
            }
            Some(false) => {
                if any_flag {
                    tab.tp += 1
                } else {
                    tab.fn_ += 1
                }
            }
            None => tab.excluded_unknown += 1,
        }
    }
    Ok(tab)
}

/// Question-level F1 (fraction form) plus the table behind it.
pub fn question_f1(
    preds: &[StepPrediction],
    correctness: &CorrectnessMap,
) -> Result<CrossTab, MetricsError> {
    answer_gap_crosstab(preds, correctness)
}

/// Fractions of emitted verdict types, in the reporting order
/// no-gap / IE / CC / MB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub no_gap: f64,
    pub irrelevant_evidence: f64,
    pub contradicted_claim: f64,
    pub missing_bridge: f64,
}

impl CategoryDistribution {
    pub fn gap_rate(&self) -> f64 {
        1.0 - self.no_gap
    }
}

/// Distribution health verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryHealth {
    pub distribution: CategoryDistribution,
    /// False when the IE share exceeds the 70% degenerate floor.
    pub health_flag: bool,
    /// True when the IE share sits in the 38–41% band seen on healthy runs.
    pub in_reference_band: bool,
    /// True when the overall gap rate is under 5%: a checker that never
    /// fires looks "healthy" by the IE share alone, so it gets its own flag.
    pub never_fires_warning: bool,
}

const IE_DEGENERATE_FLOOR: f64 = 0.70;
const IE_BAND: (f64, f64) = (0.38, 0.41);
const NEVER_FIRES_GAP_RATE: f64 = 0.05;

/// Category distribution of the emitted verdicts and its health flags.
pub fn category_health(preds: &[StepPrediction]) -> Result<CategoryHealth, MetricsError> {
    let mut counts = [0usize; 4];
    let mut total = 0usize;
    for p in checked(preds) {
        let slot = match p.predicted {
            GapType::NoGap => 0,
            GapType::IrrelevantEvidence => 1,
            GapType::ContradictedClaim => 2,
            GapType::MissingBridge => 3,
        };
        counts[slot] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(MetricsError::EmptyInput("no checked steps"));
    }
    let frac = |c: usize| c as f64 / total as f64;
    let distribution = CategoryDistribution {
        no_gap: frac(counts[0]),
        irrelevant_evidence: frac(counts[1]),
        contradicted_claim: frac(counts[2]),
        missing_bridge: frac(counts[3]),
    };
    let ie = distribution.irrelevant_evidence;
    Ok(CategoryHealth {
        distribution,
        health_flag: ie <= IE_DEGENERATE_FLOOR,
        in_reference_band: (IE_BAND.0..=IE_BAND.1).contains(&ie),
        never_fires_warning: distribution.gap_rate() < NEVER_FIRES_GAP_RATE,
    })
}

/// Where checking first fires on failed questions, per type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstGapDistribution {
    /// Wrong-answer questions with at least one flagged step.
    pub question_count: usize,
    pub contradicted_claim: f64,
    pub irrelevant_evidence: f64,
    pub missing_bridge: f64,
}

/// Fraction of wrong-answer, flagged questions whose earliest flagged step
/// has each gap type. Questions with unknown correctness are skipped.
pub fn first_gap_distribution(
    preds: &[StepPrediction],
    correctness: &CorrectnessMap,
) -> Result<FirstGapDistribution, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput("no step predictions"));
    }
    let mut earliest: BTreeMap<&str, (usize, GapType)> = BTreeMap::new();
    for p in checked(preds) {
        if !p.predicted.is_gap() {
            continue;
        }
        if correctness.get(p.question_id.as_str()).copied().flatten() != Some(false) {
            continue;
        }
        earliest
            .entry(&p.question_id)
            .and_modify(|slot| {
                if p.step_index < slot.0 {
                    *slot = (p.step_index, p.predicted);
                }
            })
            .or_insert((p.step_index, p.predicted));
    }
    let total = earliest.len();
    let mut counts = [0usize; 3];
    for (_, ty) in earliest.values() {
        match ty {
            GapType::ContradictedClaim => counts[0] += 1,
            GapType::IrrelevantEvidence => counts[1] += 1,
            GapType::MissingBridge => counts[2] += 1,
            GapType::NoGap => unreachable!("only gaps are collected"),
        }
    }
    let frac = |c: usize| {
        if total == 0 {
            0.0
        } else {
            c as f64 / total as f64
        }
    };
    Ok(FirstGapDistribution {
        question_count: total,
        contradicted_claim: frac(counts[0]),
        irrelevant_evidence: frac(counts[1]),
        missing_bridge: frac(counts[2]),
    })
}

/// Cohen's κ between two aligned label sequences.
///
/// Chance agreement comes from the marginal products. The degenerate case
/// (both raters fully concentrated, `p_e = 1`) reports 1 when observed
/// agreement is also perfect and an explicit null otherwise.
pub fn cohens_kappa<T: Eq + Ord>(a: &[T], b: &[T]) -> Result<Option<f64>, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput("no labels"));
    }
    let n = a.len();
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let mut counts_a: BTreeMap<&T, usize> = BTreeMap::new();
    let mut counts_b: BTreeMap<&T, usize> = BTreeMap::new();
    for x in a {
        *counts_a.entry(x).or_insert(0) += 1;
    }
    for y in b {
        *counts_b.entry(y).or_insert(0) += 1;
    }
    // Exact integer arithmetic for the degeneracy check: p_e = 1 iff
    // Σ count_a(l)·count_b(l) = n².
    let pe_num: usize = counts_a
        .iter()
        .map(|(l, ca)| ca * counts_b.get(l).copied().unwrap_or(0))
        .sum();
    if pe_num == n * n {
        return Ok(if agree == n { Some(1.0) } else { None });
    }
    let p_o = agree as f64 / n as f64;
    let p_e = pe_num as f64 / (n as f64 * n as f64);
    Ok(Some((p_o - p_e) / (1.0 - p_e)))
}
