//! The Q-F1 trap: question-level F1 rewards indiscriminate flagging.
//!
//! A checker that flags every step of every question scores
//! `Q-F1 = 2w/(1+w)` on a benchmark whose wrong-answer rate is `w` — at
//! realistic failure rates that is a deceptively strong-looking number. The
//! closed form lives in [`qf1_trap_curve`]; [`trap_experiment`] demonstrates
//! it empirically by running the flag-everything variant over stratified
//! resamples of a real benchmark and comparing against the analytic value.

use super::MetricsError;
use crate::checker::{check_trace, CheckerVariant, JudgeSet, VariantName};
use crate::trace::ReasoningTrace;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Analytic Q-F1 of a flag-everything checker at wrong-answer rate `w`:
/// `2w/(1+w)`, for `w ∈ (0, 1]`.
pub fn qf1_trap_curve(w_values: &[f64]) -> Result<Vec<f64>, MetricsError> {
    w_values
        .iter()
        .map(|&w| {
            if !(w > 0.0 && w <= 1.0) {
                Err(MetricsError::DomainError(format!(
                    "wrong-answer rate w={w} outside (0, 1]"
                )))
            } else {
                Ok(2.0 * w / (1.0 + w))
            }
        })
        .collect()
}

/// One stratum of the trap experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapRow {
    pub target_w: f64,
    /// Wrong-answer rate actually realized after integer rounding.
    pub achieved_w: f64,
    pub empirical_qf1: f64,
    /// Closed form evaluated at the target rate.
    pub analytic_qf1: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub tolerance: f64,
    pub stratum_size: usize,
    pub rows: Vec<TrapRow>,
}

impl TrapReport {
    pub fn all_within_tolerance(&self) -> bool {
        self.rows.iter().all(|r| r.within_tolerance)
    }
}

const TRAP_TOLERANCE: f64 = 0.02;

/// Run the flag-everything checker over stratified resamples of `benchmark`
/// at each target wrong-answer rate and compare the empirical Q-F1 with the
/// closed form.
///
/// Each stratum keeps the benchmark's size: `round(w·n)` questions drawn
/// with replacement from the wrong-answer pool and the rest from the
/// correct pool, every draw under a fresh unique question id so duplicates
/// count as distinct questions.
pub fn trap_experiment(
    benchmark: &[ReasoningTrace],
    w_strata: &[f64],
    seed: u64,
) -> Result<TrapReport, MetricsError> {
    let analytic = qf1_trap_curve(w_strata)?;
    let wrong: Vec<&ReasoningTrace> = benchmark
        .iter()
        .filter(|t| t.em_correct == Some(false))
        .collect();
    let correct: Vec<&ReasoningTrace> = benchmark
        .iter()
        .filter(|t| t.em_correct == Some(true))
        .collect();
    let n = wrong.len() + correct.len();
    if n == 0 {
        return Err(MetricsError::EmptyInput(
            "benchmark has no questions with known correctness",
        ));
    }

    let variant = CheckerVariant::new(VariantName::FlagEverything);
    let judges = JudgeSet::inert();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(w_strata.len());

    for (&target_w, &analytic_qf1) in w_strata.iter().zip(&analytic) {
        let n_wrong = (target_w * n as f64).round() as usize;
        let n_correct = n - n_wrong;
        if n_wrong > 0 && wrong.is_empty() {
            return Err(MetricsError::InsufficientQuestions {
                target_w,
                needed: "wrong-answer questions",
                available: 0,
            });
        }
        if n_correct > 0 && correct.is_empty() {
            return Err(MetricsError::InsufficientQuestions {
                target_w,
                needed: "correct-answer questions",
                available: 0,
            });
        }

        let mut stratum: Vec<ReasoningTrace> = Vec::with_capacity(n);
        for copy in 0..n_wrong {
            let source = wrong[rng.random_range(0..wrong.len())];
            let mut t = source.clone();
            t.question_id = format!("{}#copy{}", source.question_id, copy);
            stratum.push(t);
        }
        for copy in 0..n_correct {
            let source = correct[rng.random_range(0..correct.len())];
            let mut t = source.clone();
            t.question_id = format!("{}#copy{}", source.question_id, n_wrong + copy);
            stratum.push(t);
        }

        // Tabulate question-level TP/FP/FN from actual checker output.
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for trace in &stratum {
            let verdicts = check_trace(trace, &variant, &judges)
                .map_err(|e| MetricsError::DomainError(format!("checker failed: {e}")))?;
            let flagged = verdicts.iter().any(|v| !v.unchecked && v.gap_type.is_gap());
            match (trace.em_correct, flagged) {
                (Some(false), true) => tp += 1,
                (Some(false), false) => fn_ += 1,
                (Some(true), true) => fp += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        let empirical_qf1 = if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        };

        rows.push(TrapRow {
            target_w,
            achieved_w: n_wrong as f64 / n as f64,
            empirical_qf1,
            analytic_qf1,
            within_tolerance: (empirical_qf1 - analytic_qf1).abs() <= TRAP_TOLERANCE,
        });
    }

    Ok(TrapReport {
        tolerance: TRAP_TOLERANCE,
        stratum_size: n,
        rows,
    })
}
