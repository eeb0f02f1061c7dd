//! Typed process rewards over step verdicts.
//!
//! A trajectory's return is the exact-match outcome plus a dense, typed
//! bracket per step:
//!
//! ```text
//! R = em + λ · Σ_i ( base(τ_i) + shape(τ_{i-1}, a_i) )        τ_0 = no-gap
//! ```
//!
//! The base table rewards clean steps and mildly prices each gap type; the
//! shaping term looks at how the *next* action responds to the previous
//! step's verdict — re-searching after irrelevant evidence is paid, answering
//! straight through a known gap is charged. Advantages for a sampled group
//! are the standardized per-token values of these brackets.

use crate::checker::detect_retraction;
use crate::gap::GapType;
use crate::trace::{token_f1, ReasoningTrace, Step};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("verdict count {got} does not match step count {expected}")]
    MissingVerdict { expected: usize, got: usize },
    #[error("trace {question_id} has no em_correct flag; returns need the EM outcome")]
    MissingEmCorrect { question_id: String },
    #[error("group of {size} trajectories is too small to standardize (need at least 2)")]
    GroupTooSmall { size: usize },
    #[error("group returns and traces disagree: {0}")]
    GroupMismatch(String),
    #[error("step {step_index} of trace {question_id} has no token span")]
    MissingTokenSpan {
        question_id: String,
        step_index: usize,
    },
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
}

/// Base reward per verdict type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardTable {
    pub no_gap: f64,
    pub missing_bridge: f64,
    pub irrelevant_evidence: f64,
    pub contradicted_claim: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable {
            no_gap: 0.20,
            missing_bridge: -0.05,
            irrelevant_evidence: -0.10,
            contradicted_claim: 0.05,
        }
    }
}

impl RewardTable {
    pub fn get(&self, tau: GapType) -> f64 {
        match tau {
            GapType::NoGap => self.no_gap,
            GapType::MissingBridge => self.missing_bridge,
            GapType::IrrelevantEvidence => self.irrelevant_evidence,
            GapType::ContradictedClaim => self.contradicted_claim,
        }
    }
}

/// Shaping weights, one per behavioral branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeTable {
    pub new_search_after_gap: f64,
    pub retract_after_cc: f64,
    pub answer_through_gap: f64,
    pub near_duplicate_search: f64,
}

impl Default for ShapeTable {
    fn default() -> Self {
        ShapeTable {
            new_search_after_gap: 0.10,
            retract_after_cc: 0.15,
            answer_through_gap: -0.15,
            near_duplicate_search: -0.05,
        }
    }
}

/// Reward scheme variants used in the training ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardVariant {
    /// Outcome-only: the return is the EM score, nothing else.
    SearchOnly,
    /// +0.2 for no-gap, 0 for any gap; no typing, no shaping.
    BinaryGap,
    /// The typed base table alone.
    TypedBase,
    /// Base table plus behavioral shaping (the full scheme).
    TypedShape,
    /// Any gap maps to -0.10, no-gap to +0.20; no shaping.
    UntypedDense,
}

impl fmt::Display for RewardVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RewardVariant::SearchOnly => "search_only",
            RewardVariant::BinaryGap => "binary_gap",
            RewardVariant::TypedBase => "typed_base",
            RewardVariant::TypedShape => "typed_shape",
            RewardVariant::UntypedDense => "untyped_dense",
        };
        f.write_str(s)
    }
}

impl FromStr for RewardVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "searchonly" => Ok(RewardVariant::SearchOnly),
            "binarygap" => Ok(RewardVariant::BinaryGap),
            "typedbase" => Ok(RewardVariant::TypedBase),
            "typedshape" => Ok(RewardVariant::TypedShape),
            "untypeddense" => Ok(RewardVariant::UntypedDense),
            _ => Err(format!("unknown reward variant {s:?}")),
        }
    }
}

/// Flat penalty every gap type collapses to under the untyped ablation.
const UNTYPED_GAP_REWARD: f64 = -0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub base: RewardTable,
    pub shape: ShapeTable,
    pub lambda: f64,
    /// Queries whose best token-F1 against any prior query exceeds this are
    /// near-duplicates.
    pub near_duplicate_threshold: f64,
    pub variant: RewardVariant,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            base: RewardTable::default(),
            shape: ShapeTable::default(),
            lambda: 1.0,
            near_duplicate_threshold: 0.7,
            variant: RewardVariant::TypedShape,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !self.lambda.is_finite() {
            return Err(RewardError::InvalidConfig(format!(
                "lambda must be finite, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.near_duplicate_threshold) {
            return Err(RewardError::InvalidConfig(format!(
                "near_duplicate_threshold {} outside [0,1]",
                self.near_duplicate_threshold
            )));
        }
        Ok(())
    }
}

/// Which shaping branch fired for a step. Exactly one applies; `None` is the
/// fall-through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeBranch {
    None,
    NewSearchAfterGap,
    RetractAfterCc,
    AnswerThroughGap,
    NearDuplicateSearch,
}

/// Base reward for a verdict under the configured variant.
pub fn base_reward(tau: GapType, config: &RewardConfig) -> f64 {
    match config.variant {
        RewardVariant::SearchOnly => 0.0,
        RewardVariant::BinaryGap => {
            if tau.is_gap() {
                0.0
            } else {
                config.base.no_gap
            }
        }
        RewardVariant::UntypedDense => {
            if tau.is_gap() {
                UNTYPED_GAP_REWARD
            } else {
                config.base.no_gap
            }
        }
        RewardVariant::TypedBase | RewardVariant::TypedShape => config.base.get(tau),
    }
}

/// Behavioral shaping for a step given the previous step's verdict.
///
/// Branches are evaluated top-down and short-circuit; a step that both
/// retracts and answers after a contradicted claim earns the retraction
/// bonus, because retraction is the prescribed repair there.
pub fn shape_reward(
    tau_prev: GapType,
    step: &Step,
    prev_claim: Option<&str>,
    prior_queries: &[String],
    config: &RewardConfig,
) -> (f64, ShapeBranch) {
    let searchlike_gap = matches!(
        tau_prev,
        GapType::IrrelevantEvidence | GapType::MissingBridge
    );
    let max_f1 = step.query.as_ref().map(|q| {
        prior_queries
            .iter()
            .map(|p| token_f1(q, p))
            .fold(0.0_f64, f64::max)
    });

    if searchlike_gap && step.is_search() {
        if max_f1.expect("search step has a query") <= config.near_duplicate_threshold {
            return (config.shape.new_search_after_gap, ShapeBranch::NewSearchAfterGap);
        }
    }
    if tau_prev == GapType::ContradictedClaim {
        if let Some(prev) = prev_claim {
            if detect_retraction(step, prev) {
                return (config.shape.retract_after_cc, ShapeBranch::RetractAfterCc);
            }
        }
    }
    if tau_prev.is_gap() && step.is_answer() {
        return (config.shape.answer_through_gap, ShapeBranch::AnswerThroughGap);
    }
    if searchlike_gap && step.is_search() {
        return (
            config.shape.near_duplicate_search,
            ShapeBranch::NearDuplicateSearch,
        );
    }
    (0.0, ShapeBranch::None)
}

/// One step's contribution to the return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReward {
    pub step_index: usize,
    pub tau: GapType,
    pub base: f64,
    pub shape: f64,
    pub shape_branch: ShapeBranch,
}

impl StepReward {
    /// The step's full bracket, base plus shaping.
    pub fn bracket(&self) -> f64 {
        self.base + self.shape
    }
}

/// The decomposed return for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub question_id: String,
    pub per_step: Vec<StepReward>,
    pub em: f64,
    pub total_return: f64,
}

/// Compute the return for one trajectory from its step verdicts.
///
/// Shaping only applies under the `TypedShape` variant; every other variant
/// records a zero shape with the fall-through branch. `SearchOnly` zeroes the
/// bases too, so the return collapses to the EM score.
pub fn trajectory_return(
    taus: &[GapType],
    trace: &ReasoningTrace,
    config: &RewardConfig,
) -> Result<RewardBreakdown, RewardError> {
    config.validate()?;
    if taus.len() != trace.steps.len() {
        return Err(RewardError::MissingVerdict {
            expected: trace.steps.len(),
            got: taus.len(),
        });
    }
    let em = match trace.em_correct {
        Some(true) => 1.0,
        Some(false) => 0.0,
        None => {
            return Err(RewardError::MissingEmCorrect {
                question_id: trace.question_id.clone(),
            })
        }
    };

    let mut per_step = Vec::with_capacity(taus.len());
    let mut prior_queries: Vec<String> = Vec::new();
    let mut dense_sum = 0.0;
    for (i, (step, &tau)) in trace.steps.iter().zip(taus).enumerate() {
        let base = base_reward(tau, config);
        let (shape, shape_branch) = if config.variant == RewardVariant::TypedShape {
            let tau_prev = if i == 0 { GapType::NoGap } else { taus[i - 1] };
            let prev_claim = i.checked_sub(1).map(|p| trace.steps[p].claim());
            shape_reward(tau_prev, step, prev_claim, &prior_queries, config)
        } else {
            (0.0, ShapeBranch::None)
        };
        dense_sum += base + shape;
        per_step.push(StepReward {
            step_index: step.index,
            tau,
            base,
            shape,
            shape_branch,
        });
        if let Some(q) = &step.query {
            prior_queries.push(q.clone());
        }
    }

    Ok(RewardBreakdown {
        question_id: trace.question_id.clone(),
        per_step,
        em,
        total_return: em + config.lambda * dense_sum,
    })
}

/// Standardized per-token advantages for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAdvantages {
    pub question_id: String,
    pub per_token: Vec<f64>,
}

/// Assign each step's bracket to its token span and standardize against the
/// group.
///
/// The group statistics are the mean and population standard deviation of the
/// aggregate trajectory returns. Each token inside a step's span carries
/// `em + λ·bracket`; tokens outside every span carry the EM component alone.
/// A degenerate group (identical returns, σ = 0) yields all-zero advantages.
pub fn assign_dense_advantages(
    group_returns: &[RewardBreakdown],
    traces: &[&ReasoningTrace],
    config: &RewardConfig,
) -> Result<Vec<TokenAdvantages>, RewardError> {
    config.validate()?;
    if group_returns.len() != traces.len() {
        return Err(RewardError::GroupMismatch(format!(
            "{} returns but {} traces",
            group_returns.len(),
            traces.len()
        )));
    }
    if group_returns.len() < 2 {
        return Err(RewardError::GroupTooSmall {
            size: group_returns.len(),
        });
    }

    let n = group_returns.len() as f64;
    let mean = group_returns.iter().map(|r| r.total_return).sum::<f64>() / n;
    let var = group_returns
        .iter()
        .map(|r| (r.total_return - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    // σ_R = 0 is detected on the raw returns rather than on the computed σ:
    // the rounded mean of n identical non-dyadic returns can land one ulp off
    // the common value when n is not a power of two, leaving σ ≈ 1e-17 and
    // blowing the quotient up to ~1e16.
    let degenerate = group_returns
        .iter()
        .all(|r| r.total_return == group_returns[0].total_return);

    let mut out = Vec::with_capacity(group_returns.len());
    for (breakdown, trace) in group_returns.iter().zip(traces) {
        if breakdown.per_step.len() != trace.steps.len() {
            return Err(RewardError::GroupMismatch(format!(
                "trace {} has {} steps but its breakdown covers {}",
                trace.question_id,
                trace.steps.len(),
                breakdown.per_step.len()
            )));
        }
        let mut token_len = 0usize;
        for step in &trace.steps {
            let (_, end) = step.token_span.ok_or_else(|| RewardError::MissingTokenSpan {
                question_id: trace.question_id.clone(),
                step_index: step.index,
            })?;
            token_len = token_len.max(end);
        }
        let mut values = vec![breakdown.em; token_len];
        for (step, reward) in trace.steps.iter().zip(&breakdown.per_step) {
            let (start, end) = step.token_span.expect("checked above");
            let v = breakdown.em + config.lambda * reward.bracket();
            for slot in values.iter_mut().take(end.min(token_len)).skip(start) {
                *slot = v;
            }
        }
        let per_token = if degenerate {
            vec![0.0; token_len]
        } else {
            values.into_iter().map(|v| (v - mean) / std).collect()
        };
        out.push(TokenAdvantages {
            question_id: breakdown.question_id.clone(),
            per_token,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn search_step(index: usize, query: &str) -> Step {
        Step {
            index,
            claim_text: format!("Searching for {query}."),
            query: Some(query.into()),
            evidence: Vec::new(),
            answer_text: None,
            token_span: None,
            raw_text: format!("Searching for {query}. <search>{query}</search>"),
        }
    }

    fn answer_step(index: usize, answer: &str) -> Step {
        Step {
            index,
            claim_text: String::new(),
            query: None,
            evidence: Vec::new(),
            answer_text: Some(answer.into()),
            token_span: None,
            raw_text: format!("<answer>{answer}</answer>"),
        }
    }

    fn plain_step(index: usize, text: &str) -> Step {
        Step {
            index,
            claim_text: text.into(),
            query: None,
            evidence: Vec::new(),
            answer_text: None,
            token_span: None,
            raw_text: text.into(),
        }
    }

    fn trace_of(steps: Vec<Step>, em: bool) -> ReasoningTrace {
        ReasoningTrace {
            question_id: "q-test".into(),
            question: "q?".into(),
            gold_answer: Some("gold".into()),
            predicted_answer: Some("pred".into()),
            em_correct: Some(em),
            steps,
        }
    }

    #[test]
    fn base_table_matches_the_published_values_exactly() {
        let config = RewardConfig::default();
        assert_eq!(base_reward(GapType::NoGap, &config), 0.20);
        assert_eq!(base_reward(GapType::MissingBridge, &config), -0.05);
        assert_eq!(base_reward(GapType::IrrelevantEvidence, &config), -0.10);
        assert_eq!(base_reward(GapType::ContradictedClaim, &config), 0.05);
    }

    #[test]
    fn binary_and_untyped_variants_collapse_the_gap_rows() {
        let binary = RewardConfig {
            variant: RewardVariant::BinaryGap,
            ..Default::default()
        };
        let untyped = RewardConfig {
            variant: RewardVariant::UntypedDense,
            ..Default::default()
        };
        for tau in [
            GapType::MissingBridge,
            GapType::IrrelevantEvidence,
            GapType::ContradictedClaim,
        ] {
            assert_eq!(base_reward(tau, &binary), 0.0);
            assert_eq!(base_reward(tau, &untyped), -0.10);
        }
        assert_eq!(base_reward(GapType::NoGap, &binary), 0.20);
        assert_eq!(base_reward(GapType::NoGap, &untyped), 0.20);
    }

    /// Every cell of the shaping case analysis, checked against hand-applied
    /// branch rules.
    #[test]
    fn shaping_branch_table() {
        let config = RewardConfig::default();
        let prior: Vec<String> = vec!["painter birth city".into()];
        let novel = search_step(3, "museum exhibitions in Paris");
        let duplicate = search_step(3, "painter birth city today");
        let answer = answer_step(3, "Paris");
        let retract = {
            let mut s = plain_step(3, "The painter was born in Warsaw.");
            s.raw_text = "Correction: the painter was born in Warsaw.".into();
            s
        };
        let idle = plain_step(3, "Let me think about the next hop.");
        let prev_claim = Some("The painter was born in Paris.");

        use GapType::*;
        use ShapeBranch as B;
        let cases: Vec<(GapType, &Step, f64, ShapeBranch)> = vec![
            (IrrelevantEvidence, &novel, 0.10, B::NewSearchAfterGap),
            (MissingBridge, &novel, 0.10, B::NewSearchAfterGap),
            (ContradictedClaim, &novel, 0.0, B::None),
            (IrrelevantEvidence, &duplicate, -0.05, B::NearDuplicateSearch),
            (MissingBridge, &duplicate, -0.05, B::NearDuplicateSearch),
            (ContradictedClaim, &retract, 0.15, B::RetractAfterCc),
            (IrrelevantEvidence, &retract, 0.0, B::None),
            (IrrelevantEvidence, &answer, -0.15, B::AnswerThroughGap),
            (MissingBridge, &answer, -0.15, B::AnswerThroughGap),
            (ContradictedClaim, &answer, -0.15, B::AnswerThroughGap),
            (NoGap, &answer, 0.0, B::None),
            (NoGap, &idle, 0.0, B::None),
        ];
        for (tau_prev, step, expected, branch) in cases {
            let (got, got_branch) = shape_reward(tau_prev, step, prev_claim, &prior, &config);
            assert_eq!(got, expected, "tau_prev={tau_prev:?} step={:?}", step.raw_text);
            assert_eq!(got_branch, branch);
        }

        // Near-duplicate sanity: the "duplicate" query overlaps the prior one
        // heavily, the "novel" one does not.
        assert!(token_f1(duplicate.query.as_ref().unwrap(), &prior[0]) > 0.7);
        assert!(token_f1(novel.query.as_ref().unwrap(), &prior[0]) <= 0.7);
    }

    #[test]
    fn retraction_beats_answer_when_both_apply() {
        let config = RewardConfig::default();
        let mut step = answer_step(4, "Warsaw");
        step.raw_text = "Actually the city was Warsaw. <answer>Warsaw</answer>".into();
        let (reward, branch) = shape_reward(
            GapType::ContradictedClaim,
            &step,
            Some("The city was Paris."),
            &[],
            &config,
        );
        assert_eq!(branch, ShapeBranch::RetractAfterCc);
        assert_eq!(reward, 0.15);
    }

    #[test]
    fn duplicate_threshold_boundary_is_inclusive_for_the_bonus() {
        let config = RewardConfig::default();
        // 10 + 10 tokens sharing exactly 7: F1 = 14/20 = 0.7, on the
        // boundary, still counts as a new search.
        let prior_q = "t1 t2 t3 t4 t5 t6 t7 t8 t9 t10";
        let boundary_q = "t1 t2 t3 t4 t5 t6 t7 x1 x2 x3";
        assert_eq!(token_f1(boundary_q, prior_q), 0.7);
        let prior: Vec<String> = vec![prior_q.into()];
        let step = search_step(2, boundary_q);
        let (reward, branch) =
            shape_reward(GapType::IrrelevantEvidence, &step, None, &prior, &config);
        assert_eq!(branch, ShapeBranch::NewSearchAfterGap);
        assert_eq!(reward, 0.10);

        // 25 + 25 tokens sharing 18: F1 = 36/50 = 0.72, just past the
        // threshold, charged as a near-duplicate.
        let prior_q: Vec<String> = vec![(1..=25)
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ")];
        let dup_q = (1..=18)
            .map(|i| format!("w{i}"))
            .chain((1..=7).map(|i| format!("y{i}")))
            .collect::<Vec<_>>()
            .join(" ");
        assert_eq!(token_f1(&dup_q, &prior_q[0]), 0.72);
        let step = search_step(2, &dup_q);
        let (reward, branch) =
            shape_reward(GapType::MissingBridge, &step, None, &prior_q, &config);
        assert_eq!(branch, ShapeBranch::NearDuplicateSearch);
        assert_eq!(reward, -0.05);
    }

    #[test]
    fn first_search_after_a_gap_is_always_novel() {
        let config = RewardConfig::default();
        let step = search_step(2, "anything at all");
        let (reward, branch) = shape_reward(GapType::IrrelevantEvidence, &step, None, &[], &config);
        assert_eq!(branch, ShapeBranch::NewSearchAfterGap);
        assert_eq!(reward, 0.10);
    }

    /// The worked four-step return: EM hit, one IE gap, repaired by a novel
    /// search, then a clean answer.
    #[test]
    fn four_step_worked_return_is_one_point_six() {
        let steps = vec![
            search_step(1, "painter birth city"),
            search_step(2, "painter exhibitions"),
            search_step(3, "birth city of the painter Lempicka"),
            answer_step(4, "Warsaw"),
        ];
        // Query 3 vs query 1: 3 shared of 3+6 tokens -> F1 = 6/9 ≈ 0.667,
        // under the duplicate threshold, so the re-search is novel.
        assert!(token_f1("birth city of the painter Lempicka", "painter birth city") <= 0.7);
        let trace = trace_of(steps, true);
        let taus = [
            GapType::NoGap,
            GapType::IrrelevantEvidence,
            GapType::NoGap,
            GapType::NoGap,
        ];
        let config = RewardConfig::default();
        let breakdown = trajectory_return(&taus, &trace, &config).unwrap();
        assert!((breakdown.total_return - 1.60).abs() < 1e-12, "{breakdown:?}");
        assert_eq!(breakdown.em, 1.0);
        let shapes: Vec<f64> = breakdown.per_step.iter().map(|s| s.shape).collect();
        assert_eq!(shapes, [0.0, 0.0, 0.10, 0.0]);
        let branches: Vec<ShapeBranch> =
            breakdown.per_step.iter().map(|s| s.shape_branch).collect();
        assert_eq!(
            branches,
            [
                ShapeBranch::None,
                ShapeBranch::None,
                ShapeBranch::NewSearchAfterGap,
                ShapeBranch::None
            ]
        );
    }

    #[test]
    fn all_no_gap_trace_returns_a_fifth_per_step() {
        for n in [1usize, 3, 7] {
            let steps: Vec<Step> = (1..=n).map(|i| plain_step(i, "clean step")).collect();
            let trace = trace_of(steps, false);
            let taus = vec![GapType::NoGap; n];
            let breakdown =
                trajectory_return(&taus, &trace, &RewardConfig::default()).unwrap();
            assert!((breakdown.total_return - 0.20 * n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn search_only_returns_em_alone() {
        let steps = vec![
            search_step(1, "a query"),
            answer_step(2, "answer"),
        ];
        let trace = trace_of(steps, true);
        let taus = [GapType::IrrelevantEvidence, GapType::ContradictedClaim];
        let config = RewardConfig {
            variant: RewardVariant::SearchOnly,
            ..Default::default()
        };
        let breakdown = trajectory_return(&taus, &trace, &config).unwrap();
        assert_eq!(breakdown.total_return, 1.0);
        assert!(breakdown.per_step.iter().all(|s| s.base == 0.0 && s.shape == 0.0));
    }

    #[test]
    fn total_return_identity_holds_to_machine_precision() {
        let steps = vec![
            search_step(1, "q one"),
            search_step(2, "q two"),
            answer_step(3, "done"),
        ];
        let trace = trace_of(steps, true);
        let taus = [
            GapType::MissingBridge,
            GapType::IrrelevantEvidence,
            GapType::NoGap,
        ];
        for lambda in [0.25, 1.0, 3.0] {
            let config = RewardConfig {
                lambda,
                ..Default::default()
            };
            let b = trajectory_return(&taus, &trace, &config).unwrap();
            let sum: f64 = b.per_step.iter().map(|s| s.base + s.shape).sum();
            assert!((b.total_return - (b.em + lambda * sum)).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_lambda_scales_the_dense_component_linearly() {
        let steps = vec![
            search_step(1, "alpha beta"),
            search_step(2, "gamma delta"),
            answer_step(3, "x"),
        ];
        let trace = trace_of(steps, false);
        let taus = [
            GapType::IrrelevantEvidence,
            GapType::NoGap,
            GapType::MissingBridge,
        ];
        let base_cfg = RewardConfig::default();
        let r1 = trajectory_return(&taus, &trace, &base_cfg).unwrap();
        for c in [0.0, 0.5, 2.0, 10.0] {
            let cfg = RewardConfig {
                lambda: c,
                ..Default::default()
            };
            let rc = trajectory_return(&taus, &trace, &cfg).unwrap();
            assert!(
                ((rc.total_return - rc.em) - c * (r1.total_return - r1.em)).abs() < 1e-12
            );
        }
    }

    #[test]
    fn per_step_bracket_never_exceeds_the_em_magnitude() {
        // Largest possible |base + shape| under the default tables is
        // 0.20 + 0.15 = 0.35 < 1.0; check exhaustively over the branch table.
        let config = RewardConfig::default();
        let bases = [
            GapType::NoGap,
            GapType::MissingBridge,
            GapType::IrrelevantEvidence,
            GapType::ContradictedClaim,
        ];
        let shapes = [
            config.shape.new_search_after_gap,
            config.shape.retract_after_cc,
            config.shape.answer_through_gap,
            config.shape.near_duplicate_search,
            0.0,
        ];
        for tau in bases {
            for shape in shapes {
                assert!((base_reward(tau, &config) + shape).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn typed_base_equals_typed_shape_with_zeroed_shaping() {
        let steps = vec![
            search_step(1, "first query"),
            search_step(2, "second query"),
            answer_step(3, "a"),
        ];
        let trace = trace_of(steps, true);
        let taus = [
            GapType::IrrelevantEvidence,
            GapType::ContradictedClaim,
            GapType::NoGap,
        ];
        let typed_base = RewardConfig {
            variant: RewardVariant::TypedBase,
            ..Default::default()
        };
        let zero_shape = RewardConfig {
            variant: RewardVariant::TypedShape,
            shape: ShapeTable {
                new_search_after_gap: 0.0,
                retract_after_cc: 0.0,
                answer_through_gap: 0.0,
                near_duplicate_search: 0.0,
            },
            ..Default::default()
        };
        let a = trajectory_return(&taus, &trace, &typed_base).unwrap();
        let b = trajectory_return(&taus, &trace, &zero_shape).unwrap();
        assert_eq!(a.total_return, b.total_return);

        // BinaryGap is TypedBase with the gap rows collapsed to zero.
        let binary = RewardConfig {
            variant: RewardVariant::BinaryGap,
            ..Default::default()
        };
        let collapsed = RewardConfig {
            variant: RewardVariant::TypedBase,
            base: RewardTable {
                no_gap: 0.20,
                missing_bridge: 0.0,
                irrelevant_evidence: 0.0,
                contradicted_claim: 0.0,
            },
            ..Default::default()
        };
        let a = trajectory_return(&taus, &trace, &binary).unwrap();
        let b = trajectory_return(&taus, &trace, &collapsed).unwrap();
        assert_eq!(a.total_return, b.total_return);
    }

    #[test]
    fn verdict_and_em_preconditions_are_enforced() {
        let trace = trace_of(vec![plain_step(1, "one"), plain_step(2, "two")], true);
        let err = trajectory_return(&[GapType::NoGap], &trace, &RewardConfig::default())
            .unwrap_err();
        assert!(matches!(
            err,
            RewardError::MissingVerdict {
                expected: 2,
                got: 1
            }
        ));

        let mut no_em = trace.clone();
        no_em.em_correct = None;
        let err = trajectory_return(
            &[GapType::NoGap, GapType::NoGap],
            &no_em,
            &RewardConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RewardError::MissingEmCorrect { .. }));
    }

    fn spanned(mut step: Step, span: (usize, usize)) -> Step {
        step.token_span = Some(span);
        step
    }

    #[test]
    fn two_trajectory_group_standardizes_to_plus_minus_one() {
        // Single-step trajectories whose spans cover every token: each token
        // carries the full return, so standardization reproduces
        // (R - mean)/std = (1.6, 0.4) -> (+1, -1) with mean 1.0, std 0.6.
        let config = RewardConfig::default();
        let t1 = trace_of(vec![spanned(plain_step(1, "good run"), (0, 4))], true);
        let t2 = trace_of(vec![spanned(plain_step(1, "bad run"), (0, 3))], false);
        let mut r1 = trajectory_return(&[GapType::NoGap], &t1, &config).unwrap();
        let mut r2 = trajectory_return(&[GapType::NoGap], &t2, &config).unwrap();
        // Force the aggregate returns of the worked example: 1.6 and 0.4.
        r1.per_step[0].base = 0.6;
        r1.total_return = 1.6;
        r2.per_step[0].base = 0.4;
        r2.total_return = 0.4;
        let adv = assign_dense_advantages(&[r1, r2], &[&t1, &t2], &config).unwrap();
        assert_eq!(adv[0].per_token.len(), 4);
        assert_eq!(adv[1].per_token.len(), 3);
        for got in &adv[0].per_token {
            assert!((got - 1.0).abs() < 1e-12);
        }
        for got in &adv[1].per_token {
            assert!((got + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tokens_outside_spans_carry_the_em_component() {
        let config = RewardConfig {
            variant: RewardVariant::TypedBase,
            ..Default::default()
        };
        // Trajectory A: tokens 0..3 in step 1 (NoGap, +0.2), 3..5 in step 2
        // (IE, -0.1), token 5 uncovered.
        let t1 = trace_of(
            vec![
                spanned(plain_step(1, "one"), (0, 3)),
                spanned(plain_step(2, "two"), (3, 5)),
            ],
            true,
        );
        let mut steps2 = vec![spanned(plain_step(1, "only"), (0, 2))];
        steps2[0].token_span = Some((0, 2));
        let t2 = trace_of(steps2, false);
        let r1 = trajectory_return(
            &[GapType::NoGap, GapType::IrrelevantEvidence],
            &t1,
            &config,
        )
        .unwrap();
        let r2 = trajectory_return(&[GapType::NoGap], &t2, &config).unwrap();
        assert!((r1.total_return - 1.1).abs() < 1e-12);
        assert!((r2.total_return - 0.2).abs() < 1e-12);

        // A trailing uncovered token exists only if a span ends past the last
        // step span; extend trajectory A with an uncovered tail by giving
        // step 2 a span that stops short of the recorded range.
        let adv = assign_dense_advantages(
            &[r1.clone(), r2.clone()],
            &[&t1, &t2],
            &config,
        )
        .unwrap();
        // mean = 0.65, population std = sqrt(((0.45)^2 + (0.45)^2)/2) = 0.45.
        let mean = 0.65;
        let std = 0.45;
        let expect_a: Vec<f64> = vec![
            (1.2 - mean) / std,
            (1.2 - mean) / std,
            (1.2 - mean) / std,
            (0.9 - mean) / std,
            (0.9 - mean) / std,
        ];
        for (got, want) in adv[0].per_token.iter().zip(&expect_a) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
        let expect_b = (0.2 - mean) / std;
        for got in &adv[1].per_token {
            assert!((got - expect_b).abs() < 1e-12);
        }
    }

    #[test]
    fn uncovered_tail_tokens_get_em_only() {
        let config = RewardConfig {
            variant: RewardVariant::TypedBase,
            ..Default::default()
        };
        // Spans [0,2) and [4,6): tokens 2 and 3 are uncovered.
        let t1 = trace_of(
            vec![
                spanned(plain_step(1, "head"), (0, 2)),
                spanned(plain_step(2, "tail"), (4, 6)),
            ],
            true,
        );
        let t2 = trace_of(vec![spanned(plain_step(1, "other"), (0, 1))], false);
        let r1 = trajectory_return(&[GapType::NoGap, GapType::NoGap], &t1, &config).unwrap();
        let r2 = trajectory_return(&[GapType::NoGap], &t2, &config).unwrap();
        let mean = (r1.total_return + r2.total_return) / 2.0;
        let std = ((r1.total_return - mean).powi(2) + (r2.total_return - mean).powi(2)) / 2.0;
        let std = std.sqrt();
        let adv = assign_dense_advantages(&[r1, r2], &[&t1, &t2], &config).unwrap();
        let covered = (1.2 - mean) / std;
        let uncovered = (1.0 - mean) / std;
        let want = [covered, covered, uncovered, uncovered, covered, covered];
        for (got, want) in adv[0].per_token.iter().zip(&want) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_groups_yield_zero_advantages() {
        let config = RewardConfig::default();
        let t1 = trace_of(vec![spanned(plain_step(1, "a"), (0, 2))], true);
        let t2 = trace_of(vec![spanned(plain_step(1, "b"), (0, 2))], true);
        let r1 = trajectory_return(&[GapType::NoGap], &t1, &config).unwrap();
        let r2 = trajectory_return(&[GapType::NoGap], &t2, &config).unwrap();
        assert_eq!(r1.total_return, r2.total_return);
        let adv = assign_dense_advantages(&[r1, r2], &[&t1, &t2], &config).unwrap();
        assert_eq!(adv[0].per_token, vec![0.0, 0.0]);
        assert_eq!(adv[1].per_token, vec![0.0, 0.0]);
    }

    #[test]
    fn odd_sized_degenerate_groups_are_still_zero() {
        // Three identical 0.4 returns: the rounded mean drifts a ulp off the
        // common value, so the rule must not hinge on the computed σ hitting
        // exactly zero.
        let config = RewardConfig::default();
        let t = trace_of(
            vec![
                spanned(plain_step(1, "first"), (0, 3)),
                spanned(plain_step(2, "second"), (3, 5)),
            ],
            false,
        );
        let taus = [GapType::NoGap, GapType::NoGap];
        let r = trajectory_return(&taus, &t, &config).unwrap();
        assert!((r.total_return - 0.4).abs() < 1e-12);
        let group = vec![r.clone(), r.clone(), r];
        let adv = assign_dense_advantages(&group, &[&t, &t, &t], &config).unwrap();
        for a in &adv {
            assert_eq!(a.per_token, vec![0.0; 5]);
        }
    }

    #[test]
    fn group_and_span_preconditions_are_enforced() {
        let config = RewardConfig::default();
        let t1 = trace_of(vec![spanned(plain_step(1, "a"), (0, 2))], true);
        let r1 = trajectory_return(&[GapType::NoGap], &t1, &config).unwrap();
        assert!(matches!(
            assign_dense_advantages(&[r1.clone()], &[&t1], &config),
            Err(RewardError::GroupTooSmall { size: 1 })
        ));

        let t_unspanned = trace_of(vec![plain_step(1, "no span")], false);
        let r2 = trajectory_return(&[GapType::NoGap], &t_unspanned, &config).unwrap();
        assert!(matches!(
            assign_dense_advantages(&[r1, r2], &[&t1, &t_unspanned], &config),
            Err(RewardError::MissingTokenSpan { step_index: 1, .. })
        ));
    }

    #[test]
    fn reward_config_loads_from_toml_with_defaults() {
        let cfg: RewardConfig = toml::from_str(
            r#"
            lambda = 0.5
            variant = "typed_base"
            [base]
            no_gap = 0.25
            "#,
        )
        .unwrap();
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.variant, RewardVariant::TypedBase);
        assert_eq!(cfg.base.no_gap, 0.25);
        // Unspecified fields keep the published defaults.
        assert_eq!(cfg.base.irrelevant_evidence, -0.10);
        assert_eq!(cfg.shape.retract_after_cc, 0.15);
        assert_eq!(cfg.near_duplicate_threshold, 0.7);

        let full_default: RewardConfig = toml::from_str("").unwrap();
        assert_eq!(full_default, RewardConfig::default());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_lambda = RewardConfig {
            lambda: f64::NAN,
            ..Default::default()
        };
        assert!(bad_lambda.validate().is_err());
        let bad_threshold = RewardConfig {
            near_duplicate_threshold: 1.5,
            ..Default::default()
        };
        assert!(bad_threshold.validate().is_err());
    }

    #[test]
    fn breakdown_serializes_to_a_line_record() {
        let trace = trace_of(vec![search_step(1, "q"), answer_step(2, "a")], true);
        let taus = [GapType::NoGap, GapType::NoGap];
        let b = trajectory_return(&taus, &trace, &RewardConfig::default()).unwrap();
        let line = serde_json::to_string(&b).unwrap();
        assert!(line.contains("\"question_id\":\"q-test\""));
        assert!(line.contains("\"tau\":\"no_gap\""));
        let back: RewardBreakdown = serde_json::from_str(&line).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn reward_variant_parses_from_strings() {
        assert_eq!(
            "typed_shape".parse::<RewardVariant>().unwrap(),
            RewardVariant::TypedShape
        );
        assert_eq!(
            "Search-Only".parse::<RewardVariant>().unwrap(),
            RewardVariant::SearchOnly
        );
        assert!("mystery".parse::<RewardVariant>().is_err());
    }
}
