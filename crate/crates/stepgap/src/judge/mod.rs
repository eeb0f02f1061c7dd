//! Judgment providers: the structured-output LLM judge, the three-class NLI
//! scorer with label-order calibration, deterministic scripted replacements
//! for both, and a content-addressed response cache.
//!
//! Everything downstream of this module sees two traits only: [`LlmJudge`]
//! and [`NliBackend`]. The checker never touches wire formats, and no other
//! module may turn raw NLI scores into a label except through
//! [`CalibratedNli`].

pub mod cache;
pub mod http;
pub mod prompt;
pub mod scripted;

use crate::trace::{EvidenceSnippet, StepKind};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JudgeError {
    /// The backend could not produce a judgment (network failure, timeout,
    /// exhausted retries). The affected step becomes `Unchecked`.
    #[error("judge unavailable: {0}")]
    Unavailable(String),
    /// The backend answered but the payload does not satisfy the response
    /// schema or its invariants.
    #[error("judge response violates schema: {0}")]
    SchemaViolation(String),
    /// The NLI backend's label order could not be established at startup.
    #[error("NLI label calibration failed: {0}")]
    CalibrationFailed(String),
    /// A scripted backend received a request no script entry matches. This is
    /// a hard test-fixture error, never silently absorbed.
    #[error("scripted judge exhausted: no entry matches request: {0}")]
    ScriptExhausted(String),
}

/// Three-way NLI label in calibrated order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

/// Calibrated, normalized NLI result.
///
/// `scores` are always in `[entailment, neutral, contradiction]` order and
/// sum to 1 within 1e-6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    pub scores: [f64; 3],
}

impl NliVerdict {
    /// Probability mass assigned to the chosen label.
    pub fn confidence(&self) -> f64 {
        match self.label {
            NliLabel::Entailment => self.scores[0],
            NliLabel::Neutral => self.scores[1],
            NliLabel::Contradiction => self.scores[2],
        }
    }
}

/// Stage A judgment: is the step even aimed at the question?
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentJudgment {
    pub is_off_target: bool,
    pub drift_type: DriftType,
    pub alignment_reasoning: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftType {
    None,
    EntityDrift,
    RelationDrift,
    ScopeDrift,
}

/// Stage B judgment: abstention detection and accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstentionJudgment {
    pub is_abstention_step: bool,
    pub abstention_is_accurate: bool,
    pub abstention_reasoning: String,
}

/// Stage C judgment: entity consistency plus verbatim quote search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteSearchJudgment {
    pub entity_match: bool,
    pub entity_match_reasoning: String,
    pub found_quote: bool,
    pub evidence_quote: String,
    pub quote_search_reasoning: String,
}

/// Optional per-stage probabilities the judge may attach.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageConfidences {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstention: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quote_search: Option<f64>,
}

/// The single structured object the LLM judge returns per step, covering
/// Stages A, B, and C in one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmJudgeResponse {
    pub alignment: AlignmentJudgment,
    pub abstention: AbstentionJudgment,
    pub quote_search: QuoteSearchJudgment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_confidences: Option<StageConfidences>,
}

impl LlmJudgeResponse {
    /// Enforce the cross-field invariants of the response schema.
    pub fn validate(&self) -> Result<(), JudgeError> {
        let off = self.alignment.is_off_target;
        let drift_none = self.alignment.drift_type == DriftType::None;
        if off == drift_none {
            return Err(JudgeError::SchemaViolation(format!(
                "drift_type must be none exactly when is_off_target is false \
                 (got is_off_target={off}, drift_type={:?})",
                self.alignment.drift_type
            )));
        }
        if self.quote_search.found_quote && self.quote_search.evidence_quote.trim().is_empty() {
            return Err(JudgeError::SchemaViolation(
                "found_quote=true with empty evidence_quote".into(),
            ));
        }
        if !self.quote_search.entity_match && self.quote_search.found_quote {
            return Err(JudgeError::SchemaViolation(
                "entity_match=false with found_quote=true".into(),
            ));
        }
        if let Some(c) = &self.stage_confidences {
            for (name, v) in [
                ("alignment", c.alignment),
                ("abstention", c.abstention),
                ("quote_search", c.quote_search),
            ] {
                if let Some(v) = v {
                    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                        return Err(JudgeError::SchemaViolation(format!(
                            "stage confidence {name}={v} outside [0,1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Why the checker is calling the LLM judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestPurpose {
    /// The combined Stage A/B/C pass over the step itself.
    StageAbc,
    /// The Stage E entity screen over prior-step candidate snippets.
    StageEScreen,
}

/// Everything the LLM judge needs to evaluate one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmJudgeRequest {
    pub purpose: RequestPurpose,
    pub question: String,
    pub step_index: usize,
    pub step_kind: StepKind,
    pub claim: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    /// Summaries of up to the last three previous steps, oldest first.
    pub prev_step_summaries: Vec<String>,
    /// Evidence retrieved by this step (or, for the Stage E screen, the
    /// candidate prior snippets under consideration).
    pub own_evidence: Vec<EvidenceSnippet>,
    /// Snippets from earlier steps; rendered as the GLOBAL EVIDENCE block for
    /// conclusion steps.
    pub prior_evidence: Vec<EvidenceSnippet>,
}

/// Entailment question for LLM-routed Stage D/E (single-judge baselines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEntailmentRequest {
    pub question: String,
    pub premise: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmEntailmentResponse {
    pub label: NliLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl LlmEntailmentResponse {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) || !c.is_finite() {
                return Err(JudgeError::SchemaViolation(format!(
                    "entailment confidence {c} outside [0,1]"
                )));
            }
        }
        Ok(())
    }
}

/// A structured-output LLM judge.
pub trait LlmJudge: Send + Sync {
    /// Stable identifier folded into cache keys.
    fn backend_id(&self) -> String;
    fn judge_step(&self, req: &LlmJudgeRequest) -> Result<LlmJudgeResponse, JudgeError>;
    fn judge_entailment(
        &self,
        req: &LlmEntailmentRequest,
    ) -> Result<LlmEntailmentResponse, JudgeError>;
}

/// A three-class NLI scorer. Scores are in the backend's *native* dimension
/// order; only [`CalibratedNli`] may interpret them as labels.
pub trait NliBackend: Send + Sync {
    fn backend_id(&self) -> String;
    fn raw_scores(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], JudgeError>;
}

/// Connection and decision parameters shared by the remote backends.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub model_name: String,
    pub nli_endpoint: String,
    pub nli_model_name: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub entailment_threshold: f64,
    pub contradiction_threshold: f64,
    /// Whitespace-token budget applied to NLI premises; longer premises are
    /// truncated and the truncation is flagged in the pipeline path.
    pub premise_token_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            api_key: None,
            model_name: "gpt-4.1-mini".into(),
            nli_endpoint: "http://127.0.0.1:8001/nli".into(),
            nli_model_name: "deberta-v3-nli".into(),
            timeout_secs: 60,
            max_retries: 3,
            entailment_threshold: 0.5,
            contradiction_threshold: 0.5,
            premise_token_budget: 384,
            cache_dir: None,
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), JudgeError> {
        for (name, t) in [
            ("entailment_threshold", self.entailment_threshold),
            ("contradiction_threshold", self.contradiction_threshold),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(JudgeError::SchemaViolation(format!(
                    "{name}={t} must lie strictly inside (0,1)"
                )));
            }
        }
        if self.premise_token_budget == 0 {
            return Err(JudgeError::SchemaViolation(
                "premise_token_budget must be positive".into(),
            ));
        }
        if self.timeout_secs == 0 {
            return Err(JudgeError::SchemaViolation(
                "timeout_secs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which native output dimension carries which label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelOrder {
    pub entailment_dim: usize,
    pub neutral_dim: usize,
    pub contradiction_dim: usize,
}

impl LabelOrder {
    /// The `[entailment, neutral, contradiction]` native order. Used only for
    /// backends that need no calibration (inert test judges).
    pub fn identity() -> Self {
        LabelOrder {
            entailment_dim: 0,
            neutral_dim: 1,
            contradiction_dim: 2,
        }
    }

    fn apply(&self, raw: [f64; 3]) -> [f64; 3] {
        [
            raw[self.entailment_dim],
            raw[self.neutral_dim],
            raw[self.contradiction_dim],
        ]
    }
}

/// Probe pair whose top score identifies the entailment dimension.
pub const CALIBRATION_ENTAILMENT_PROBE: (&str, &str) =
    ("A cat is an animal.", "A cat is an animal.");
/// Probe pair that separates contradiction from neutral among the remaining
/// two dimensions.
pub const CALIBRATION_CONTRADICTION_PROBE: (&str, &str) =
    ("The cat is alive.", "The cat is dead.");

/// Establish the backend's label order from the two probe pairs.
///
/// Calibration is idempotent: it holds no state and a second run against the
/// same backend returns the same mapping.
pub fn calibrate_nli_labels(backend: &dyn NliBackend) -> Result<LabelOrder, JudgeError> {
    let ent = backend.raw_scores(
        CALIBRATION_ENTAILMENT_PROBE.0,
        CALIBRATION_ENTAILMENT_PROBE.1,
    )?;
    let entailment_dim = unique_argmax(&ent, &[]).ok_or_else(|| {
        JudgeError::CalibrationFailed(format!(
            "entailment probe has no unique top dimension: {ent:?}"
        ))
    })?;
    let con = backend.raw_scores(
        CALIBRATION_CONTRADICTION_PROBE.0,
        CALIBRATION_CONTRADICTION_PROBE.1,
    )?;
    let contradiction_dim = unique_argmax(&con, &[entailment_dim]).ok_or_else(|| {
        JudgeError::CalibrationFailed(format!(
            "contradiction probe does not separate the remaining dimensions: {con:?}"
        ))
    })?;
    let neutral_dim = (0..3)
        .find(|d| *d != entailment_dim && *d != contradiction_dim)
        .expect("three dimensions leave exactly one");
    Ok(LabelOrder {
        entailment_dim,
        neutral_dim,
        contradiction_dim,
    })
}

fn unique_argmax(scores: &[f64; 3], excluded: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut tied = false;
    for (i, &s) in scores.iter().enumerate() {
        if excluded.contains(&i) || !s.is_finite() {
            continue;
        }
        match best {
            None => best = Some((i, s)),
            Some((_, b)) if s > b => {
                best = Some((i, s));
                tied = false;
            }
            Some((_, b)) if s == b => tied = true,
            _ => {}
        }
    }
    match (best, tied) {
        (Some((i, _)), false) => Some(i),
        _ => None,
    }
}

/// One NLI judgment together with whether the premise had to be truncated to
/// fit the token budget.
#[derive(Debug, Clone, PartialEq)]
pub struct NliJudgment {
    pub verdict: NliVerdict,
    pub premise_truncated: bool,
}

/// An NLI backend whose label order has been pinned by calibration.
///
/// This is the only path from raw scores to an [`NliVerdict`].
pub struct CalibratedNli {
    backend: Arc<dyn NliBackend>,
    order: LabelOrder,
    entailment_threshold: f64,
    contradiction_threshold: f64,
    premise_token_budget: usize,
}

impl CalibratedNli {
    /// Probe the backend and build the calibrated judge.
    pub fn calibrate(backend: Arc<dyn NliBackend>, config: &JudgeConfig) -> Result<Self, JudgeError> {
        config.validate()?;
        let order = calibrate_nli_labels(backend.as_ref())?;
        Ok(CalibratedNli {
            backend,
            order,
            entailment_threshold: config.entailment_threshold,
            contradiction_threshold: config.contradiction_threshold,
            premise_token_budget: config.premise_token_budget,
        })
    }

    /// Build with an explicit label order, skipping the probes. Intended for
    /// inert judges in paths that never consult NLI (for example the
    /// flag-everything baseline); real backends go through [`Self::calibrate`].
    pub fn with_order(backend: Arc<dyn NliBackend>, order: LabelOrder, config: &JudgeConfig) -> Self {
        CalibratedNli {
            backend,
            order,
            entailment_threshold: config.entailment_threshold,
            contradiction_threshold: config.contradiction_threshold,
            premise_token_budget: config.premise_token_budget,
        }
    }

    pub fn backend_id(&self) -> String {
        self.backend.backend_id()
    }

    pub fn label_order(&self) -> LabelOrder {
        self.order
    }

    /// Score `(premise, hypothesis)` and decide the label.
    ///
    /// The premise is truncated to the configured token budget first. Scores
    /// are mapped through the calibrated order and normalized; the label is
    /// Entailment if the entailment score clears its threshold, Contradiction
    /// if the contradiction score clears its threshold, and Neutral otherwise
    /// or when both clear at once (tie rule).
    pub fn judge(&self, premise: &str, hypothesis: &str) -> Result<NliJudgment, JudgeError> {
        let (premise, premise_truncated) = truncate_tokens(premise, self.premise_token_budget);
        let raw = self.backend.raw_scores(&premise, hypothesis)?;
        let mapped = self.order.apply(raw);
        let sum: f64 = mapped.iter().sum();
        if !sum.is_finite() || sum <= 0.0 || mapped.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(JudgeError::SchemaViolation(format!(
                "NLI scores {mapped:?} cannot be normalized"
            )));
        }
        let scores = [mapped[0] / sum, mapped[1] / sum, mapped[2] / sum];
        let label = match (
            scores[0] >= self.entailment_threshold,
            scores[2] >= self.contradiction_threshold,
        ) {
            (true, false) => NliLabel::Entailment,
            (false, true) => NliLabel::Contradiction,
            _ => NliLabel::Neutral,
        };
        Ok(NliJudgment {
            verdict: NliVerdict { label, scores },
            premise_truncated,
        })
    }
}

/// Cap `text` at `budget` whitespace tokens. Returns the (possibly shortened)
/// text and whether anything was dropped.
pub fn truncate_tokens(text: &str, budget: usize) -> (String, bool) {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() <= budget {
        (text.to_string(), false)
    } else {
        (tokens[..budget].join(" "), true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Stub backend with a fixed native label order and canned behaviour for
    /// the probe pairs.
    struct StubNli {
        // native dimension carrying each label: (entailment, neutral, contradiction)
        ent: usize,
        neu: usize,
        con: usize,
        // scores (in label space) returned for non-probe calls
        label_scores: [f64; 3],
    }

    impl NliBackend for StubNli {
        fn backend_id(&self) -> String {
            "stub-nli".into()
        }
        fn raw_scores(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], JudgeError> {
            let in_label_space = if (premise, hypothesis) == CALIBRATION_ENTAILMENT_PROBE {
                [0.9, 0.07, 0.03]
            } else if (premise, hypothesis) == CALIBRATION_CONTRADICTION_PROBE {
                [0.02, 0.08, 0.9]
            } else {
                self.label_scores
            };
            let mut native = [0.0; 3];
            native[self.ent] = in_label_space[0];
            native[self.neu] = in_label_space[1];
            native[self.con] = in_label_space[2];
            Ok(native)
        }
    }

    fn calibrated(stub: StubNli) -> CalibratedNli {
        CalibratedNli::calibrate(Arc::new(stub), &JudgeConfig::default()).unwrap()
    }

    #[test]
    fn calibration_handles_permuted_label_orders() {
        // [contradiction, entailment, neutral] native order.
        let nli = calibrated(StubNli {
            ent: 1,
            neu: 2,
            con: 0,
            label_scores: [0.9, 0.05, 0.05],
        });
        assert_eq!(
            nli.label_order(),
            LabelOrder {
                entailment_dim: 1,
                neutral_dim: 2,
                contradiction_dim: 0
            }
        );
        let j = nli.judge("p", "h").unwrap();
        assert_eq!(j.verdict.label, NliLabel::Entailment);
        assert!((j.verdict.scores[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn calibration_identity_order() {
        let nli = calibrated(StubNli {
            ent: 0,
            neu: 1,
            con: 2,
            label_scores: [0.1, 0.2, 0.7],
        });
        assert_eq!(nli.label_order(), LabelOrder::identity());
        assert_eq!(nli.judge("p", "h").unwrap().verdict.label, NliLabel::Contradiction);
    }

    #[test]
    fn calibration_is_idempotent() {
        let stub = StubNli {
            ent: 2,
            neu: 0,
            con: 1,
            label_scores: [0.5, 0.3, 0.2],
        };
        let first = calibrate_nli_labels(&stub).unwrap();
        let second = calibrate_nli_labels(&stub).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn uniform_probe_scores_fail_calibration() {
        struct Uniform;
        impl NliBackend for Uniform {
            fn backend_id(&self) -> String {
                "uniform".into()
            }
            fn raw_scores(&self, _: &str, _: &str) -> Result<[f64; 3], JudgeError> {
                Ok([1.0 / 3.0; 3])
            }
        }
        let err = calibrate_nli_labels(&Uniform).unwrap_err();
        assert!(matches!(err, JudgeError::CalibrationFailed(_)));
    }

    #[test]
    fn threshold_rule_with_hand_scores() {
        let cases = [
            ([0.9, 0.05, 0.05], NliLabel::Entailment),
            ([0.4, 0.35, 0.25], NliLabel::Neutral),
            ([0.05, 0.1, 0.85], NliLabel::Contradiction),
        ];
        for (scores, expect) in cases {
            let nli = calibrated(StubNli {
                ent: 0,
                neu: 1,
                con: 2,
                label_scores: scores,
            });
            assert_eq!(nli.judge("p", "h").unwrap().verdict.label, expect, "{scores:?}");
        }
    }

    #[test]
    fn unnormalized_tie_resolves_to_neutral() {
        // (0.55, 0.0, 0.55) normalizes to (0.5, 0.0, 0.5): both thresholds met.
        let nli = calibrated(StubNli {
            ent: 0,
            neu: 1,
            con: 2,
            label_scores: [0.55, 0.0, 0.55],
        });
        let j = nli.judge("p", "h").unwrap();
        assert_eq!(j.verdict.label, NliLabel::Neutral);
        let sum: f64 = j.verdict.scores.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scores_always_normalize() {
        let nli = calibrated(StubNli {
            ent: 0,
            neu: 1,
            con: 2,
            label_scores: [3.0, 2.0, 5.0],
        });
        let j = nli.judge("p", "h").unwrap();
        let sum: f64 = j.verdict.scores.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert_eq!(j.verdict.label, NliLabel::Contradiction);
        assert!((j.verdict.confidence() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn premise_truncation_is_flagged() {
        let nli = CalibratedNli::with_order(
            Arc::new(StubNli {
                ent: 0,
                neu: 1,
                con: 2,
                label_scores: [0.8, 0.1, 0.1],
            }),
            LabelOrder::identity(),
            &JudgeConfig {
                premise_token_budget: 3,
                ..JudgeConfig::default()
            },
        );
        let long = "one two three four five";
        let j = nli.judge(long, "h").unwrap();
        assert!(j.premise_truncated);
        let j = nli.judge("one two three", "h").unwrap();
        assert!(!j.premise_truncated);
    }

    #[test]
    fn response_invariants_are_enforced() {
        let mut resp = LlmJudgeResponse {
            alignment: AlignmentJudgment {
                is_off_target: false,
                drift_type: DriftType::None,
                alignment_reasoning: "on target".into(),
            },
            abstention: AbstentionJudgment {
                is_abstention_step: false,
                abstention_is_accurate: false,
                abstention_reasoning: String::new(),
            },
            quote_search: QuoteSearchJudgment {
                entity_match: true,
                entity_match_reasoning: "same entity".into(),
                found_quote: true,
                evidence_quote: "a verbatim span".into(),
                quote_search_reasoning: String::new(),
            },
            stage_confidences: None,
        };
        assert!(resp.validate().is_ok());

        let mut bad = resp.clone();
        bad.alignment.is_off_target = true; // drift still none
        assert!(bad.validate().is_err());

        let mut bad = resp.clone();
        bad.alignment.drift_type = DriftType::EntityDrift; // not off target
        assert!(bad.validate().is_err());

        let mut bad = resp.clone();
        bad.quote_search.evidence_quote = "  ".into();
        assert!(bad.validate().is_err());

        let mut bad = resp.clone();
        bad.quote_search.entity_match = false; // quote still found
        assert!(bad.validate().is_err());

        resp.stage_confidences = Some(StageConfidences {
            alignment: Some(1.5),
            ..Default::default()
        });
        assert!(resp.validate().is_err());
    }

    #[test]
    fn config_threshold_bounds() {
        let mut cfg = JudgeConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.entailment_threshold = 0.0;
        assert!(cfg.validate().is_err());
        cfg.entailment_threshold = 1.0;
        assert!(cfg.validate().is_err());
        cfg.entailment_threshold = 0.5;
        cfg.premise_token_budget = 0;
        assert!(cfg.validate().is_err());
    }
}
