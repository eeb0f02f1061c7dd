//! The five-stage evidence-gap decision tree and its baseline variants.
//!
//! Traversal for the full tree, per step:
//!
//! * **Stage A** (LLM alignment): an off-target step is a contradicted claim,
//!   stop.
//! * **Stage B** (LLM abstention): runs only when Stage A passed and the
//!   claim carries an abstention marker. A grounded abstention is no gap;
//!   a wrong abstention is functionally a contradicted claim.
//! * **Stage C** (LLM entity + quote): evidence about the wrong entity is
//!   irrelevant evidence, stop. With the entity matched, a found quote routes
//!   to Stage D; no quote routes conclusion steps to Stage E and inference
//!   steps to no-gap.
//! * **Stage D** (NLI, premise = the Stage C quote, hypothesis = the claim):
//!   entailment is no gap, neutral is a missing bridge, contradiction is a
//!   contradicted claim.
//! * **Stage E** (NLI over entity-matched prior snippets, most recent first):
//!   the first entailing premise ends the search with no gap; otherwise the
//!   evidence never covered the claim — irrelevant evidence.
//!
//! The search query is never used as an NLI hypothesis; hypotheses are always
//! claim text. Gap exits are early: once a stage emits a gap no later stage's
//! judge is consulted. Every `(stage, gap type)` exit the tree can produce is
//! one of Table 1's six pairs; [`GapVerdict::table1_consistent`] asserts this
//! on every tree verdict.

use crate::gap::{GapType, RepairAction};
use crate::judge::{
    CalibratedNli, JudgeError, LlmEntailmentRequest, LlmEntailmentResponse, LlmJudge,
    LlmJudgeRequest, LlmJudgeResponse, NliLabel, NliVerdict, RequestPurpose,
};
use crate::trace::{EvidenceSnippet, ReasoningTrace, Step, StepKind, TraceError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    /// Hard judge failures (script exhaustion, calibration) that must not be
    /// silently absorbed into unchecked verdicts.
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("invalid checker variant: {0}")]
    InvalidVariant(String),
}

/// Node of the decision tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    A,
    B,
    C,
    D,
    E,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Stage::A),
            "B" => Ok(Stage::B),
            "C" => Ok(Stage::C),
            "D" => Ok(Stage::D),
            "E" => Ok(Stage::E),
            other => Err(format!("unknown stage {other:?}")),
        }
    }
}

/// Closed enumeration of stage outcomes; the serialized form is the
/// colon-delimited tag that appears in pipeline paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageOutcome {
    #[serde(rename = "stageA:pass")]
    APass,
    #[serde(rename = "stageA:off_target")]
    AOffTarget,
    #[serde(rename = "stageB:not_abstention")]
    BNotAbstention,
    #[serde(rename = "stageB:grounded_abstention")]
    BGroundedAbstention,
    #[serde(rename = "stageB:wrong_abstention")]
    BWrongAbstention,
    #[serde(rename = "stageC:entity_mismatch")]
    CEntityMismatch,
    #[serde(rename = "stageC:quote_found")]
    CQuoteFound,
    #[serde(rename = "stageC:no_quote")]
    CNoQuote,
    #[serde(rename = "stageC:no_claim")]
    CNoClaim,
    #[serde(rename = "stageD:entailment")]
    DEntailment,
    #[serde(rename = "stageD:neutral")]
    DNeutral,
    #[serde(rename = "stageD:contradiction")]
    DContradiction,
    #[serde(rename = "stageD:truncated_premise")]
    DTruncatedPremise,
    #[serde(rename = "stageE:entailment")]
    EEntailment,
    #[serde(rename = "stageE:no_entailing_prior")]
    ENoEntailingPrior,
    #[serde(rename = "stageE:truncated_premise")]
    ETruncatedPremise,
}

impl StageOutcome {
    pub fn stage(self) -> Stage {
        use StageOutcome::*;
        match self {
            APass | AOffTarget => Stage::A,
            BNotAbstention | BGroundedAbstention | BWrongAbstention => Stage::B,
            CEntityMismatch | CQuoteFound | CNoQuote | CNoClaim => Stage::C,
            DEntailment | DNeutral | DContradiction | DTruncatedPremise => Stage::D,
            EEntailment | ENoEntailingPrior | ETruncatedPremise => Stage::E,
        }
    }

    pub fn tag(self) -> &'static str {
        use StageOutcome::*;
        match self {
            APass => "stageA:pass",
            AOffTarget => "stageA:off_target",
            BNotAbstention => "stageB:not_abstention",
            BGroundedAbstention => "stageB:grounded_abstention",
            BWrongAbstention => "stageB:wrong_abstention",
            CEntityMismatch => "stageC:entity_mismatch",
            CQuoteFound => "stageC:quote_found",
            CNoQuote => "stageC:no_quote",
            CNoClaim => "stageC:no_claim",
            DEntailment => "stageD:entailment",
            DNeutral => "stageD:neutral",
            DContradiction => "stageD:contradiction",
            DTruncatedPremise => "stageD:truncated_premise",
            EEntailment => "stageE:entailment",
            ENoEntailingPrior => "stageE:no_entailing_prior",
            ETruncatedPremise => "stageE:truncated_premise",
        }
    }
}

/// One node visit in the pipeline path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDecision {
    pub stage: Stage,
    pub outcome: StageOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl StageDecision {
    fn new(outcome: StageOutcome, confidence: Option<f64>) -> Self {
        StageDecision {
            stage: outcome.stage(),
            outcome,
            confidence,
        }
    }
}

/// Typed verdict for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapVerdict {
    pub gap_type: GapType,
    /// Geometric mean of the stage confidences collected along the path;
    /// 1.0 when no stage emitted one.
    pub confidence: f64,
    pub rationale: String,
    pub pipeline_path: Vec<StageDecision>,
    pub repair_action: RepairAction,
    /// True when a judge failure prevented checking; the verdict defaults to
    /// `NoGap` for reward purposes but metrics must exclude it.
    pub unchecked: bool,
}

impl GapVerdict {
    fn from_path(gap_type: GapType, pipeline_path: Vec<StageDecision>, rationale: String) -> Self {
        let confidence = geometric_mean_confidence(&pipeline_path);
        GapVerdict {
            gap_type,
            confidence,
            rationale,
            repair_action: gap_type.repair_action(),
            pipeline_path,
            unchecked: false,
        }
    }

    fn unchecked_for(reason: &str, pipeline_path: Vec<StageDecision>) -> Self {
        let confidence = geometric_mean_confidence(&pipeline_path);
        GapVerdict {
            gap_type: GapType::NoGap,
            confidence,
            rationale: format!("unchecked: {reason}"),
            repair_action: RepairAction::None,
            pipeline_path,
            unchecked: true,
        }
    }

    /// Tags joined with "→", the report form of the pipeline path.
    pub fn path_string(&self) -> String {
        self.pipeline_path
            .iter()
            .map(|d| d.outcome.tag())
            .collect::<Vec<_>>()
            .join("→")
    }

    /// Whether this verdict respects the closed exit table of the decision
    /// tree: gaps may only be `(A,CC)`, `(B,CC)`, `(C,IE)`, `(D,CC)`,
    /// `(D,MB)`, `(E,IE)`; everything else must be a no-gap exit. Holds for
    /// the tree variants; the degenerate baselines (flag-everything, pure
    /// NLI) follow their own mapping and are not bound by it.
    pub fn table1_consistent(&self) -> bool {
        if self.unchecked || self.gap_type == GapType::NoGap {
            return true;
        }
        let Some(last) = self.pipeline_path.last() else {
            return false;
        };
        matches!(
            (last.stage, self.gap_type),
            (Stage::A, GapType::ContradictedClaim)
                | (Stage::B, GapType::ContradictedClaim)
                | (Stage::C, GapType::IrrelevantEvidence)
                | (Stage::D, GapType::ContradictedClaim)
                | (Stage::D, GapType::MissingBridge)
                | (Stage::E, GapType::IrrelevantEvidence)
        )
    }
}

fn geometric_mean_confidence(path: &[StageDecision]) -> f64 {
    let confs: Vec<f64> = path.iter().filter_map(|d| d.confidence).collect();
    if confs.is_empty() {
        return 1.0;
    }
    if confs.iter().any(|c| *c <= 0.0) {
        return 0.0;
    }
    let ln_mean = confs.iter().map(|c| c.ln()).sum::<f64>() / confs.len() as f64;
    ln_mean.exp()
}

/// Checker family member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    /// The full hybrid tree: LLM Stages A–C, NLI Stages D–E.
    StepGap,
    /// LLM at every stage, no confidence gating.
    LlmStrict,
    /// LLM at every stage, gap verdicts below confidence 0.5 suppressed.
    LlmOnly,
    /// Same traversal as LlmStrict under a single larger judge model.
    SingleLlmXl,
    /// No LLM stages: one entailment call over all accumulated evidence.
    NliOnly,
    /// Degenerate baseline: every step is flagged IE.
    FlagEverything,
}

impl VariantName {
    pub const ALL: [VariantName; 6] = [
        VariantName::StepGap,
        VariantName::LlmStrict,
        VariantName::LlmOnly,
        VariantName::SingleLlmXl,
        VariantName::NliOnly,
        VariantName::FlagEverything,
    ];

    /// Does this variant traverse the five-stage tree?
    pub fn is_tree(self) -> bool {
        matches!(
            self,
            VariantName::StepGap
                | VariantName::LlmStrict
                | VariantName::LlmOnly
                | VariantName::SingleLlmXl
        )
    }

    /// Do Stages D/E route through the LLM judge instead of NLI?
    pub fn llm_routed_entailment(self) -> bool {
        matches!(
            self,
            VariantName::LlmStrict | VariantName::LlmOnly | VariantName::SingleLlmXl
        )
    }

    /// Does the variant consult the NLI judge at all?
    pub fn uses_nli(self) -> bool {
        matches!(self, VariantName::StepGap | VariantName::NliOnly)
    }
}

impl fmt::Display for VariantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VariantName::StepGap => "step_gap",
            VariantName::LlmStrict => "llm_strict",
            VariantName::LlmOnly => "llm_only",
            VariantName::SingleLlmXl => "single_llm_xl",
            VariantName::NliOnly => "nli_only",
            VariantName::FlagEverything => "flag_everything",
        };
        f.write_str(s)
    }
}

impl FromStr for VariantName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "stepgap" => Ok(VariantName::StepGap),
            "llmstrict" => Ok(VariantName::LlmStrict),
            "llmonly" => Ok(VariantName::LlmOnly),
            "singlellmxl" => Ok(VariantName::SingleLlmXl),
            "nlionly" => Ok(VariantName::NliOnly),
            "flageverything" => Ok(VariantName::FlagEverything),
            _ => Err(format!("unknown checker variant {s:?}")),
        }
    }
}

/// A variant plus its run-time knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerVariant {
    pub name: VariantName,
    /// Tree stages skipped as if they always passed through. Only A and E
    /// are ablatable, and only for StepGap/LlmOnly.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub stage_ablations: BTreeSet<Stage>,
    /// Gap verdicts whose overall confidence falls below this are suppressed
    /// to NoGap. Fixed at 0.5 for LlmOnly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_confidence_threshold: Option<f64>,
}

impl CheckerVariant {
    pub fn new(name: VariantName) -> Self {
        CheckerVariant {
            name,
            stage_ablations: BTreeSet::new(),
            overall_confidence_threshold: match name {
                VariantName::LlmOnly => Some(0.5),
                _ => None,
            },
        }
    }

    pub fn with_ablations(
        name: VariantName,
        stages: impl IntoIterator<Item = Stage>,
    ) -> Result<Self, CheckError> {
        let mut variant = Self::new(name);
        variant.stage_ablations = stages.into_iter().collect();
        variant.validate()?;
        Ok(variant)
    }

    pub fn validate(&self) -> Result<(), CheckError> {
        if !self.stage_ablations.is_empty()
            && !matches!(self.name, VariantName::StepGap | VariantName::LlmOnly)
        {
            return Err(CheckError::InvalidVariant(format!(
                "stage ablations are only defined for step_gap and llm_only, not {}",
                self.name
            )));
        }
        if let Some(bad) = self
            .stage_ablations
            .iter()
            .find(|s| !matches!(s, Stage::A | Stage::E))
        {
            return Err(CheckError::InvalidVariant(format!(
                "stage {bad} cannot be ablated; only A and E can"
            )));
        }
        if let Some(t) = self.overall_confidence_threshold {
            if !(0.0..=1.0).contains(&t) || !t.is_finite() {
                return Err(CheckError::InvalidVariant(format!(
                    "confidence threshold {t} outside [0,1]"
                )));
            }
        }
        if self.name == VariantName::LlmOnly && self.overall_confidence_threshold != Some(0.5) {
            return Err(CheckError::InvalidVariant(
                "llm_only requires overall_confidence_threshold = 0.5".into(),
            ));
        }
        Ok(())
    }

    fn ablated(&self, stage: Stage) -> bool {
        self.stage_ablations.contains(&stage)
    }
}

/// Per-stage judge call counters, shared across worker threads.
#[derive(Debug, Default)]
pub struct StageCallCounters {
    pub stage_abc_llm: AtomicU64,
    pub stage_e_screen_llm: AtomicU64,
    pub stage_d_nli: AtomicU64,
    pub stage_e_nli: AtomicU64,
    pub stage_d_llm_entailment: AtomicU64,
    pub stage_e_llm_entailment: AtomicU64,
    pub nli_only: AtomicU64,
}

impl StageCallCounters {
    pub fn snapshot(&self) -> std::collections::BTreeMap<String, u64> {
        [
            ("stage_abc_llm", &self.stage_abc_llm),
            ("stage_e_screen_llm", &self.stage_e_screen_llm),
            ("stage_d_nli", &self.stage_d_nli),
            ("stage_e_nli", &self.stage_e_nli),
            ("stage_d_llm_entailment", &self.stage_d_llm_entailment),
            ("stage_e_llm_entailment", &self.stage_e_llm_entailment),
            ("nli_only", &self.nli_only),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.load(Ordering::SeqCst)))
        .collect()
    }
}

/// The pair of judges a check runs against, plus shared call accounting.
pub struct JudgeSet {
    pub llm: Arc<dyn LlmJudge>,
    pub nli: Arc<CalibratedNli>,
    pub counters: StageCallCounters,
}

impl JudgeSet {
    pub fn new(llm: Arc<dyn LlmJudge>, nli: Arc<CalibratedNli>) -> Self {
        JudgeSet {
            llm,
            nli,
            counters: StageCallCounters::default(),
        }
    }

    /// Judges that are never consulted, for variants that need none
    /// (flag-everything). Any actual call fails loudly with ScriptExhausted.
    pub fn inert() -> Self {
        use crate::judge::scripted::{ScriptedLlmJudge, ScriptedNli};
        use crate::judge::{JudgeConfig, LabelOrder};
        let llm = ScriptedLlmJudge::new(Vec::new()).expect("empty script is valid");
        let nli = CalibratedNli::with_order(
            Arc::new(ScriptedNli::new(Vec::new())),
            LabelOrder::identity(),
            &JudgeConfig::default(),
        );
        JudgeSet::new(Arc::new(llm), Arc::new(nli))
    }
}

/// Everything judge-visible from the check: the raw responses behind a
/// verdict, kept for distillation export.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgeArtifacts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm_response: Option<LlmJudgeResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_e_screen_response: Option<LlmJudgeResponse>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nli_verdicts: Vec<NliVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub llm_entailments: Vec<LlmEntailmentResponse>,
}

/// Trace-level context for a single step check.
pub struct CheckContext<'a> {
    pub question: &'a str,
    /// Steps strictly before the one being checked.
    pub prior_steps: &'a [Step],
}

/// Markers that let Stage B run; the LLM's is_abstention_step stays
/// authoritative once it does.
const ABSTENTION_MARKERS: [&str; 3] = ["n/a", "unknown", "cannot determine"];

fn claim_has_abstention_marker(claim: &str) -> bool {
    let lower = claim.to_lowercase();
    ABSTENTION_MARKERS.iter().any(|m| lower.contains(m))
}

/// Surface patterns that signal a retraction.
pub const RETRACTION_PATTERNS: [&str; 4] = ["actually", "wait", "correction", "i was wrong"];

fn contains_word_bounded(haystack_lower: &str, needle_lower: &str) -> bool {
    let bytes = haystack_lower.as_bytes();
    for (pos, _) in haystack_lower.match_indices(needle_lower) {
        let before_ok = pos == 0 || !bytes[pos - 1].is_ascii_alphanumeric();
        let end = pos + needle_lower.len();
        let after_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
        if before_ok && after_ok {
            return true;
        }
    }
    false
}

/// True iff the step's text contains a retraction pattern (case-insensitive,
/// word-bounded) and its claim differs from the previous step's claim.
pub fn detect_retraction(step: &Step, previous_claim: &str) -> bool {
    let text = step.raw_text.to_lowercase();
    let pattern_hit = RETRACTION_PATTERNS
        .iter()
        .any(|p| contains_word_bounded(&text, p));
    pattern_hit && step.claim().trim() != previous_claim.trim()
}

/// Signals the tree emits for one entailment decision, regardless of which
/// judge answered it.
struct EntailmentAnswer {
    label: NliLabel,
    confidence: Option<f64>,
    premise_truncated: bool,
}

enum JudgeOutcome<T> {
    Answered(T),
    /// Judge unreachable; finish the step as unchecked.
    Unavailable(String),
}

fn absorb_soft<T>(result: Result<T, JudgeError>) -> Result<JudgeOutcome<T>, CheckError> {
    match result {
        Ok(v) => Ok(JudgeOutcome::Answered(v)),
        Err(JudgeError::Unavailable(m)) | Err(JudgeError::SchemaViolation(m)) => {
            Ok(JudgeOutcome::Unavailable(m))
        }
        Err(hard) => Err(CheckError::Judge(hard)),
    }
}

fn step_summary(step: &Step) -> String {
    let mut s = format!("step {}", step.index);
    if let Some(q) = &step.query {
        s.push_str(&format!(" searched {q:?}"));
    }
    if let Some(a) = &step.answer_text {
        s.push_str(&format!(" answered {a:?}"));
    }
    if !step.claim_text.is_empty() {
        s.push_str(": ");
        s.push_str(&step.claim_text);
    }
    s
}

fn render_snippet(snippet: &EvidenceSnippet) -> String {
    if snippet.doc_title.is_empty() {
        snippet.body.clone()
    } else {
        format!("{}: {}", snippet.doc_title, snippet.body)
    }
}

/// Check one step and return the verdict only.
pub fn check_step(
    step: &Step,
    evidence_prefix: &[EvidenceSnippet],
    variant: &CheckerVariant,
    judges: &JudgeSet,
    ctx: &CheckContext<'_>,
) -> Result<GapVerdict, CheckError> {
    check_step_full(step, evidence_prefix, variant, judges, ctx).map(|(v, _)| v)
}

/// Check one step, keeping the raw judge responses for export.
pub fn check_step_full(
    step: &Step,
    evidence_prefix: &[EvidenceSnippet],
    variant: &CheckerVariant,
    judges: &JudgeSet,
    ctx: &CheckContext<'_>,
) -> Result<(GapVerdict, JudgeArtifacts), CheckError> {
    variant.validate()?;
    let mut artifacts = JudgeArtifacts::default();

    let verdict = match variant.name {
        VariantName::FlagEverything => GapVerdict {
            gap_type: GapType::IrrelevantEvidence,
            confidence: 1.0,
            rationale: "flag-everything baseline: every step is reported as a gap".into(),
            pipeline_path: Vec::new(),
            repair_action: RepairAction::ReSearch,
            unchecked: false,
        },
        VariantName::NliOnly => check_nli_only(step, evidence_prefix, judges, &mut artifacts)?,
        _ => {
            let verdict = check_tree(step, evidence_prefix, variant, judges, ctx, &mut artifacts)?;
            debug_assert!(verdict.table1_consistent(), "tree exit violates Table 1");
            match variant.overall_confidence_threshold {
                Some(tau) => apply_confidence_gate(verdict, tau),
                None => verdict,
            }
        }
    };
    Ok((verdict, artifacts))
}

/// Suppress a gap verdict whose overall confidence falls below `tau`.
pub fn apply_confidence_gate(verdict: GapVerdict, tau: f64) -> GapVerdict {
    if !verdict.unchecked && verdict.gap_type.is_gap() && verdict.confidence < tau {
        GapVerdict {
            gap_type: GapType::NoGap,
            repair_action: RepairAction::None,
            rationale: format!(
                "{} [gap suppressed: overall confidence {:.4} below threshold {:.2}]",
                verdict.rationale, verdict.confidence, tau
            ),
            ..verdict
        }
    } else {
        verdict
    }
}

fn check_nli_only(
    step: &Step,
    evidence_prefix: &[EvidenceSnippet],
    judges: &JudgeSet,
    artifacts: &mut JudgeArtifacts,
) -> Result<GapVerdict, CheckError> {
    let premise = evidence_prefix
        .iter()
        .map(render_snippet)
        .collect::<Vec<_>>()
        .join("\n");
    if premise.trim().is_empty() {
        return Ok(GapVerdict {
            gap_type: GapType::IrrelevantEvidence,
            confidence: 1.0,
            rationale: "no evidence retrieved by this point; claim cannot be entailed".into(),
            pipeline_path: Vec::new(),
            repair_action: RepairAction::ReSearch,
            unchecked: false,
        });
    }
    judges.counters.nli_only.fetch_add(1, Ordering::SeqCst);
    let judgment = match absorb_soft(judges.nli.judge(&premise, step.claim()))? {
        JudgeOutcome::Answered(j) => j,
        JudgeOutcome::Unavailable(m) => return Ok(GapVerdict::unchecked_for(&m, Vec::new())),
    };
    artifacts.nli_verdicts.push(judgment.verdict.clone());
    let mut path = Vec::new();
    if judgment.premise_truncated {
        path.push(StageDecision::new(StageOutcome::DTruncatedPremise, None));
    }
    let conf = Some(judgment.verdict.confidence());
    let (outcome, gap_type, note) = match judgment.verdict.label {
        NliLabel::Entailment => (StageOutcome::DEntailment, GapType::NoGap, "entailed"),
        NliLabel::Contradiction => (
            StageOutcome::DContradiction,
            GapType::ContradictedClaim,
            "contradicted",
        ),
        NliLabel::Neutral => (
            StageOutcome::DNeutral,
            GapType::IrrelevantEvidence,
            "not entailed",
        ),
    };
    path.push(StageDecision::new(outcome, conf));
    Ok(GapVerdict::from_path(
        gap_type,
        path,
        format!("pure entailment over all accumulated evidence: claim is {note}"),
    ))
}

fn check_tree(
    step: &Step,
    evidence_prefix: &[EvidenceSnippet],
    variant: &CheckerVariant,
    judges: &JudgeSet,
    ctx: &CheckContext<'_>,
    artifacts: &mut JudgeArtifacts,
) -> Result<GapVerdict, CheckError> {
    let mut path: Vec<StageDecision> = Vec::new();

    let prev_step_summaries: Vec<String> = ctx
        .prior_steps
        .iter()
        .rev()
        .take(3)
        .rev()
        .map(step_summary)
        .collect();
    let prior_evidence: Vec<EvidenceSnippet> = evidence_prefix
        .iter()
        .filter(|s| s.source_step < step.index)
        .cloned()
        .collect();

    let request = LlmJudgeRequest {
        purpose: RequestPurpose::StageAbc,
        question: ctx.question.to_string(),
        step_index: step.index,
        step_kind: step.kind(),
        claim: step.claim().to_string(),
        query: step.query.clone(),
        prev_step_summaries: prev_step_summaries.clone(),
        own_evidence: step.evidence.clone(),
        prior_evidence: prior_evidence.clone(),
    };
    judges.counters.stage_abc_llm.fetch_add(1, Ordering::SeqCst);
    let response = match absorb_soft(judges.llm.judge_step(&request))? {
        JudgeOutcome::Answered(r) => r,
        JudgeOutcome::Unavailable(m) => return Ok(GapVerdict::unchecked_for(&m, path)),
    };
    if let Err(e) = response.validate() {
        return Ok(GapVerdict::unchecked_for(&e.to_string(), path));
    }
    artifacts.llm_response = Some(response.clone());
    let confidences = response.stage_confidences.unwrap_or_default();

    // Stage A: alignment.
    if !variant.ablated(Stage::A) {
        if response.alignment.is_off_target {
            path.push(StageDecision::new(
                StageOutcome::AOffTarget,
                confidences.alignment,
            ));
            return Ok(GapVerdict::from_path(
                GapType::ContradictedClaim,
                path,
                format!(
                    "step is off-target ({:?}): {}",
                    response.alignment.drift_type, response.alignment.alignment_reasoning
                ),
            ));
        }
        path.push(StageDecision::new(StageOutcome::APass, confidences.alignment));
    }

    // Stage B: abstention, pre-filtered on surface markers.
    if claim_has_abstention_marker(step.claim()) {
        if response.abstention.is_abstention_step {
            if response.abstention.abstention_is_accurate {
                path.push(StageDecision::new(
                    StageOutcome::BGroundedAbstention,
                    confidences.abstention,
                ));
                return Ok(GapVerdict::from_path(
                    GapType::NoGap,
                    path,
                    format!(
                        "grounded abstention: {}",
                        response.abstention.abstention_reasoning
                    ),
                ));
            }
            path.push(StageDecision::new(
                StageOutcome::BWrongAbstention,
                confidences.abstention,
            ));
            return Ok(GapVerdict::from_path(
                GapType::ContradictedClaim,
                path,
                format!(
                    "wrong abstention, the evidence contains the fact: {}",
                    response.abstention.abstention_reasoning
                ),
            ));
        }
        path.push(StageDecision::new(
            StageOutcome::BNotAbstention,
            confidences.abstention,
        ));
    }

    // Stage C: entity consistency plus quote search.
    if !response.quote_search.entity_match {
        path.push(StageDecision::new(
            StageOutcome::CEntityMismatch,
            confidences.quote_search,
        ));
        return Ok(GapVerdict::from_path(
            GapType::IrrelevantEvidence,
            path,
            format!(
                "evidence is about a different entity: {}",
                response.quote_search.entity_match_reasoning
            ),
        ));
    }
    if step.kind() == StepKind::Inference && step.claim().trim().is_empty() {
        path.push(StageDecision::new(
            StageOutcome::CNoClaim,
            confidences.quote_search,
        ));
        return Ok(GapVerdict::from_path(
            GapType::NoGap,
            path,
            "pure search issuance with no claim text; nothing to verify".into(),
        ));
    }
    if !response.quote_search.found_quote {
        path.push(StageDecision::new(
            StageOutcome::CNoQuote,
            confidences.quote_search,
        ));
        match step.kind() {
            StepKind::Inference => {
                return Ok(GapVerdict::from_path(
                    GapType::NoGap,
                    path,
                    format!(
                        "no verbatim quote, inference step stands: {}",
                        response.quote_search.quote_search_reasoning
                    ),
                ));
            }
            StepKind::Conclusion => {
                return check_stage_e(
                    step,
                    &prior_evidence,
                    variant,
                    judges,
                    ctx,
                    &prev_step_summaries,
                    path,
                    artifacts,
                );
            }
        }
    }
    path.push(StageDecision::new(
        StageOutcome::CQuoteFound,
        confidences.quote_search,
    ));

    // Stage D: local entailment of the claim from the Stage C quote.
    let answer = match run_entailment(
        judges,
        variant,
        Stage::D,
        ctx.question,
        &response.quote_search.evidence_quote,
        step.claim(),
        artifacts,
    )? {
        JudgeOutcome::Answered(a) => a,
        JudgeOutcome::Unavailable(m) => return Ok(GapVerdict::unchecked_for(&m, path)),
    };
    if answer.premise_truncated {
        path.push(StageDecision::new(StageOutcome::DTruncatedPremise, None));
    }
    let quote = &response.quote_search.evidence_quote;
    match answer.label {
        NliLabel::Entailment => {
            path.push(StageDecision::new(StageOutcome::DEntailment, answer.confidence));
            Ok(GapVerdict::from_path(
                GapType::NoGap,
                path,
                format!("claim entailed by the evidence quote {quote:?}"),
            ))
        }
        NliLabel::Neutral => {
            path.push(StageDecision::new(StageOutcome::DNeutral, answer.confidence));
            Ok(GapVerdict::from_path(
                GapType::MissingBridge,
                path,
                format!(
                    "evidence quote {quote:?} is on-entity but does not entail the claim; \
                     an inferential bridge is missing"
                ),
            ))
        }
        NliLabel::Contradiction => {
            path.push(StageDecision::new(
                StageOutcome::DContradiction,
                answer.confidence,
            ));
            Ok(GapVerdict::from_path(
                GapType::ContradictedClaim,
                path,
                format!("claim contradicted by the evidence quote {quote:?}"),
            ))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check_stage_e(
    step: &Step,
    prior_evidence: &[EvidenceSnippet],
    variant: &CheckerVariant,
    judges: &JudgeSet,
    ctx: &CheckContext<'_>,
    prev_step_summaries: &[String],
    mut path: Vec<StageDecision>,
    artifacts: &mut JudgeArtifacts,
) -> Result<GapVerdict, CheckError> {
    // Ablated Stage E passes through: the conclusion stands unexamined.
    if variant.ablated(Stage::E) {
        return Ok(GapVerdict::from_path(
            GapType::NoGap,
            path,
            "no verbatim quote and stage E is ablated; conclusion passes through".into(),
        ));
    }

    // Candidates: snippets from earlier steps, most recent retrieval first.
    let mut candidates: Vec<&EvidenceSnippet> = prior_evidence.iter().collect();
    candidates.sort_by(|a, b| b.source_step.cmp(&a.source_step));

    if candidates.is_empty() {
        path.push(StageDecision::new(StageOutcome::ENoEntailingPrior, None));
        return Ok(GapVerdict::from_path(
            GapType::IrrelevantEvidence,
            path,
            "no prior evidence exists to cover the conclusion".into(),
        ));
    }

    // One batch entity screen over the candidate pool.
    let screen_request = LlmJudgeRequest {
        purpose: RequestPurpose::StageEScreen,
        question: ctx.question.to_string(),
        step_index: step.index,
        step_kind: step.kind(),
        claim: step.claim().to_string(),
        query: step.query.clone(),
        prev_step_summaries: prev_step_summaries.to_vec(),
        own_evidence: candidates.iter().map(|&s| s.clone()).collect(),
        prior_evidence: Vec::new(),
    };
    judges
        .counters
        .stage_e_screen_llm
        .fetch_add(1, Ordering::SeqCst);
    let screen = match absorb_soft(judges.llm.judge_step(&screen_request))? {
        JudgeOutcome::Answered(r) => r,
        JudgeOutcome::Unavailable(m) => return Ok(GapVerdict::unchecked_for(&m, path)),
    };
    artifacts.stage_e_screen_response = Some(screen.clone());
    if !screen.quote_search.entity_match {
        path.push(StageDecision::new(StageOutcome::ENoEntailingPrior, None));
        return Ok(GapVerdict::from_path(
            GapType::IrrelevantEvidence,
            path,
            format!(
                "no prior snippet is about the claim's entity: {}",
                screen.quote_search.entity_match_reasoning
            ),
        ));
    }

    let mut any_truncated = false;
    for candidate in candidates {
        let premise = render_snippet(candidate);
        let answer = match run_entailment(
            judges,
            variant,
            Stage::E,
            ctx.question,
            &premise,
            step.claim(),
            artifacts,
        )? {
            JudgeOutcome::Answered(a) => a,
            JudgeOutcome::Unavailable(m) => return Ok(GapVerdict::unchecked_for(&m, path)),
        };
        if answer.premise_truncated && !any_truncated {
            any_truncated = true;
            path.push(StageDecision::new(StageOutcome::ETruncatedPremise, None));
        }
        if answer.label == NliLabel::Entailment {
            path.push(StageDecision::new(StageOutcome::EEntailment, answer.confidence));
            return Ok(GapVerdict::from_path(
                GapType::NoGap,
                path,
                format!(
                    "conclusion entailed by prior evidence from step {} ({})",
                    candidate.source_step,
                    if candidate.doc_title.is_empty() {
                        "untitled snippet"
                    } else {
                        &candidate.doc_title
                    }
                ),
            ));
        }
    }

    path.push(StageDecision::new(StageOutcome::ENoEntailingPrior, None));
    Ok(GapVerdict::from_path(
        GapType::IrrelevantEvidence,
        path,
        "no entity-matched prior snippet entails the conclusion".into(),
    ))
}

/// One entailment decision, routed to NLI or to the LLM judge depending on
/// the variant.
fn run_entailment(
    judges: &JudgeSet,
    variant: &CheckerVariant,
    stage: Stage,
    question: &str,
    premise: &str,
    hypothesis: &str,
    artifacts: &mut JudgeArtifacts,
) -> Result<JudgeOutcome<EntailmentAnswer>, CheckError> {
    if variant.name.llm_routed_entailment() {
        let counter = match stage {
            Stage::D => &judges.counters.stage_d_llm_entailment,
            _ => &judges.counters.stage_e_llm_entailment,
        };
        counter.fetch_add(1, Ordering::SeqCst);
        let req = LlmEntailmentRequest {
            question: question.to_string(),
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
        };
        match absorb_soft(judges.llm.judge_entailment(&req))? {
            JudgeOutcome::Answered(resp) => {
                if let Err(e) = resp.validate() {
                    return Ok(JudgeOutcome::Unavailable(e.to_string()));
                }
                artifacts.llm_entailments.push(resp.clone());
                Ok(JudgeOutcome::Answered(EntailmentAnswer {
                    label: resp.label,
                    confidence: resp.confidence,
                    premise_truncated: false,
                }))
            }
            JudgeOutcome::Unavailable(m) => Ok(JudgeOutcome::Unavailable(m)),
        }
    } else {
        let counter = match stage {
            Stage::D => &judges.counters.stage_d_nli,
            _ => &judges.counters.stage_e_nli,
        };
        counter.fetch_add(1, Ordering::SeqCst);
        match absorb_soft(judges.nli.judge(premise, hypothesis))? {
            JudgeOutcome::Answered(judgment) => {
                artifacts.nli_verdicts.push(judgment.verdict.clone());
                Ok(JudgeOutcome::Answered(EntailmentAnswer {
                    label: judgment.verdict.label,
                    confidence: Some(judgment.verdict.confidence()),
                    premise_truncated: judgment.premise_truncated,
                }))
            }
            JudgeOutcome::Unavailable(m) => Ok(JudgeOutcome::Unavailable(m)),
        }
    }
}

/// Check every step of a trace in order, each against its own evidence
/// prefix. Judge outages become unchecked verdicts; processing continues.
pub fn check_trace(
    trace: &ReasoningTrace,
    variant: &CheckerVariant,
    judges: &JudgeSet,
) -> Result<Vec<GapVerdict>, CheckError> {
    let mut verdicts = Vec::with_capacity(trace.steps.len());
    for (i, step) in trace.steps.iter().enumerate() {
        let prefix = trace.accumulated_evidence(i + 1)?;
        let ctx = CheckContext {
            question: &trace.question,
            prior_steps: &trace.steps[..i],
        };
        verdicts.push(check_step(step, &prefix, variant, judges, &ctx)?);
    }
    Ok(verdicts)
}

/// Trace check that also returns the judge artifacts per step, for
/// distillation export.
pub fn check_trace_full(
    trace: &ReasoningTrace,
    variant: &CheckerVariant,
    judges: &JudgeSet,
) -> Result<Vec<(GapVerdict, JudgeArtifacts)>, CheckError> {
    let mut out = Vec::with_capacity(trace.steps.len());
    for (i, step) in trace.steps.iter().enumerate() {
        let prefix = trace.accumulated_evidence(i + 1)?;
        let ctx = CheckContext {
            question: &trace.question,
            prior_steps: &trace.steps[..i],
        };
        out.push(check_step_full(step, &prefix, variant, judges, &ctx)?);
    }
    Ok(out)
}
