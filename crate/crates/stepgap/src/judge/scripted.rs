//! Deterministic scripted judges for tests and offline replay.
//!
//! A script is an ordered list of `(matcher, canned response)` entries, one
//! JSON object per line on disk. Matching is first-match-wins and entries are
//! never consumed, so identical requests always replay identical responses.
//! A request that matches no entry raises [`JudgeError::ScriptExhausted`]:
//! golden tests fail loudly instead of drifting.

use super::{
    JudgeError, LlmEntailmentRequest, LlmEntailmentResponse, LlmJudge, LlmJudgeRequest,
    LlmJudgeResponse, NliBackend, RequestPurpose, CALIBRATION_CONTRADICTION_PROBE,
    CALIBRATION_ENTAILMENT_PROBE,
};
use crate::trace::StepKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

/// Conditions a request must satisfy to select an entry. Absent fields match
/// anything; present fields must all hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RequestMatcher {
    /// One of `stage_abc`, `stage_e_screen`, `entailment`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_kind: Option<StepKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_contains: Option<String>,
}

fn purpose_str(p: RequestPurpose) -> &'static str {
    match p {
        RequestPurpose::StageAbc => "stage_abc",
        RequestPurpose::StageEScreen => "stage_e_screen",
    }
}

impl RequestMatcher {
    fn matches_judge(&self, req: &LlmJudgeRequest) -> bool {
        if self.premise_contains.is_some() || self.hypothesis_contains.is_some() {
            return false;
        }
        if let Some(p) = &self.purpose {
            if p != purpose_str(req.purpose) {
                return false;
            }
        }
        if let Some(q) = &self.question_contains {
            if !req.question.contains(q.as_str()) {
                return false;
            }
        }
        if let Some(i) = self.step_index {
            if req.step_index != i {
                return false;
            }
        }
        if let Some(k) = self.step_kind {
            if req.step_kind != k {
                return false;
            }
        }
        if let Some(c) = &self.claim_contains {
            if !req.claim.contains(c.as_str()) {
                return false;
            }
        }
        if let Some(q) = &self.query_contains {
            match &req.query {
                Some(query) if query.contains(q.as_str()) => {}
                _ => return false,
            }
        }
        if let Some(e) = &self.evidence_contains {
            let hit = req
                .own_evidence
                .iter()
                .any(|s| s.body.contains(e.as_str()) || s.doc_title.contains(e.as_str()));
            if !hit {
                return false;
            }
        }
        true
    }

    fn matches_entailment(&self, req: &LlmEntailmentRequest) -> bool {
        if self.step_index.is_some()
            || self.step_kind.is_some()
            || self.claim_contains.is_some()
            || self.query_contains.is_some()
            || self.evidence_contains.is_some()
        {
            return false;
        }
        if let Some(p) = &self.purpose {
            if p != "entailment" {
                return false;
            }
        }
        if let Some(q) = &self.question_contains {
            if !req.question.contains(q.as_str()) {
                return false;
            }
        }
        if let Some(p) = &self.premise_contains {
            if !req.premise.contains(p.as_str()) {
                return false;
            }
        }
        if let Some(h) = &self.hypothesis_contains {
            if !req.hypothesis.contains(h.as_str()) {
                return false;
            }
        }
        true
    }
}

/// One line of an LLM judge script: a matcher plus exactly one payload kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmScriptEntry {
    #[serde(rename = "match", default)]
    pub matcher: RequestMatcher,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub respond: Option<LlmJudgeResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entailment: Option<LlmEntailmentResponse>,
}

impl LlmScriptEntry {
    fn validate(&self, line: usize) -> Result<(), JudgeError> {
        match (&self.respond, &self.entailment) {
            (Some(resp), None) => resp.validate().map_err(|e| {
                JudgeError::SchemaViolation(format!("script entry {line}: {e}"))
            }),
            (None, Some(ent)) => ent.validate().map_err(|e| {
                JudgeError::SchemaViolation(format!("script entry {line}: {e}"))
            }),
            _ => Err(JudgeError::SchemaViolation(format!(
                "script entry {line} must carry exactly one of `respond` or `entailment`"
            ))),
        }
    }
}

/// Scripted LLM judge. Thread-safe; counts calls per purpose.
#[derive(Debug)]
pub struct ScriptedLlmJudge {
    entries: Vec<LlmScriptEntry>,
    calls: AtomicU64,
    calls_by_purpose: Mutex<BTreeMap<String, u64>>,
}

impl ScriptedLlmJudge {
    pub fn new(entries: Vec<LlmScriptEntry>) -> Result<Self, JudgeError> {
        for (i, entry) in entries.iter().enumerate() {
            entry.validate(i + 1)?;
        }
        Ok(ScriptedLlmJudge {
            entries,
            calls: AtomicU64::new(0),
            calls_by_purpose: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, JudgeError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry: LlmScriptEntry = serde_json::from_str(line).map_err(|e| {
                JudgeError::SchemaViolation(format!("script line {}: {e}", i + 1))
            })?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            JudgeError::Unavailable(format!("cannot read LLM script {}: {e}", path.display()))
        })?;
        Self::from_jsonl(&text)
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn calls_by_purpose(&self) -> BTreeMap<String, u64> {
        self.calls_by_purpose.lock().unwrap().clone()
    }

    fn tally(&self, purpose: &str) {
        self.calls.fetch_add(1, Ordering::SeqCst);
        *self
            .calls_by_purpose
            .lock()
            .unwrap()
            .entry(purpose.to_string())
            .or_insert(0) += 1;
    }
}

impl LlmJudge for ScriptedLlmJudge {
    fn backend_id(&self) -> String {
        "scripted-llm".into()
    }

    fn judge_step(&self, req: &LlmJudgeRequest) -> Result<LlmJudgeResponse, JudgeError> {
        self.tally(purpose_str(req.purpose));
        for entry in &self.entries {
            if entry.respond.is_some() && entry.matcher.matches_judge(req) {
                return Ok(entry.respond.clone().expect("checked above"));
            }
        }
        Err(JudgeError::ScriptExhausted(format!(
            "{} step {} ({:?}) claim={:?}",
            purpose_str(req.purpose),
            req.step_index,
            req.step_kind,
            truncate_for_message(&req.claim)
        )))
    }

    fn judge_entailment(
        &self,
        req: &LlmEntailmentRequest,
    ) -> Result<LlmEntailmentResponse, JudgeError> {
        self.tally("entailment");
        for entry in &self.entries {
            if entry.entailment.is_some() && entry.matcher.matches_entailment(req) {
                return Ok(entry.entailment.clone().expect("checked above"));
            }
        }
        Err(JudgeError::ScriptExhausted(format!(
            "entailment premise={:?} hypothesis={:?}",
            truncate_for_message(&req.premise),
            truncate_for_message(&req.hypothesis)
        )))
    }
}

fn truncate_for_message(s: &str) -> String {
    const LIMIT: usize = 60;
    if s.chars().count() <= LIMIT {
        s.to_string()
    } else {
        let cut: String = s.chars().take(LIMIT).collect();
        format!("{cut}…")
    }
}

/// Matcher for NLI script entries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NliMatcher {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premise_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis_contains: Option<String>,
}

impl NliMatcher {
    fn matches(&self, premise: &str, hypothesis: &str) -> bool {
        if let Some(p) = &self.premise_contains {
            if !premise.contains(p.as_str()) {
                return false;
            }
        }
        if let Some(h) = &self.hypothesis_contains {
            if !hypothesis.contains(h.as_str()) {
                return false;
            }
        }
        true
    }
}

/// One line of an NLI script. `scores` are in the backend's native dimension
/// order, exactly as a real checkpoint would emit them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliScriptEntry {
    #[serde(rename = "match", default)]
    pub matcher: NliMatcher,
    pub scores: [f64; 3],
}

/// Scripted NLI backend.
#[derive(Debug)]
pub struct ScriptedNli {
    entries: Vec<NliScriptEntry>,
    calls: AtomicU64,
}

impl ScriptedNli {
    pub fn new(entries: Vec<NliScriptEntry>) -> Self {
        ScriptedNli {
            entries,
            calls: AtomicU64::new(0),
        }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, JudgeError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry: NliScriptEntry = serde_json::from_str(line).map_err(|e| {
                JudgeError::SchemaViolation(format!("NLI script line {}: {e}", i + 1))
            })?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            JudgeError::Unavailable(format!("cannot read NLI script {}: {e}", path.display()))
        })?;
        Self::from_jsonl(&text)
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl NliBackend for ScriptedNli {
    fn backend_id(&self) -> String {
        "scripted-nli".into()
    }

    fn raw_scores(&self, premise: &str, hypothesis: &str) -> Result<[f64; 3], JudgeError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        for entry in &self.entries {
            if entry.matcher.matches(premise, hypothesis) {
                return Ok(entry.scores);
            }
        }
        Err(JudgeError::ScriptExhausted(format!(
            "nli premise={:?} hypothesis={:?}",
            truncate_for_message(premise),
            truncate_for_message(hypothesis)
        )))
    }
}

/// Canned judge responses, the vocabulary scripts are usually built from.
pub mod canned {
    use crate::judge::{
        AbstentionJudgment, AlignmentJudgment, DriftType, LlmJudgeResponse, QuoteSearchJudgment,
    };

    fn clear_abstention() -> AbstentionJudgment {
        AbstentionJudgment {
            is_abstention_step: false,
            abstention_is_accurate: false,
            abstention_reasoning: String::new(),
        }
    }

    /// On-target step with a verbatim supporting quote found.
    pub fn on_target_with_quote(quote: &str) -> LlmJudgeResponse {
        LlmJudgeResponse {
            alignment: AlignmentJudgment {
                is_off_target: false,
                drift_type: DriftType::None,
                alignment_reasoning: "step targets the asked entity and relation".into(),
            },
            abstention: clear_abstention(),
            quote_search: QuoteSearchJudgment {
                entity_match: true,
                entity_match_reasoning: "evidence document is about the same entity".into(),
                found_quote: true,
                evidence_quote: quote.to_string(),
                quote_search_reasoning: "exact span located in the evidence".into(),
            },
            stage_confidences: None,
        }
    }

    /// Off-target step (Stage A fires).
    pub fn off_target(drift_type: DriftType) -> LlmJudgeResponse {
        let mut resp = on_target_with_quote("");
        resp.alignment.is_off_target = true;
        resp.alignment.drift_type = drift_type;
        resp.alignment.alignment_reasoning = "step names the wrong entity or relation".into();
        resp.quote_search.found_quote = false;
        resp.quote_search.evidence_quote = String::new();
        resp
    }

    /// Abstention step; `accurate` decides grounded versus wrong abstention.
    pub fn abstention(accurate: bool) -> LlmJudgeResponse {
        let mut resp = on_target_with_quote("");
        resp.abstention = AbstentionJudgment {
            is_abstention_step: true,
            abstention_is_accurate: accurate,
            abstention_reasoning: if accurate {
                "evidence genuinely lacks the requested fact".into()
            } else {
                "the requested fact is present in the evidence".into()
            },
        };
        resp.quote_search.found_quote = false;
        resp.quote_search.evidence_quote = String::new();
        resp
    }

    /// Evidence is about a different entity (Stage C mismatch).
    pub fn entity_mismatch() -> LlmJudgeResponse {
        let mut resp = on_target_with_quote("");
        resp.quote_search = QuoteSearchJudgment {
            entity_match: false,
            entity_match_reasoning: "retrieved document covers a different entity".into(),
            found_quote: false,
            evidence_quote: String::new(),
            quote_search_reasoning: String::new(),
        };
        resp
    }

    /// Entity matches but no verbatim supporting span exists.
    pub fn no_quote() -> LlmJudgeResponse {
        let mut resp = on_target_with_quote("");
        resp.quote_search.found_quote = false;
        resp.quote_search.evidence_quote = String::new();
        resp.quote_search.quote_search_reasoning =
            "no exact span in the evidence supports the claim".into();
        resp
    }

    /// Entity screen verdict for Stage E candidate batches.
    pub fn entity_screen(entity_match: bool) -> LlmJudgeResponse {
        if entity_match {
            no_quote()
        } else {
            entity_mismatch()
        }
    }
}

/// The two calibration-probe entries every NLI script needs, declaring the
/// identity `[entailment, neutral, contradiction]` native order.
pub fn standard_probe_entries() -> Vec<NliScriptEntry> {
    vec![
        NliScriptEntry {
            matcher: NliMatcher {
                premise_contains: Some(CALIBRATION_ENTAILMENT_PROBE.0.to_string()),
                hypothesis_contains: Some(CALIBRATION_ENTAILMENT_PROBE.1.to_string()),
            },
            scores: [0.92, 0.05, 0.03],
        },
        NliScriptEntry {
            matcher: NliMatcher {
                premise_contains: Some(CALIBRATION_CONTRADICTION_PROBE.0.to_string()),
                hypothesis_contains: Some(CALIBRATION_CONTRADICTION_PROBE.1.to_string()),
            },
            scores: [0.03, 0.07, 0.90],
        },
    ]
}
