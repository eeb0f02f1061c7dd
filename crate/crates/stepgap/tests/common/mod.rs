//! Shared fixtures for the integration suites: scripted judges, raw-trace
//! builders, and the canned NLI score vectors the scenarios reuse.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use stepgap::checker::{check_trace, CheckerVariant, GapVerdict, JudgeSet, VariantName};
use stepgap::judge::scripted::{
    standard_probe_entries, LlmScriptEntry, NliMatcher, NliScriptEntry, RequestMatcher,
    ScriptedLlmJudge, ScriptedNli,
};
use stepgap::judge::{
    CalibratedNli, JudgeConfig, LlmEntailmentResponse, LlmJudgeResponse, NliLabel,
};
use stepgap::trace::{parse_trace, ReasoningTrace, TraceRecord};

pub const ENTAILED: [f64; 3] = [0.93, 0.04, 0.03];
pub const NEUTRAL: [f64; 3] = [0.07, 0.85, 0.08];
pub const CONTRADICTED: [f64; 3] = [0.02, 0.05, 0.93];

/// Scripted judge pair with the default config and the calibration probes
/// prepended to the NLI script.
pub fn judge_set(llm: Vec<LlmScriptEntry>, nli: Vec<NliScriptEntry>) -> JudgeSet {
    judge_set_with_config(llm, nli, &JudgeConfig::default())
}

/// Same, but with a tightened premise token budget for truncation scenarios.
pub fn judge_set_with_budget(
    llm: Vec<LlmScriptEntry>,
    nli: Vec<NliScriptEntry>,
    premise_token_budget: usize,
) -> JudgeSet {
    let config = JudgeConfig {
        premise_token_budget,
        ..JudgeConfig::default()
    };
    judge_set_with_config(llm, nli, &config)
}

pub fn judge_set_with_config(
    llm: Vec<LlmScriptEntry>,
    nli: Vec<NliScriptEntry>,
    config: &JudgeConfig,
) -> JudgeSet {
    let mut entries = standard_probe_entries();
    entries.extend(nli);
    let llm = ScriptedLlmJudge::new(llm).expect("scripted entries are valid");
    let nli = CalibratedNli::calibrate(Arc::new(ScriptedNli::new(entries)), config)
        .expect("scripted probes calibrate");
    JudgeSet::new(Arc::new(llm), Arc::new(nli))
}

/// Parse a raw rollout into a trace, panicking on fixture mistakes.
pub fn trace(question_id: &str, question: &str, raw: &str) -> ReasoningTrace {
    let record = TraceRecord {
        question_id: question_id.to_string(),
        question: question.to_string(),
        gold_answer: None,
        raw_output: raw.to_string(),
        evidence: BTreeMap::new(),
        token_spans: BTreeMap::new(),
        em_correct: None,
        predicted_answer: None,
    };
    parse_trace(&record).expect("fixture trace parses")
}

/// One search step in the tag grammar: reasoning, query, a single document.
pub fn search_segment(reasoning: &str, query: &str, title: &str, body: &str) -> String {
    format!(
        "{reasoning}\n<search>{query}</search>\n<information>Doc 1(Title: \"{title}\") {body}</information>\n"
    )
}

/// The final answer step in the tag grammar.
pub fn conclusion_segment(reasoning: &str, answer: &str) -> String {
    format!("{reasoning}\n<answer>{answer}</answer>\n")
}

/// Script entry answering the combined stage A/B/C request for one step.
pub fn step_entry(step_index: usize, respond: LlmJudgeResponse) -> LlmScriptEntry {
    LlmScriptEntry {
        matcher: RequestMatcher {
            purpose: Some("stage_abc".into()),
            step_index: Some(step_index),
            ..Default::default()
        },
        respond: Some(respond),
        entailment: None,
    }
}

/// Script entry answering the stage E entity screen for one step.
pub fn screen_entry(step_index: usize, respond: LlmJudgeResponse) -> LlmScriptEntry {
    LlmScriptEntry {
        matcher: RequestMatcher {
            purpose: Some("stage_e_screen".into()),
            step_index: Some(step_index),
            ..Default::default()
        },
        respond: Some(respond),
        entailment: None,
    }
}

/// Script entry answering every stage A/B/C request the same way.
pub fn catchall(respond: LlmJudgeResponse) -> LlmScriptEntry {
    LlmScriptEntry {
        matcher: RequestMatcher {
            purpose: Some("stage_abc".into()),
            ..Default::default()
        },
        respond: Some(respond),
        entailment: None,
    }
}

/// Script entry for LLM-routed entailment, keyed on a premise substring.
pub fn entailment_entry(
    premise_key: &str,
    label: NliLabel,
    confidence: Option<f64>,
) -> LlmScriptEntry {
    LlmScriptEntry {
        matcher: RequestMatcher {
            purpose: Some("entailment".into()),
            premise_contains: Some(premise_key.to_string()),
            ..Default::default()
        },
        respond: None,
        entailment: Some(LlmEntailmentResponse { label, confidence }),
    }
}

/// NLI entry keyed on a premise substring.
pub fn nli_entry(premise_key: &str, scores: [f64; 3]) -> NliScriptEntry {
    NliScriptEntry {
        matcher: NliMatcher {
            premise_contains: Some(premise_key.to_string()),
            hypothesis_contains: None,
        },
        scores,
    }
}

/// NLI entry keyed on both sides of the pair.
pub fn nli_entry_on(premise_key: &str, hypothesis_key: &str, scores: [f64; 3]) -> NliScriptEntry {
    NliScriptEntry {
        matcher: NliMatcher {
            premise_contains: Some(premise_key.to_string()),
            hypothesis_contains: Some(hypothesis_key.to_string()),
        },
        scores,
    }
}

/// The pipeline path as its tag strings.
pub fn tags(verdict: &GapVerdict) -> Vec<&'static str> {
    verdict.pipeline_path.iter().map(|d| d.outcome.tag()).collect()
}

pub fn step_gap() -> CheckerVariant {
    CheckerVariant::new(VariantName::StepGap)
}

/// Run the full StepGap tree over a trace; scripted runs never error.
pub fn run_tree(trace: &ReasoningTrace, judges: &JudgeSet) -> Vec<GapVerdict> {
    check_trace(trace, &step_gap(), judges).expect("scripted check succeeds")
}
