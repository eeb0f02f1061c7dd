//! Prompt construction for the structured-output LLM judge.
//!
//! One prompt covers Stages A, B, and C. Section A switches between an
//! inference variant and a conclusion variant depending on the step kind; for
//! conclusion steps with evidence from earlier steps a GLOBAL EVIDENCE block
//! is prepended so the abstention check can see the whole pool. The prompt
//! closes with the question, the last three previous-step summaries, the
//! current step's text, and the step's evidence serialized as JSON.

use super::{LlmEntailmentRequest, LlmJudgeRequest, RequestPurpose};
use crate::trace::{EvidenceSnippet, StepKind};
use serde_json::json;

pub const SYSTEM_PROMPT: &str = "You are a meticulous verifier for step-by-step question answering with search. \
For the single reasoning step you are given, run the three checks below in order and answer with one JSON object \
that follows the provided schema exactly. Base every judgment only on the text and evidence shown.";

const SECTION_A_INFERENCE: &str = r#"STEP -1: SUBQUESTION ALIGNMENT
Does this step target the CORRECT entity and
relation?
CRITICAL: retrieval failure != off-target.
Only flag if step_text ITSELF names the wrong
entity.

EC quick test - is_off_target = FALSE if:
 - Entity in step_text appears verbatim in
   the question
 - Entity is the correct intermediate result
 - step_text names correct film/person but
   retrieval returned wrong doc

TRUE drift: Q asks "AUTHOR of book" -> step
  searches "DIRECTOR of film adaptation"
NOT drift: retrieval failed but query is
  correct

If is_off_target = TRUE -> has_gap = TRUE,
gap_type = "unsupported_claim", STOP."#;

const SECTION_A_CONCLUSION: &str = r#"STEP -1: CONCLUSION ALIGNMENT (mandatory)
RULE 0: answer contains N/A or unknown
  -> is_off_target = FALSE, bypass to Node 0.

Otherwise C-1 -> C-2 -> C-3:
  C-1: target attribute type
       (PLACE / BIRTH_YEAR / SPOUSE /
        AGENT / COUNTRY / YES_NO)
  C-2: actual type of answer value
  C-3: TYPE mismatch  = relation_drift.
       Wrong value but same type
                       = NOT drift.

DRIFT:    Q "Where born?" -> "Naresh Kumar"
          (person != place) -> TRUE
NO DRIFT: Q "Who did X?"  -> "Viktor Belash"
          (person  = person) -> FALSE"#;

const SECTION_B: &str = r#"STEP 0: ABSTENTION CHECK
(skip if Step -1 triggered)
Is this step saying N/A / cannot determine?
  Evidence lacks it
    -> GROUNDED ABSTENTION
       is_abstention_step = True,
       abstention_is_accurate = True
  Evidence has it
    -> WRONG ABSTENTION
       is_abstention_step = True,
       abstention_is_accurate = False"#;

const SECTION_C: &str = r#"STEP 1: ENTITY CONSISTENCY + QUOTE SEARCH
(skip if Step -1 or Step 0 triggered)

Part A - Entity consistency check:
  EC-1: What entity/topic does this step's
        query target?
  EC-2: What entity/topic is the retrieved
        evidence actually about?
        (check the document title and first
         sentence)
  EC-3: Same entity? -> entity_match = TRUE,
                        proceed to quote search
        Different    -> entity_match = FALSE,
                        found_quote  = FALSE
                        (stop here)

  *Quote from the WRONG document does NOT
   count.*
   Step:     "Sruthilayalu composer"
   Evidence: "M.G. Sreekumar" (different
              person) -> FALSE

Part B - Verbatim quote search
        (only if entity_match = TRUE):
  Find a 5-20 word EXACT span from evidence.
  Must be: (i) exact text,
           (ii) about the same entity,
           (iii) relevant to the step claim."#;

const SECTION_E_SCREEN: &str = r#"PRIOR-EVIDENCE ENTITY SCREEN
The step below found no supporting quote in its own evidence.
The EVIDENCE list holds snippets retrieved at EARLIER steps.
Decide whether any of these candidate snippets is about the
same entity/topic as the step's claim (check each document
title and first sentence). Report the result in entity_match;
if one snippet also contains a 5-20 word EXACT span supporting
the claim, report it via found_quote / evidence_quote.
Fill the alignment and abstention objects with their
non-triggered defaults; only the quote_search object matters
for this screen."#;

fn render_evidence_json(evidence: &[EvidenceSnippet]) -> String {
    let docs: Vec<_> = evidence
        .iter()
        .map(|e| {
            json!({
                "doc_title": e.doc_title,
                "lead_sentence": e.lead_sentence,
                "body": e.body,
                "source_step": e.source_step,
            })
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("evidence snippets serialize")
}

fn render_global_evidence(prior: &[EvidenceSnippet]) -> String {
    let mut block = String::from("GLOBAL EVIDENCE (snippets retrieved at earlier steps):\n");
    for e in prior {
        block.push_str(&format!(
            "- [step {}] {}: {}\n",
            e.source_step,
            if e.doc_title.is_empty() { "(untitled)" } else { &e.doc_title },
            e.body
        ));
    }
    block
}

/// Build the user message for a Stage A/B/C pass or a Stage E entity screen.
pub fn build_judge_prompt(req: &LlmJudgeRequest) -> String {
    let mut parts: Vec<String> = Vec::new();

    match req.purpose {
        RequestPurpose::StageAbc => {
            if req.step_kind == StepKind::Conclusion && !req.prior_evidence.is_empty() {
                parts.push(render_global_evidence(&req.prior_evidence));
            }
            let section_a = match req.step_kind {
                StepKind::Inference => SECTION_A_INFERENCE,
                StepKind::Conclusion => SECTION_A_CONCLUSION,
            };
            parts.push(section_a.to_string());
            parts.push(SECTION_B.to_string());
            parts.push(SECTION_C.to_string());
        }
        RequestPurpose::StageEScreen => {
            parts.push(SECTION_E_SCREEN.to_string());
        }
    }

    parts.push(format!("QUESTION: {}", req.question));

    if req.prev_step_summaries.is_empty() {
        parts.push("PREVIOUS STEPS: (none)".to_string());
    } else {
        let mut prev = String::from("PREVIOUS STEPS (most recent last):\n");
        for (i, s) in req.prev_step_summaries.iter().enumerate() {
            prev.push_str(&format!("{}. {}\n", i + 1, s));
        }
        parts.push(prev);
    }

    let mut step_block = format!(
        "CURRENT STEP (#{}, {}):\n{}",
        req.step_index,
        match req.step_kind {
            StepKind::Inference => "inference",
            StepKind::Conclusion => "conclusion",
        },
        req.claim
    );
    if let Some(q) = &req.query {
        step_block.push_str(&format!("\nSEARCH QUERY: {q}"));
    }
    parts.push(step_block);

    parts.push(format!("EVIDENCE:\n{}", render_evidence_json(&req.own_evidence)));

    parts.join("\n\n")
}

/// Build the user message for an LLM-routed entailment question (Stage D/E in
/// the single-judge baselines).
pub fn build_entailment_prompt(req: &LlmEntailmentRequest) -> String {
    format!(
        "You are verifying one reasoning step for the question below.\n\n\
         QUESTION: {}\n\n\
         PREMISE (evidence):\n{}\n\n\
         HYPOTHESIS (the step's claim):\n{}\n\n\
         Does the premise entail the hypothesis? Answer with a JSON object: \
         label is one of \"entailment\", \"neutral\", \"contradiction\"; \
         confidence is your probability for that label.",
        req.question, req.premise, req.hypothesis
    )
}

/// Strict JSON schema for the Stage A/B/C structured response, suitable for
/// an OpenAI-compatible `response_format.json_schema` body.
pub fn judge_response_schema() -> serde_json::Value {
    json!({
        "name": "step_gap_judgment",
        "strict": true,
        "schema": {
            "type": "object",
            "additionalProperties": false,
            "required": ["alignment", "abstention", "quote_search"],
            "properties": {
                "alignment": {
                    "type": "object",
                    "additionalProperties": false,
                    "required": ["is_off_target", "drift_type", "alignment_reasoning"],
                    "properties": {
                        "is_off_target": {"type": "boolean"},
                        "drift_type": {
                            "type": "string",
                            "enum": ["none", "entity_drift", "relation_drift", "scope_drift"]
                        },
                        "alignment_reasoning": {"type": "string"}
                    }
                },
                "abstention": {
                    "type": "object",
                    "additionalProperties": false,
                    "required": [
                        "is_abstention_step",
                        "abstention_is_accurate",
                        "abstention_reasoning"
                    ],
                    "properties": {
                        "is_abstention_step": {"type": "boolean"},
                        "abstention_is_accurate": {"type": "boolean"},
                        "abstention_reasoning": {"type": "string"}
                    }
                },
                "quote_search": {
                    "type": "object",
                    "additionalProperties": false,
                    "required": [
                        "entity_match",
                        "entity_match_reasoning",
                        "found_quote",
                        "evidence_quote",
                        "quote_search_reasoning"
                    ],
                    "properties": {
                        "entity_match": {"type": "boolean"},
                        "entity_match_reasoning": {"type": "string"},
                        "found_quote": {"type": "boolean"},
                        "evidence_quote": {"type": "string"},
                        "quote_search_reasoning": {"type": "string"}
                    }
                }
            }
        }
    })
}

/// Strict JSON schema for the entailment-only response.
pub fn entailment_response_schema() -> serde_json::Value {
    json!({
        "name": "entailment_judgment",
        "strict": true,
        "schema": {
            "type": "object",
            "additionalProperties": false,
            "required": ["label", "confidence"],
            "properties": {
                "label": {
                    "type": "string",
                    "enum": ["entailment", "neutral", "contradiction"]
                },
                "confidence": {"type": "number"}
            }
        }
    })
}
