//! Trace data model and the tag-grammar parser.
//!
//! A rollout is plain text in which the policy interleaves free-form reasoning
//! with three kinds of tagged blocks:
//!
//! * `<search>query</search>` closes a step and opens a retrieval; any
//!   `<information>...</information>` blocks that immediately follow carry the
//!   returned snippets and belong to the same step.
//! * `<answer>final answer</answer>` closes a step and marks it a conclusion.
//! * `<tool_call>{json}</tool_call>` in the Hermes style is treated exactly
//!   like a `<search>` tag when its `name`/`action` field is `"search"`;
//!   any other tool call is left inline as ordinary step text.
//!
//! Segmentation is lossless: concatenating `raw_text` over the parsed steps
//! reproduces the input byte for byte. Text after the last closed tag becomes a
//! final inference step if it contains anything beyond whitespace; otherwise it
//! is folded into the preceding step's `raw_text`.

use crate::gap::GapType;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    /// Input violates the tag grammar (unclosed tag, no content at all, or a
    /// record annotation that does not line up with the parsed steps).
    #[error("malformed trace: {0}")]
    Malformed(String),
    /// A 1-based step ordinal fell outside the trace.
    #[error("step index {index} out of range for trace with {len} steps")]
    IndexOutOfRange { index: usize, len: usize },
}

/// What role a step plays in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// Intermediate reasoning, possibly issuing a search.
    Inference,
    /// A step that commits to a final answer.
    Conclusion,
}

/// One retrieved snippet, attributed to the step whose search produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSnippet {
    pub doc_title: String,
    pub lead_sentence: String,
    pub body: String,
    /// 1-based ordinal of the step whose retrieval returned this snippet.
    pub source_step: usize,
}

impl EvidenceSnippet {
    fn dedup_key(&self) -> (&str, &str) {
        (self.doc_title.as_str(), self.body.as_str())
    }
}

/// One parsed reasoning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// 1-based position in the trace.
    pub index: usize,
    /// Normalised reasoning text preceding the step's closing tag, with
    /// `<think>` markers and inline `<information>` blocks removed.
    pub claim_text: String,
    /// Search query, when this step issued one.
    pub query: Option<String>,
    /// Snippets returned by this step's search (or supplied by the record).
    pub evidence: Vec<EvidenceSnippet>,
    /// Final answer text, when this step committed to one.
    pub answer_text: Option<String>,
    /// Half-open token span `[start, end)` in the rollout's token stream.
    /// Spans come from the trace record and are treated as opaque integers.
    pub token_span: Option<(usize, usize)>,
    /// Exact byte slice of the input this step covers.
    pub raw_text: String,
}

impl Step {
    pub fn kind(&self) -> StepKind {
        if self.answer_text.is_some() {
            StepKind::Conclusion
        } else {
            StepKind::Inference
        }
    }

    /// The text the checker verifies: the answer for a conclusion step, the
    /// reasoning text otherwise.
    pub fn claim(&self) -> &str {
        match self.kind() {
            StepKind::Conclusion => self.answer_text.as_deref().unwrap_or(""),
            StepKind::Inference => &self.claim_text,
        }
    }

    pub fn is_search(&self) -> bool {
        self.query.is_some()
    }

    pub fn is_answer(&self) -> bool {
        self.answer_text.is_some()
    }
}

/// A fully parsed rollout for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub question_id: String,
    pub question: String,
    pub gold_answer: Option<String>,
    pub predicted_answer: Option<String>,
    /// Whether the final answer exact-matched gold, when known.
    pub em_correct: Option<bool>,
    pub steps: Vec<Step>,
}

impl ReasoningTrace {
    /// Evidence pool visible at step `index` (1-based): the union of snippets
    /// retrieved by steps `1..=index`, in retrieval order, deduplicated by
    /// `(doc_title, body)` keeping the first occurrence. Snippets from
    /// abandoned query lines stay in the pool; evidence is never un-retrieved.
    pub fn accumulated_evidence(&self, index: usize) -> Result<Vec<EvidenceSnippet>, TraceError> {
        if index == 0 || index > self.steps.len() {
            return Err(TraceError::IndexOutOfRange { index, len: self.steps.len() });
        }
        let mut seen: Vec<(String, String)> = Vec::new();
        let mut pool = Vec::new();
        for step in &self.steps[..index] {
            for snip in &step.evidence {
                let key = snip.dedup_key();
                if !seen.iter().any(|(t, b)| (t.as_str(), b.as_str()) == key) {
                    seen.push((key.0.to_string(), key.1.to_string()));
                    pool.push(snip.clone());
                }
            }
        }
        Ok(pool)
    }
}

/// Gold label for one step of one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldStepLabel {
    pub question_id: String,
    /// 1-based step ordinal.
    pub step_index: usize,
    pub label: GapType,
}

/// One evidence snippet as it appears in a trace record, before step
/// attribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    #[serde(default)]
    pub doc_title: String,
    #[serde(default)]
    pub lead_sentence: Option<String>,
    pub body: String,
}

/// On-disk form of a rollout, one JSON object per line in a benchmark file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub question_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    /// Raw rollout text in the tag grammar.
    pub raw_output: String,
    /// Optional per-step evidence, keyed by 1-based step ordinal. When a key
    /// is present its snippets replace whatever the tag grammar extracted for
    /// that step.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub evidence: BTreeMap<String, Vec<EvidenceRecord>>,
    /// Optional half-open token spans, keyed by 1-based step ordinal.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub token_spans: BTreeMap<String, (usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em_correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_answer: Option<String>,
}

const SEARCH_OPEN: &str = "<search>";
const SEARCH_CLOSE: &str = "</search>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const INFO_OPEN: &str = "<information>";
const INFO_CLOSE: &str = "</information>";
const TOOL_OPEN: &str = "<tool_call>";
const TOOL_CLOSE: &str = "</tool_call>";

#[derive(Debug, Clone, Copy, PartialEq)]
enum Opener {
    Search,
    Answer,
    ToolCall,
}

fn find_next_opener(src: &str, from: usize) -> Option<(usize, Opener)> {
    let slice = &src[from..];
    let candidates = [
        (slice.find(SEARCH_OPEN), Opener::Search),
        (slice.find(ANSWER_OPEN), Opener::Answer),
        (slice.find(TOOL_OPEN), Opener::ToolCall),
    ];
    candidates
        .into_iter()
        .filter_map(|(pos, op)| pos.map(|p| (from + p, op)))
        .min_by_key(|(p, _)| *p)
}

/// Strip well-formed `open..close` blocks from `text`; unmatched markers are
/// left untouched.
fn strip_blocks(text: &str, open: &str, close: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    while let Some(rel) = text[cursor..].find(open) {
        let start = cursor + rel;
        match text[start + open.len()..].find(close) {
            Some(rel_close) => {
                out.push_str(&text[cursor..start]);
                cursor = start + open.len() + rel_close + close.len();
            }
            None => break,
        }
    }
    out.push_str(&text[cursor..]);
    out
}

/// Claim text: drop inline information blocks, drop `<think>` markers (keeping
/// the reasoning inside them), and collapse whitespace.
fn clean_claim(text: &str) -> String {
    let no_info = strip_blocks(text, INFO_OPEN, INFO_CLOSE);
    let no_think = no_info.replace("<think>", " ").replace("</think>", " ");
    no_think.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First sentence of `body`: up to the first terminator followed by
/// whitespace or end of text, falling back to the whole body.
fn lead_sentence(body: &str) -> String {
    let bytes = body.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?') {
            let at_end = i + 1 == bytes.len();
            if at_end || bytes[i + 1].is_ascii_whitespace() {
                return body[..=i].trim().to_string();
            }
        }
    }
    body.trim().to_string()
}

/// Split an `<information>` block into `(title, body)` documents.
///
/// The retrieval wrapper emits `Doc N(Title: "...") body` headers; a block
/// with no recognisable header becomes a single untitled snippet.
fn parse_information(block: &str) -> Vec<(String, String)> {
    let mut headers: Vec<(usize, usize, String)> = Vec::new(); // (start, body_start, title)
    let bytes = block.as_bytes();
    let mut cursor = 0;
    while let Some(rel) = block[cursor..].find("Doc ") {
        let start = cursor + rel;
        let mut i = start + 4;
        let digits_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == digits_start || !block[i..].starts_with("(Title:") {
            cursor = start + 4;
            continue;
        }
        i += "(Title:".len();
        while i < bytes.len() && bytes[i] == b' ' {
            i += 1;
        }
        let title;
        if i < bytes.len() && bytes[i] == b'"' {
            i += 1;
            match block[i..].find('"') {
                Some(q) => {
                    title = block[i..i + q].to_string();
                    i += q + 1;
                }
                None => {
                    cursor = start + 4;
                    continue;
                }
            }
        } else {
            match block[i..].find(')') {
                Some(p) => {
                    title = block[i..i + p].trim().to_string();
                    i += p;
                }
                None => {
                    cursor = start + 4;
                    continue;
                }
            }
        }
        match block[i..].find(')') {
            Some(p) => i += p + 1,
            None => {
                cursor = start + 4;
                continue;
            }
        }
        headers.push((start, i, title));
        cursor = i;
    }
    if headers.is_empty() {
        let body = block.trim();
        if body.is_empty() {
            return Vec::new();
        }
        return vec![(String::new(), body.to_string())];
    }
    let mut docs = Vec::with_capacity(headers.len());
    for (n, (_, body_start, title)) in headers.iter().enumerate() {
        let body_end = headers.get(n + 1).map(|h| h.0).unwrap_or(block.len());
        let body = block[*body_start..body_end].trim().to_string();
        docs.push((title.clone(), body));
    }
    docs
}

/// Extract a search query from a Hermes tool-call payload, if it is one.
fn tool_call_query(inner: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(inner.trim()).ok()?;
    let callee = value
        .get("name")
        .or_else(|| value.get("action"))
        .and_then(|v| v.as_str())?;
    if callee != "search" {
        return None;
    }
    let query = value
        .get("arguments")
        .and_then(|a| a.get("query"))
        .or_else(|| value.get("query"))
        .and_then(|v| v.as_str())
        .unwrap_or("");
    Some(query.trim().to_string())
}

struct PendingStep {
    claim_text: String,
    query: Option<String>,
    answer_text: Option<String>,
    evidence_blocks: Vec<String>,
    raw: String,
}

/// Parse raw rollout text into steps. See the module docs for the grammar.
pub fn parse_steps(raw: &str) -> Result<Vec<Step>, TraceError> {
    let mut pending: Vec<PendingStep> = Vec::new();
    let mut seg_start = 0usize;
    let mut cursor = 0usize;

    loop {
        let Some((pos, opener)) = find_next_opener(raw, cursor) else {
            break;
        };
        match opener {
            Opener::Search | Opener::ToolCall => {
                let (open_tag, close_tag) = if opener == Opener::Search {
                    (SEARCH_OPEN, SEARCH_CLOSE)
                } else {
                    (TOOL_OPEN, TOOL_CLOSE)
                };
                let inner_start = pos + open_tag.len();
                let Some(rel_close) = raw[inner_start..].find(close_tag) else {
                    return Err(TraceError::Malformed(format!(
                        "unclosed {open_tag} tag at byte {pos}"
                    )));
                };
                let inner = &raw[inner_start..inner_start + rel_close];
                let mut end = inner_start + rel_close + close_tag.len();

                let query = if opener == Opener::Search {
                    Some(inner.trim().to_string())
                } else {
                    match tool_call_query(inner) {
                        Some(q) => Some(q),
                        None => {
                            // Not a search call: leave it inline and keep scanning.
                            cursor = end;
                            continue;
                        }
                    }
                };

                // Consume information blocks that directly follow the search.
                let mut evidence_blocks = Vec::new();
                loop {
                    let rest = &raw[end..];
                    let ws = rest.len() - rest.trim_start().len();
                    if !rest[ws..].starts_with(INFO_OPEN) {
                        break;
                    }
                    let iopen = end + ws + INFO_OPEN.len();
                    let Some(rel_iclose) = raw[iopen..].find(INFO_CLOSE) else {
                        return Err(TraceError::Malformed(format!(
                            "unclosed {INFO_OPEN} tag at byte {}",
                            end + ws
                        )));
                    };
                    evidence_blocks.push(raw[iopen..iopen + rel_iclose].to_string());
                    end = iopen + rel_iclose + INFO_CLOSE.len();
                }

                pending.push(PendingStep {
                    claim_text: clean_claim(&raw[seg_start..pos]),
                    query,
                    answer_text: None,
                    evidence_blocks,
                    raw: raw[seg_start..end].to_string(),
                });
                seg_start = end;
                cursor = end;
            }
            Opener::Answer => {
                let inner_start = pos + ANSWER_OPEN.len();
                let Some(rel_close) = raw[inner_start..].find(ANSWER_CLOSE) else {
                    return Err(TraceError::Malformed(format!(
                        "unclosed {ANSWER_OPEN} tag at byte {pos}"
                    )));
                };
                let inner = &raw[inner_start..inner_start + rel_close];
                let end = inner_start + rel_close + ANSWER_CLOSE.len();
                pending.push(PendingStep {
                    claim_text: clean_claim(&raw[seg_start..pos]),
                    query: None,
                    answer_text: Some(inner.trim().to_string()),
                    evidence_blocks: Vec::new(),
                    raw: raw[seg_start..end].to_string(),
                });
                seg_start = end;
                cursor = end;
            }
        }
    }

    let rest = &raw[seg_start..];
    if !rest.trim().is_empty() {
        pending.push(PendingStep {
            claim_text: clean_claim(rest),
            query: None,
            answer_text: None,
            evidence_blocks: Vec::new(),
            raw: rest.to_string(),
        });
    } else if let Some(last) = pending.last_mut() {
        last.raw.push_str(rest);
    } else {
        return Err(TraceError::Malformed(
            "input contains no steps".to_string(),
        ));
    }

    let steps = pending
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let index = i + 1;
            let evidence = p
                .evidence_blocks
                .iter()
                .flat_map(|block| parse_information(block))
                .map(|(doc_title, body)| EvidenceSnippet {
                    lead_sentence: lead_sentence(&body),
                    doc_title,
                    body,
                    source_step: index,
                })
                .collect();
            Step {
                index,
                claim_text: p.claim_text,
                query: p.query,
                evidence,
                answer_text: p.answer_text,
                token_span: None,
                raw_text: p.raw,
            }
        })
        .collect();
    Ok(steps)
}

/// Parse a trace record into a [`ReasoningTrace`], applying the record's
/// per-step evidence and token-span annotations.
pub fn parse_trace(record: &TraceRecord) -> Result<ReasoningTrace, TraceError> {
    let mut steps = parse_steps(&record.raw_output)?;
    let len = steps.len();

    for (key, snippets) in &record.evidence {
        let ordinal = parse_ordinal(key, len)?;
        steps[ordinal - 1].evidence = snippets
            .iter()
            .map(|r| EvidenceSnippet {
                doc_title: r.doc_title.clone(),
                lead_sentence: r
                    .lead_sentence
                    .clone()
                    .unwrap_or_else(|| lead_sentence(&r.body)),
                body: r.body.clone(),
                source_step: ordinal,
            })
            .collect();
    }

    for (key, &(start, end)) in &record.token_spans {
        let ordinal = parse_ordinal(key, len)?;
        if end <= start {
            return Err(TraceError::Malformed(format!(
                "token span for step {ordinal} is empty or reversed: [{start}, {end})"
            )));
        }
        steps[ordinal - 1].token_span = Some((start, end));
    }

    let predicted_answer = record.predicted_answer.clone().or_else(|| {
        steps
            .iter()
            .rev()
            .find_map(|s| s.answer_text.clone())
    });

    Ok(ReasoningTrace {
        question_id: record.question_id.clone(),
        question: record.question.clone(),
        gold_answer: record.gold_answer.clone(),
        predicted_answer,
        em_correct: record.em_correct,
        steps,
    })
}

fn parse_ordinal(key: &str, len: usize) -> Result<usize, TraceError> {
    let ordinal: usize = key.parse().map_err(|_| {
        TraceError::Malformed(format!("step ordinal {key:?} is not an integer"))
    })?;
    if ordinal == 0 || ordinal > len {
        return Err(TraceError::Malformed(format!(
            "step ordinal {ordinal} out of range for trace with {len} steps"
        )));
    }
    Ok(ordinal)
}

/// Bag-of-tokens F1 between two strings.
///
/// Both sides are lowercased, ASCII punctuation is removed, and tokens are
/// whitespace-separated. Overlap is multiset overlap. Two empty bags score
/// 1.0; exactly one empty bag scores 0.0.
pub fn token_f1(a: &str, b: &str) -> f64 {
    let ta = normalize_tokens(a);
    let tb = normalize_tokens(b);
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tok in &ta {
        *counts.entry(tok.as_str()).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for tok in &tb {
        if let Some(c) = counts.get_mut(tok.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    2.0 * overlap as f64 / (ta.len() + tb.len()) as f64
}

fn normalize_tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(raw: &str) -> TraceRecord {
        TraceRecord {
            question_id: "q1".into(),
            question: "who?".into(),
            gold_answer: None,
            raw_output: raw.into(),
            evidence: BTreeMap::new(),
            token_spans: BTreeMap::new(),
            em_correct: None,
            predicted_answer: None,
        }
    }

    #[test]
    fn two_step_trace_parses() {
        let raw = "<think>need the director</think>\n<search>whiplash director</search>\n<information>Doc 1(Title: \"Whiplash (2014 film)\") Whiplash is a film directed by Damien Chazelle. It premiered at Sundance.</information>\nThe director is Damien Chazelle.\n<answer>Damien Chazelle</answer>";
        let steps = parse_steps(raw).unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].kind(), StepKind::Inference);
        assert_eq!(steps[0].query.as_deref(), Some("whiplash director"));
        assert_eq!(steps[0].claim_text, "need the director");
        assert_eq!(steps[0].evidence.len(), 1);
        assert_eq!(steps[0].evidence[0].doc_title, "Whiplash (2014 film)");
        assert_eq!(
            steps[0].evidence[0].lead_sentence,
            "Whiplash is a film directed by Damien Chazelle."
        );
        assert_eq!(steps[0].evidence[0].source_step, 1);
        assert_eq!(steps[1].kind(), StepKind::Conclusion);
        assert_eq!(steps[1].answer_text.as_deref(), Some("Damien Chazelle"));
        assert_eq!(steps[1].claim(), "Damien Chazelle");
        assert_eq!(steps[1].claim_text, "The director is Damien Chazelle.");
    }

    #[test]
    fn segmentation_is_lossless() {
        let raw = "  lead in <search>q1</search><information>Doc 1(Title: \"T\") body.</information> middle <answer>x</answer>  \n";
        let steps = parse_steps(raw).unwrap();
        let rebuilt: String = steps.iter().map(|s| s.raw_text.as_str()).collect();
        assert_eq!(rebuilt, raw);
    }

    #[test]
    fn search_and_answer_in_one_stretch_become_two_steps() {
        let raw = "start<search>q</search> and then <answer>a</answer>";
        let steps = parse_steps(raw).unwrap();
        assert_eq!(steps.len(), 2);
        assert!(steps[0].is_search());
        assert!(!steps[0].is_answer());
        assert!(steps[1].is_answer());
        let rebuilt: String = steps.iter().map(|s| s.raw_text.as_str()).collect();
        assert_eq!(rebuilt, raw);
    }

    #[test]
    fn hermes_tool_call_is_a_search_step() {
        let raw = r#"<think>look it up</think><tool_call>{"name": "search", "arguments": {"query": "capital of yukon"}}</tool_call><information>Doc 1(Title: "Yukon") Whitehorse is the capital.</information>done<answer>Whitehorse</answer>"#;
        let steps = parse_steps(raw).unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].query.as_deref(), Some("capital of yukon"));
        assert_eq!(steps[0].evidence.len(), 1);
    }

    #[test]
    fn non_search_tool_call_stays_inline() {
        let raw = r#"<tool_call>{"name": "calculator", "arguments": {"expr": "1+1"}}</tool_call> so the total is two <answer>2</answer>"#;
        let steps = parse_steps(raw).unwrap();
        assert_eq!(steps.len(), 1);
        assert!(steps[0].is_answer());
        assert!(steps[0].claim_text.contains("so the total is two"));
    }

    #[test]
    fn untagged_text_is_a_single_inference_step() {
        let steps = parse_steps("just thinking out loud, no tools").unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].kind(), StepKind::Inference);
        assert_eq!(steps[0].claim_text, "just thinking out loud, no tools");
    }

    #[test]
    fn trailing_reasoning_becomes_a_final_step() {
        let raw = "<search>q</search> trailing thought with no tag";
        let steps = parse_steps(raw).unwrap();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[1].claim_text, "trailing thought with no tag");
    }

    #[test]
    fn trailing_whitespace_folds_into_last_step() {
        let raw = "<answer>x</answer>\n\n  ";
        let steps = parse_steps(raw).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].raw_text, raw);
    }

    #[test]
    fn unclosed_tags_are_malformed() {
        for raw in [
            "<search>forever",
            "a<answer>b",
            "<search>q</search><information>docs",
        ] {
            assert!(matches!(parse_steps(raw), Err(TraceError::Malformed(_))), "{raw}");
        }
    }

    #[test]
    fn empty_input_is_malformed() {
        assert!(matches!(parse_steps(""), Err(TraceError::Malformed(_))));
        assert!(matches!(parse_steps("   \n\t"), Err(TraceError::Malformed(_))));
    }

    #[test]
    fn multiple_docs_in_one_information_block() {
        let raw = "<search>q</search><information>Doc 1(Title: \"A\") First body. More.\nDoc 2(Title: \"B\") Second body!</information><answer>x</answer>";
        let steps = parse_steps(raw).unwrap();
        let ev = &steps[0].evidence;
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].doc_title, "A");
        assert_eq!(ev[0].body, "First body. More.");
        assert_eq!(ev[0].lead_sentence, "First body.");
        assert_eq!(ev[1].doc_title, "B");
        assert_eq!(ev[1].body, "Second body!");
    }

    #[test]
    fn headerless_information_block_is_one_untitled_snippet() {
        let raw = "<search>q</search><information>  plain snippet text  </information><answer>x</answer>";
        let steps = parse_steps(raw).unwrap();
        assert_eq!(steps[0].evidence.len(), 1);
        assert_eq!(steps[0].evidence[0].doc_title, "");
        assert_eq!(steps[0].evidence[0].body, "plain snippet text");
    }

    #[test]
    fn record_evidence_replaces_parsed_evidence() {
        let mut rec = record(
            "<search>q</search><information>Doc 1(Title: \"Old\") old body.</information><answer>x</answer>",
        );
        rec.evidence.insert(
            "1".into(),
            vec![EvidenceRecord {
                doc_title: "New".into(),
                lead_sentence: None,
                body: "fresh body. second sentence.".into(),
            }],
        );
        let trace = parse_trace(&rec).unwrap();
        assert_eq!(trace.steps[0].evidence.len(), 1);
        assert_eq!(trace.steps[0].evidence[0].doc_title, "New");
        assert_eq!(trace.steps[0].evidence[0].lead_sentence, "fresh body.");
        assert_eq!(trace.steps[0].evidence[0].source_step, 1);
    }

    #[test]
    fn record_annotations_validate_ordinals_and_spans() {
        let mut rec = record("<answer>x</answer>");
        rec.token_spans.insert("2".into(), (0, 4));
        assert!(matches!(parse_trace(&rec), Err(TraceError::Malformed(_))));

        let mut rec = record("<answer>x</answer>");
        rec.token_spans.insert("1".into(), (4, 4));
        assert!(matches!(parse_trace(&rec), Err(TraceError::Malformed(_))));

        let mut rec = record("<answer>x</answer>");
        rec.token_spans.insert("1".into(), (0, 4));
        let trace = parse_trace(&rec).unwrap();
        assert_eq!(trace.steps[0].token_span, Some((0, 4)));
    }

    #[test]
    fn predicted_answer_falls_back_to_last_conclusion() {
        let rec = record("<answer>first</answer> hmm <answer>second</answer>");
        let trace = parse_trace(&rec).unwrap();
        assert_eq!(trace.predicted_answer.as_deref(), Some("second"));
    }

    #[test]
    fn accumulated_evidence_dedups_and_respects_prefix() {
        let raw = "<search>a</search><information>Doc 1(Title: \"X\") same body.</information>\
                   <search>b</search><information>Doc 1(Title: \"X\") same body.\nDoc 2(Title: \"Y\") other.</information>\
                   <answer>x</answer>";
        let trace = parse_trace(&record(raw)).unwrap();
        assert_eq!(trace.accumulated_evidence(1).unwrap().len(), 1);
        let at2 = trace.accumulated_evidence(2).unwrap();
        assert_eq!(at2.len(), 2);
        assert_eq!(at2[0].source_step, 1);
        assert_eq!(at2[1].doc_title, "Y");
        assert_eq!(trace.accumulated_evidence(3).unwrap().len(), 2);
        assert!(matches!(
            trace.accumulated_evidence(0),
            Err(TraceError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            trace.accumulated_evidence(4),
            Err(TraceError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn token_f1_hand_counts() {
        // tokens: {who directed whiplash} vs {whiplash director name}:
        // one shared token out of 3 + 3.
        let f1 = token_f1("who directed whiplash", "whiplash director name");
        assert!((f1 - 1.0 / 3.0).abs() < 1e-12);

        assert_eq!(token_f1("", ""), 1.0);
        assert_eq!(token_f1("a", ""), 0.0);
        assert_eq!(token_f1("", "a"), 0.0);
        assert_eq!(token_f1("Same Query!", "same query"), 1.0);

        // Multiset counting: "a a b" vs "a b b" overlap is {a, b}.
        let f1 = token_f1("a a b", "a b b");
        assert!((f1 - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn token_f1_strips_punctuation_not_words() {
        assert_eq!(token_f1("don't stop", "dont stop"), 1.0);
        assert!((token_f1("multi-hop", "multihop") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn claim_strips_think_markers_and_info_blocks() {
        let raw = "<think>the key fact</think><information>Doc 1(Title: \"Z\") stray.</information> extra <answer>x</answer>";
        let steps = parse_steps(raw).unwrap();
        assert_eq!(steps[0].claim_text, "the key fact extra");
    }
}
