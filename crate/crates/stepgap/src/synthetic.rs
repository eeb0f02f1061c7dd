//! Deterministic synthetic benchmark, shaped like the reference human
//! evaluation set.
//!
//! The real 82-question / 181-step benchmark is not redistributable, so this
//! module generates a stand-in with a frozen shape that reproduces its
//! aggregate statistics exactly: 82 questions, 181 steps, a 59% step-level
//! gap rate, category shares of 40.9 / 38.1 / 14.9 / 6.1 percent
//! (no-gap / IE / CC / MB), an answer–gap cross-tab of 56/13/12/1, and a
//! first-gap distribution that rounds to (79, 11, 11) percent. Every trace
//! comes with scripted LLM and NLI judge entries that drive the real decision
//! tree to the planned verdict at every step, so end-to-end runs are fully
//! offline and byte-deterministic.
//!
//! Gold labels equal the scripted verdicts except for eight flag/miss pairs
//! (sixteen steps), which keeps the gold gap count at 107 while giving the
//! step-level metrics a realistic error floor (sF1 ≈ 92.5, κ < 1).

use crate::checker::JudgeSet;
use crate::gap::GapType;
use crate::judge::scripted::{
    canned, standard_probe_entries, LlmScriptEntry, NliMatcher, NliScriptEntry, RequestMatcher,
    ScriptedLlmJudge, ScriptedNli,
};
use crate::judge::{CalibratedNli, DriftType, JudgeConfig, JudgeError};
use crate::metrics::{CorrectnessMap, StepPrediction};
use crate::trace::{parse_trace, GoldStepLabel, ReasoningTrace, TraceError, TraceRecord};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

pub const BENCHMARK_FILE: &str = "benchmark.jsonl";
pub const GOLD_FILE: &str = "gold_labels.jsonl";
pub const LLM_SCRIPT_FILE: &str = "llm_script.jsonl";
pub const NLI_SCRIPT_FILE: &str = "nli_script.jsonl";

/// The verdict the scripted judges steer the checker to at one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedVerdict {
    pub question_id: String,
    pub step_index: usize,
    pub predicted: GapType,
}

/// The generated benchmark plus everything needed to replay it offline.
#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub records: Vec<TraceRecord>,
    pub gold_labels: Vec<GoldStepLabel>,
    pub llm_script: Vec<LlmScriptEntry>,
    pub nli_script: Vec<NliScriptEntry>,
    pub plan: Vec<PlannedVerdict>,
}

struct QuestionGroup {
    prefix: &'static str,
    first: usize,
    count: usize,
    labels: &'static [GapType],
    em_correct: bool,
}

use GapType::{ContradictedClaim as Cc, IrrelevantEvidence as Ie, MissingBridge as Mb, NoGap};

const GROUPS: &[QuestionGroup] = &[
    QuestionGroup { prefix: "u", first: 1, count: 13, labels: &[NoGap, NoGap], em_correct: false },
    QuestionGroup { prefix: "u", first: 14, count: 1, labels: &[NoGap, NoGap], em_correct: true },
    QuestionGroup { prefix: "w", first: 1, count: 4, labels: &[Ie, Ie], em_correct: false },
    QuestionGroup { prefix: "w", first: 5, count: 16, labels: &[Ie, NoGap], em_correct: false },
    QuestionGroup { prefix: "w", first: 21, count: 19, labels: &[NoGap, Ie], em_correct: false },
    QuestionGroup { prefix: "w", first: 40, count: 5, labels: &[Ie, Cc, NoGap], em_correct: false },
    QuestionGroup { prefix: "w", first: 45, count: 6, labels: &[Cc, Ie, NoGap], em_correct: false },
    QuestionGroup { prefix: "w", first: 51, count: 6, labels: &[Mb, Cc, Ie], em_correct: false },
    QuestionGroup { prefix: "c", first: 1, count: 5, labels: &[Cc, Mb], em_correct: true },
    QuestionGroup { prefix: "c", first: 6, count: 5, labels: &[Cc, Ie], em_correct: true },
    QuestionGroup { prefix: "c", first: 11, count: 2, labels: &[Ie, Ie], em_correct: true },
];

/// Questions whose gold labels swap the flag onto the other step
/// ([IE, NoGap] predicted, [NoGap, IE] gold).
const GOLD_SWAP_QUESTIONS: [&str; 8] = [
    "w05", "w06", "w07", "w08", "w09", "w10", "w11", "w12",
];

const NAME_PREFIXES: [&str; 10] = [
    "Alder", "Birch", "Calder", "Dray", "Elm", "Fenn", "Gorse", "Hazel", "Ivor", "Juniper",
];
const NAME_SUFFIXES: [&str; 9] = [
    "bridge", "crest", "dale", "ford", "gate", "haven", "march", "point", "wick",
];

fn entity_name(ordinal: usize) -> String {
    format!(
        "{}{}",
        NAME_PREFIXES[ordinal % NAME_PREFIXES.len()],
        NAME_SUFFIXES[(ordinal / NAME_PREFIXES.len()) % NAME_SUFFIXES.len()]
    )
}

struct StepBits {
    segment: String,
    answer: Option<&'static str>,
    llm: LlmScriptEntry,
    nli: Option<NliScriptEntry>,
}

fn llm_entry(name: &str, step_index: usize, respond: crate::judge::LlmJudgeResponse) -> LlmScriptEntry {
    LlmScriptEntry {
        matcher: RequestMatcher {
            purpose: Some("stage_abc".into()),
            question_contains: Some(name.to_string()),
            step_index: Some(step_index),
            ..Default::default()
        },
        respond: Some(respond),
        entailment: None,
    }
}

fn nli_entry(key: &str, scores: [f64; 3]) -> NliScriptEntry {
    NliScriptEntry {
        matcher: NliMatcher {
            premise_contains: Some(key.to_string()),
            ..Default::default()
        },
        scores,
    }
}

fn search_segment(reasoning: &str, query: &str, title: &str, body: &str) -> String {
    format!("{reasoning}\n<search>{query}</search>\n<information>Doc 1(Title: \"{title}\") {body}</information>\n")
}

fn conclusion_segment(reasoning: &str, answer: &str) -> String {
    format!("{reasoning}\n<answer>{answer}</answer>\n")
}

const ENTAILED: [f64; 3] = [0.93, 0.04, 0.03];
const NEUTRAL: [f64; 3] = [0.07, 0.85, 0.08];

fn build_step(
    qid: &str,
    name: &str,
    other: &str,
    step_index: usize,
    label: GapType,
    is_conclusion: bool,
) -> StepBits {
    let key = format!("{qid}-s{step_index}");
    match (label, is_conclusion) {
        (GapType::NoGap, false) => {
            let quote = format!("Register entry {key}: the {name} Institute was established in 1887");
            StepBits {
                segment: search_segment(
                    &format!(
                        "The {name} Institute register should state the year directly; \
                         it records that the {name} Institute was established in 1887."
                    ),
                    &format!("{name} Institute establishment year"),
                    &format!("{name} Institute"),
                    &format!("{quote} and has operated continuously since."),
                ),
                answer: None,
                llm: llm_entry(name, step_index, canned::on_target_with_quote(&quote)),
                nli: Some(nli_entry(&key, ENTAILED)),
            }
        }
        (GapType::NoGap, true) => {
            let quote = format!("Register entry {key}: the {name} Institute was established in 1887");
            StepBits {
                segment: conclusion_segment(
                    &format!("The register already settles it: the {name} Institute was established in 1887."),
                    "1887",
                ),
                answer: Some("1887"),
                llm: llm_entry(name, step_index, canned::on_target_with_quote(&quote)),
                nli: Some(nli_entry(&key, ENTAILED)),
            }
        }
        (GapType::MissingBridge, false) => {
            let quote = format!(
                "Register entry {key}: the founder of the {name} Institute studied at a college in Geneva"
            );
            StepBits {
                segment: search_segment(
                    &format!(
                        "The founder of the {name} Institute studied in Geneva, \
                         so the founder must have been born in Geneva."
                    ),
                    &format!("{name} Institute founder early life"),
                    &format!("{name} Institute"),
                    &format!("{quote}."),
                ),
                answer: None,
                llm: llm_entry(name, step_index, canned::on_target_with_quote(&quote)),
                nli: Some(nli_entry(&key, NEUTRAL)),
            }
        }
        (GapType::MissingBridge, true) => {
            let quote = format!(
                "Register entry {key}: the founder of the {name} Institute studied at a college in Geneva"
            );
            StepBits {
                segment: conclusion_segment(
                    &format!(
                        "The college record places the founder in Geneva, so the founder \
                         of the {name} Institute was born in Geneva."
                    ),
                    "Geneva",
                ),
                answer: Some("Geneva"),
                llm: llm_entry(name, step_index, canned::on_target_with_quote(&quote)),
                nli: Some(nli_entry(&key, NEUTRAL)),
            }
        }
        (GapType::IrrelevantEvidence, false) => StepBits {
            segment: search_segment(
                &format!("Next I need the establishment year for the {name} Institute."),
                &format!("{name} Institute founding"),
                &format!("{other} Tramway"),
                &format!(
                    "Register entry {key}: the {other} Tramway opened in 1903 \
                     and closed to passengers in 1911."
                ),
            ),
            answer: None,
            llm: llm_entry(name, step_index, canned::entity_mismatch()),
            nli: None,
        },
        (GapType::IrrelevantEvidence, true) => StepBits {
            segment: conclusion_segment(
                &format!("The tramway record gives 1903, so that settles the {name} Institute question."),
                "1903",
            ),
            answer: Some("1903"),
            llm: llm_entry(name, step_index, canned::entity_mismatch()),
            nli: None,
        },
        (GapType::ContradictedClaim, false) => StepBits {
            segment: search_segment(
                &format!(
                    "What matters more is how busy the {name} Institute reading room gets; \
                     attendance there peaks each July."
                ),
                &format!("{name} Institute reading room attendance"),
                &format!("{name} Institute"),
                &format!(
                    "Register entry {key}: reading-room attendance at the {name} Institute \
                     is tallied quarterly."
                ),
            ),
            answer: None,
            llm: llm_entry(name, step_index, canned::off_target(DriftType::RelationDrift)),
            nli: None,
        },
        (GapType::ContradictedClaim, true) => {
            unreachable!("the frozen plan never puts a CC verdict on a conclusion step")
        }
    }
}

/// Build the frozen 82-question benchmark.
pub fn reference_benchmark() -> SyntheticBenchmark {
    let mut records = Vec::new();
    let mut gold_labels = Vec::new();
    let mut llm_script = Vec::new();
    let mut nli_script = standard_probe_entries();
    let mut plan = Vec::new();

    let mut ordinal = 0usize;
    for group in GROUPS {
        for k in 0..group.count {
            let qid = format!("{}{:02}", group.prefix, group.first + k);
            let name = entity_name(ordinal);
            let other = entity_name((ordinal + 41) % 82);
            ordinal += 1;

            let n_steps = group.labels.len();
            let asks_birthplace = group.labels[n_steps - 1] == GapType::MissingBridge;
            let question = if asks_birthplace {
                format!("In which city was the founder of the {name} Institute born?")
            } else {
                format!("In what year was the {name} Institute established?")
            };

            let mut raw_output = String::new();
            let mut predicted: Option<&str> = None;
            let mut token_spans = BTreeMap::new();
            for (j, &label) in group.labels.iter().enumerate() {
                let step_index = j + 1;
                let is_conclusion = step_index == n_steps;
                let bits = build_step(&qid, &name, &other, step_index, label, is_conclusion);
                raw_output.push_str(&bits.segment);
                if let Some(a) = bits.answer {
                    predicted = Some(a);
                }
                llm_script.push(bits.llm);
                if let Some(entry) = bits.nli {
                    nli_script.push(entry);
                }
                token_spans.insert(step_index.to_string(), (j * 12, (j + 1) * 12));
                plan.push(PlannedVerdict {
                    question_id: qid.clone(),
                    step_index,
                    predicted: label,
                });

                let gold = if GOLD_SWAP_QUESTIONS.contains(&qid.as_str()) {
                    match label {
                        GapType::IrrelevantEvidence => GapType::NoGap,
                        GapType::NoGap => GapType::IrrelevantEvidence,
                        other => other,
                    }
                } else {
                    label
                };
                gold_labels.push(GoldStepLabel {
                    question_id: qid.clone(),
                    step_index,
                    label: gold,
                });
            }

            let predicted = predicted.expect("every plan row ends in a conclusion");
            let gold_answer = if group.em_correct {
                predicted.to_string()
            } else if predicted == "1887" {
                "1912".to_string()
            } else {
                "1887".to_string()
            };
            records.push(TraceRecord {
                question_id: qid,
                question,
                gold_answer: Some(gold_answer),
                raw_output,
                evidence: BTreeMap::new(),
                token_spans,
                em_correct: Some(group.em_correct),
                predicted_answer: None,
            });
        }
    }

    SyntheticBenchmark {
        records,
        gold_labels,
        llm_script,
        nli_script,
        plan,
    }
}

impl SyntheticBenchmark {
    pub fn traces(&self) -> Result<Vec<ReasoningTrace>, TraceError> {
        self.records.iter().map(parse_trace).collect()
    }

    /// Scripted judge set that replays this benchmark offline.
    pub fn judge_set(&self) -> Result<JudgeSet, JudgeError> {
        let llm = ScriptedLlmJudge::new(self.llm_script.clone())?;
        let nli = ScriptedNli::new(self.nli_script.clone());
        let calibrated = CalibratedNli::calibrate(Arc::new(nli), &JudgeConfig::default())?;
        Ok(JudgeSet::new(Arc::new(llm), Arc::new(calibrated)))
    }

    pub fn correctness(&self) -> CorrectnessMap {
        self.records
            .iter()
            .map(|r| (r.question_id.clone(), r.em_correct))
            .collect()
    }

    /// Step predictions as the plan says the checker will emit them, paired
    /// with the gold labels. Useful for metrics tests that do not need to run
    /// the checker itself.
    pub fn planned_predictions(&self) -> Vec<StepPrediction> {
        self.plan
            .iter()
            .zip(&self.gold_labels)
            .map(|(p, g)| {
                debug_assert_eq!((p.question_id.as_str(), p.step_index), (g.question_id.as_str(), g.step_index));
                StepPrediction {
                    question_id: p.question_id.clone(),
                    step_index: p.step_index,
                    predicted: p.predicted,
                    gold: Some(g.label),
                    unchecked: false,
                }
            })
            .collect()
    }

    /// Write the four replay artifacts (benchmark, gold labels, LLM script,
    /// NLI script) as JSONL files under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(BENCHMARK_FILE), &self.records)?;
        write_jsonl(&dir.join(GOLD_FILE), &self.gold_labels)?;
        write_jsonl(&dir.join(LLM_SCRIPT_FILE), &self.llm_script)?;
        write_jsonl(&dir.join(NLI_SCRIPT_FILE), &self.nli_script)?;
        Ok(())
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).map_err(std::io::Error::other)?);
        out.push('\n');
    }
    std::fs::write(path, out)
}
