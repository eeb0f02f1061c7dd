//! Step-level evidence-gap checking for search-interleaved multi-hop QA traces.
//!
//! The crate is organised around a single data flow:
//!
//! 1. [`trace`] parses raw rollout text (``<search>``/``<information>``/``<answer>``
//!    tag grammar, Hermes-style tool calls) into a lossless [`trace::ReasoningTrace`].
//! 2. [`judge`] provides the two verification backends the checker consults:
//!    a structured-output LLM judge and a three-way NLI scorer, each available as
//!    an HTTP client or a deterministic scripted replay, with on-disk caching.
//! 3. [`checker`] walks the five-stage decision tree over each step and emits a
//!    typed [`GapVerdict`] (contradicted claim, irrelevant evidence, missing
//!    bridge, or no gap) together with the full pipeline path it took.
//! 4. [`reward`] turns verdict sequences into typed process rewards and dense
//!    token-level advantages for GRPO-style training.
//! 5. [`metrics`] scores verdicts against gold step labels: step-level P/R/F1,
//!    question-level F1 with its degenerate-checker trap curve, balanced
//!    accuracy, bootstrap CIs, agreement, and category-health diagnostics.
//! 6. [`cli`] wires everything into the `stepgap` binary.
//!
//! [`synthetic`] generates the deterministic benchmark and judge scripts used by
//! the integration tests and by `stepgap`'s offline mode.

pub mod checker;
pub mod cli;
pub mod gap;
pub mod judge;
pub mod metrics;
pub mod reward;
pub mod synthetic;
pub mod trace;

pub use checker::{CheckerVariant, GapVerdict, VariantName};
pub use gap::{GapType, RepairAction};
pub use trace::{ReasoningTrace, Step, StepKind};
