//! Command-line harness: benchmark ingestion, variant runs, ablation and
//! threshold sweeps, reward export, distillation-pool export, and the
//! flag-everything trap experiment.
//!
//! Configuration precedence, lowest to highest: built-in defaults, the TOML
//! config file (`--config`), command-line flags, then the credential
//! environment variables `STEPGAP_JUDGE_ENDPOINT`, `STEPGAP_JUDGE_API_KEY`,
//! and `STEPGAP_NLI_ENDPOINT`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 judge unavailable
//! (including NLI calibration failures and exhausted replay scripts),
//! 4 malformed input.

use crate::checker::{
    apply_confidence_gate, check_trace, check_trace_full, CheckError, CheckerVariant, GapVerdict,
    JudgeArtifacts, JudgeSet, Stage, VariantName,
};
use crate::gap::GapType;
use crate::judge::cache::{CachedLlmJudge, CachedNli};
use crate::judge::http::{HttpLlmJudge, HttpNli};
use crate::judge::scripted::{ScriptedLlmJudge, ScriptedNli};
use crate::judge::{CalibratedNli, JudgeConfig, JudgeError, LlmJudge, NliBackend};
use crate::metrics::{
    compute_report, render_text, trap_experiment, CorrectnessMap, MetricsError, ReportConfig,
    StepPrediction, TrapReport,
};
use crate::reward::{
    assign_dense_advantages, trajectory_return, RewardBreakdown, RewardConfig, RewardError,
    TokenAdvantages,
};
use crate::trace::{parse_trace, GoldStepLabel, ReasoningTrace, TraceError, TraceRecord};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

pub const ENV_JUDGE_ENDPOINT: &str = "STEPGAP_JUDGE_ENDPOINT";
pub const ENV_JUDGE_API_KEY: &str = "STEPGAP_JUDGE_API_KEY";
pub const ENV_NLI_ENDPOINT: &str = "STEPGAP_NLI_ENDPOINT";

pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const METRICS_JSON_FILE: &str = "metrics.json";
pub const METRICS_TEXT_FILE: &str = "metrics.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ABLATION_JSON_FILE: &str = "ablation.json";
pub const ABLATION_TEXT_FILE: &str = "ablation.txt";
pub const SWEEP_TSV_FILE: &str = "sweep.tsv";
pub const SWEEP_JSON_FILE: &str = "sweep.json";
pub const REWARDS_FILE: &str = "rewards.jsonl";
pub const ADVANTAGES_FILE: &str = "advantages.jsonl";
pub const DISTILL_FILE: &str = "distill_pool.jsonl";
pub const TRAP_TSV_FILE: &str = "trap.tsv";
pub const TRAP_JSON_FILE: &str = "trap.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    JudgeUnavailable(String),
    #[error("{0}")]
    MalformedInput(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::JudgeUnavailable(_) => 3,
            CliError::MalformedInput(_) => 4,
        }
    }
}

impl From<JudgeError> for CliError {
    fn from(e: JudgeError) -> Self {
        match e {
            JudgeError::Unavailable(_)
            | JudgeError::CalibrationFailed(_)
            | JudgeError::ScriptExhausted(_) => CliError::JudgeUnavailable(e.to_string()),
            JudgeError::SchemaViolation(_) => CliError::MalformedInput(e.to_string()),
        }
    }
}

impl From<CheckError> for CliError {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Judge(j) => j.into(),
            CheckError::Trace(t) => t.into(),
            CheckError::InvalidVariant(msg) => CliError::Config(msg),
        }
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::MalformedInput(e.to_string())
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        match e {
            RewardError::InvalidConfig(msg) => CliError::Config(msg),
            other => CliError::MalformedInput(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::DomainError(msg) => CliError::Config(msg),
            other => CliError::MalformedInput(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stepgap",
    version,
    about = "Step-level evidence-gap checking for search-interleaved QA traces"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Benchmark JSONL file, one trace record per line.
    #[arg(long, global = true)]
    pub benchmark: Option<PathBuf>,
    /// Gold step labels JSONL file.
    #[arg(long, global = true)]
    pub gold_labels: Option<PathBuf>,
    /// Checker variant: stepgap, llm-strict, llm-only, single-llm-xl,
    /// nli-only, flag-everything.
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Directory for output artifacts.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Seed recorded in the manifest and used for bootstrap resampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum traces checked in parallel.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Scripted LLM judge replay file (JSONL); omits the HTTP backend.
    #[arg(long, global = true)]
    pub llm_script: Option<PathBuf>,
    /// Scripted NLI replay file (JSONL); omits the HTTP backend.
    #[arg(long, global = true)]
    pub nli_script: Option<PathBuf>,
    /// LLM judge endpoint URL.
    #[arg(long, global = true)]
    pub judge_endpoint: Option<String>,
    /// NLI endpoint URL.
    #[arg(long, global = true)]
    pub nli_endpoint: Option<String>,
    /// Judge response cache directory.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every step of every trace and report metrics.
    Check,
    /// Compare the full pipeline against stage-ablated runs.
    Ablate {
        /// Stages to ablate, e.g. "A,E". Each stage is removed singly, and
        /// jointly when more than one is listed.
        #[arg(long, value_delimiter = ',', default_value = "A,E")]
        stages: Vec<String>,
    },
    /// Re-gate verdicts at a range of confidence thresholds.
    Sweep {
        /// Thresholds in [0, 1].
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.3,0.4,0.5,0.6,0.7,0.8,0.9"
        )]
        thresholds: Vec<f64>,
    },
    /// Export typed process rewards and group-standardized advantages.
    Reward {
        /// Required rollouts per GRPO group; groups are maximal runs of
        /// consecutive records sharing a question id.
        #[arg(long)]
        group_size: Option<usize>,
    },
    /// Export teacher labels, judge artifacts, and pipeline paths per step.
    DistillExport,
    /// Measure the question-level F1 of a flag-everything checker across
    /// wrong-answer-rate strata.
    Trap {
        /// Target wrong-answer rates in (0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.65,0.84")]
        w_strata: Vec<f64>,
    },
}

/// File form of the run configuration. Every field is optional; flags
/// override whatever is set here.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    benchmark: Option<PathBuf>,
    gold_labels: Option<PathBuf>,
    variant: Option<String>,
    ablations: Option<Vec<String>>,
    confidence_threshold: Option<f64>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    concurrency: Option<usize>,
    llm_script: Option<PathBuf>,
    nli_script: Option<PathBuf>,
    judge: Option<JudgeConfig>,
    reward: Option<RewardConfig>,
    report: Option<ReportConfig>,
}

/// The fully resolved configuration a command runs with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub benchmark_path: PathBuf,
    pub gold_labels_path: Option<PathBuf>,
    pub variant: CheckerVariant,
    pub judge: JudgeConfig,
    pub reward: RewardConfig,
    pub report: ReportConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub concurrency_limit: usize,
    pub llm_script: Option<PathBuf>,
    pub nli_script: Option<PathBuf>,
}

impl RunConfig {
    /// Copy safe to write to disk: the API key never leaves the process.
    fn redacted(&self) -> RunConfig {
        let mut copy = self.clone();
        if copy.judge.api_key.is_some() {
            copy.judge.api_key = Some("<redacted>".into());
        }
        copy
    }
}

fn parse_variant(name: &str) -> Result<VariantName, CliError> {
    VariantName::from_str(name).map_err(CliError::Config)
}

fn parse_stages(stages: &[String]) -> Result<BTreeSet<Stage>, CliError> {
    stages
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| Stage::from_str(s.trim()).map_err(CliError::Config))
        .collect()
}

/// Merge defaults, config file, flags, and credential env vars into the
/// final [`RunConfig`].
pub fn resolve_config(args: &GlobalArgs) -> Result<RunConfig, CliError> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let variant_name = args
        .variant
        .clone()
        .or(file.variant)
        .unwrap_or_else(|| "stepgap".into());
    let mut variant = CheckerVariant::new(parse_variant(&variant_name)?);
    if let Some(ablations) = &file.ablations {
        variant.stage_ablations = parse_stages(ablations)?;
    }
    if let Some(tau) = file.confidence_threshold {
        variant.overall_confidence_threshold = Some(tau);
    }
    variant
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let mut judge = file.judge.unwrap_or_default();
    if let Some(v) = &args.judge_endpoint {
        judge.endpoint = v.clone();
    }
    if let Some(v) = &args.nli_endpoint {
        judge.nli_endpoint = v.clone();
    }
    if let Some(v) = &args.cache_dir {
        judge.cache_dir = Some(v.clone());
    }
    if let Ok(v) = std::env::var(ENV_JUDGE_ENDPOINT) {
        judge.endpoint = v;
    }
    if let Ok(v) = std::env::var(ENV_JUDGE_API_KEY) {
        judge.api_key = Some(v);
    }
    if let Ok(v) = std::env::var(ENV_NLI_ENDPOINT) {
        judge.nli_endpoint = v;
    }
    judge.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let reward = file.reward.unwrap_or_default();
    reward
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let seed = args.seed.or(file.seed).unwrap_or(17);
    let mut report = file.report.unwrap_or_default();
    report.seed = seed;

    let benchmark_path = args
        .benchmark
        .clone()
        .or(file.benchmark)
        .ok_or_else(|| CliError::Config("no benchmark file given (--benchmark)".into()))?;

    Ok(RunConfig {
        benchmark_path,
        gold_labels_path: args.gold_labels.clone().or(file.gold_labels),
        variant,
        judge,
        reward,
        report,
        output_dir: args
            .output_dir
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from("stepgap-out")),
        seed,
        concurrency_limit: args.concurrency.or(file.concurrency).unwrap_or(4).max(1),
        llm_script: args.llm_script.clone().or(file.llm_script),
        nli_script: args.nli_script.clone().or(file.nli_script),
    })
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| {
            CliError::MalformedInput(format!("{} line {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut out = String::new();
    for item in items {
        out.push_str(
            &serde_json::to_string(item).map_err(|e| CliError::Io(e.to_string()))?,
        );
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Io(format!("cannot hash {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Build the judge pair: scripted replay when a script path is configured,
/// the HTTP backend otherwise, each behind the on-disk cache when a cache
/// directory is set.
pub fn build_judges(cfg: &RunConfig) -> Result<JudgeSet, CliError> {
    let llm: Arc<dyn LlmJudge> = match (&cfg.llm_script, &cfg.judge.cache_dir) {
        (Some(path), Some(dir)) => Arc::new(CachedLlmJudge::new(
            ScriptedLlmJudge::load(path)?,
            dir,
            &cfg.judge.model_name,
        )?),
        (Some(path), None) => Arc::new(ScriptedLlmJudge::load(path)?),
        (None, Some(dir)) => Arc::new(CachedLlmJudge::new(
            HttpLlmJudge::new(&cfg.judge)?,
            dir,
            &cfg.judge.model_name,
        )?),
        (None, None) => Arc::new(HttpLlmJudge::new(&cfg.judge)?),
    };
    let nli: Arc<dyn NliBackend> = match (&cfg.nli_script, &cfg.judge.cache_dir) {
        (Some(path), Some(dir)) => Arc::new(CachedNli::new(
            ScriptedNli::load(path)?,
            dir,
            &cfg.judge.nli_model_name,
        )?),
        (Some(path), None) => Arc::new(ScriptedNli::load(path)?),
        (None, Some(dir)) => Arc::new(CachedNli::new(
            HttpNli::new(&cfg.judge)?,
            dir,
            &cfg.judge.nli_model_name,
        )?),
        (None, None) => Arc::new(HttpNli::new(&cfg.judge)?),
    };
    let calibrated = CalibratedNli::calibrate(nli, &cfg.judge)?;
    Ok(JudgeSet::new(llm, Arc::new(calibrated)))
}

/// Map `f` over the traces with at most `limit` worker threads, preserving
/// input order. The first error wins.
fn parallel_map<T, F>(
    traces: &[ReasoningTrace],
    limit: usize,
    f: F,
) -> Result<Vec<T>, CheckError>
where
    T: Send,
    F: Fn(&ReasoningTrace) -> Result<T, CheckError> + Sync,
{
    let n = traces.len();
    let workers = limit.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T, CheckError>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = f(&traces[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

/// JSON report envelope; the seed travels with every run-level report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeededReport<T> {
    pub seed: u64,
    pub report: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub judge_calls: BTreeMap<String, u64>,
    pub unchecked_steps: usize,
    pub wall_clock_ms: u128,
    pub input_sha256: BTreeMap<String, String>,
    pub output_sha256: BTreeMap<String, String>,
}

struct RunContext<'a> {
    cfg: &'a RunConfig,
    command: &'a str,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl<'a> RunContext<'a> {
    fn start(cfg: &'a RunConfig, command: &'a str, config_file: Option<&Path>) -> Result<Self, CliError> {
        std::fs::create_dir_all(&cfg.output_dir)?;
        let mut inputs = BTreeMap::new();
        let mut hash_input = |path: Option<&Path>| -> Result<(), CliError> {
            if let Some(p) = path {
                inputs.insert(p.display().to_string(), sha256_file(p)?);
            }
            Ok(())
        };
        hash_input(Some(&cfg.benchmark_path))?;
        hash_input(cfg.gold_labels_path.as_deref())?;
        hash_input(cfg.llm_script.as_deref())?;
        hash_input(cfg.nli_script.as_deref())?;
        hash_input(config_file)?;
        Ok(RunContext {
            cfg,
            command,
            started: Instant::now(),
            inputs,
            outputs: BTreeMap::new(),
        })
    }

    fn record_output(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.cfg.output_dir.join(name);
        self.outputs.insert(name.to_string(), sha256_file(&path)?);
        Ok(())
    }

    fn finish(self, judges: Option<&JudgeSet>, unchecked_steps: usize) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.cfg.redacted(),
            judge_calls: judges
                .map(|j| j.counters.snapshot())
                .unwrap_or_default(),
            unchecked_steps,
            wall_clock_ms: self.started.elapsed().as_millis(),
            input_sha256: self.inputs,
            output_sha256: self.outputs,
        };
        let path = self.cfg.output_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

fn load_traces(cfg: &RunConfig) -> Result<Vec<ReasoningTrace>, CliError> {
    let records: Vec<TraceRecord> = read_jsonl(&cfg.benchmark_path)?;
    if records.is_empty() {
        return Err(CliError::MalformedInput(format!(
            "{} contains no trace records",
            cfg.benchmark_path.display()
        )));
    }
    records
        .iter()
        .map(|r| parse_trace(r).map_err(CliError::from))
        .collect()
}

fn load_gold(cfg: &RunConfig) -> Result<BTreeMap<(String, usize), GapType>, CliError> {
    match &cfg.gold_labels_path {
        None => Ok(BTreeMap::new()),
        Some(path) => {
            let labels: Vec<GoldStepLabel> = read_jsonl(path)?;
            Ok(labels
                .into_iter()
                .map(|l| ((l.question_id, l.step_index), l.label))
                .collect())
        }
    }
}

/// One verdict as written to `verdicts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub question_id: String,
    pub step_index: usize,
    pub verdict: GapVerdict,
}

fn verdict_records(traces: &[ReasoningTrace], verdicts: &[Vec<GapVerdict>]) -> Vec<VerdictRecord> {
    traces
        .iter()
        .zip(verdicts)
        .flat_map(|(trace, vs)| {
            vs.iter().enumerate().map(move |(i, v)| VerdictRecord {
                question_id: trace.question_id.clone(),
                step_index: i + 1,
                verdict: v.clone(),
            })
        })
        .collect()
}

fn step_predictions(
    records: &[VerdictRecord],
    gold: &BTreeMap<(String, usize), GapType>,
) -> Vec<StepPrediction> {
    records
        .iter()
        .map(|r| StepPrediction {
            question_id: r.question_id.clone(),
            step_index: r.step_index,
            predicted: r.verdict.gap_type,
            gold: gold
                .get(&(r.question_id.clone(), r.step_index))
                .copied(),
            unchecked: r.verdict.unchecked,
        })
        .collect()
}

fn correctness_map(traces: &[ReasoningTrace]) -> CorrectnessMap {
    traces
        .iter()
        .map(|t| (t.question_id.clone(), t.em_correct))
        .collect()
}

fn count_unchecked(records: &[VerdictRecord]) -> usize {
    records.iter().filter(|r| r.verdict.unchecked).count()
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "n/a".into(),
    }
}

fn cmd_check(cfg: &RunConfig, config_file: Option<&Path>) -> Result<(), CliError> {
    let mut ctx = RunContext::start(cfg, "check", config_file)?;
    let traces = load_traces(cfg)?;
    let gold = load_gold(cfg)?;
    let judges = build_judges(cfg)?;

    let verdicts = parallel_map(&traces, cfg.concurrency_limit, |t| {
        check_trace(t, &cfg.variant, &judges)
    })?;
    let records = verdict_records(&traces, &verdicts);
    write_jsonl(&cfg.output_dir.join(VERDICTS_FILE), &records)?;
    ctx.record_output(VERDICTS_FILE)?;

    let preds = step_predictions(&records, &gold);
    let report = compute_report(&preds, &correctness_map(&traces), &cfg.report)?;
    let json = serde_json::to_string_pretty(&SeededReport {
        seed: cfg.seed,
        report: &report,
    })
    .map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(cfg.output_dir.join(METRICS_JSON_FILE), json + "\n")?;
    std::fs::write(cfg.output_dir.join(METRICS_TEXT_FILE), render_text(&report))?;
    ctx.record_output(METRICS_JSON_FILE)?;
    ctx.record_output(METRICS_TEXT_FILE)?;

    ctx.finish(Some(&judges), count_unchecked(&records))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub run: String,
    pub ablated: Vec<String>,
    pub s_f1: Option<f64>,
    pub delta_f1: Option<f64>,
    /// Steps whose verdict differs from the full run.
    pub flipped_steps: usize,
    pub verdicts_file: String,
}

fn cmd_ablate(
    cfg: &RunConfig,
    stages: &[String],
    config_file: Option<&Path>,
) -> Result<(), CliError> {
    let stages = parse_stages(stages)?;
    if stages.is_empty() {
        return Err(CliError::Config("no stages given to ablate".into()));
    }
    if cfg.gold_labels_path.is_none() {
        return Err(CliError::Config(
            "ablate needs --gold-labels to compute ΔF1".into(),
        ));
    }

    // The full run plus each single removal, plus the joint removal when
    // more than one stage is listed.
    let mut plans: Vec<(String, BTreeSet<Stage>)> = vec![("full".into(), BTreeSet::new())];
    for stage in &stages {
        plans.push((
            format!("minus_{}", stage.to_string().to_lowercase()),
            BTreeSet::from([*stage]),
        ));
    }
    if stages.len() > 1 {
        let tag = stages
            .iter()
            .map(|s| s.to_string().to_lowercase())
            .collect::<Vec<_>>()
            .join("");
        plans.push((format!("minus_{tag}"), stages.clone()));
    }
    for (_, ablations) in &plans {
        let mut variant = cfg.variant.clone();
        variant.stage_ablations = ablations.clone();
        variant
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }

    // All runs share one judge set. HTTP backends additionally get a shared
    // on-disk cache so the ablated runs never re-issue a request the full
    // run already answered.
    let mut cfg = cfg.clone();
    if cfg.judge.cache_dir.is_none()
        && (cfg.llm_script.is_none() || cfg.nli_script.is_none())
    {
        cfg.judge.cache_dir = Some(cfg.output_dir.join("judge_cache"));
    }
    let cfg = &cfg;

    let mut ctx = RunContext::start(cfg, "ablate", config_file)?;
    let traces = load_traces(cfg)?;
    let gold = load_gold(cfg)?;
    let judges = build_judges(cfg)?;

    let mut rows: Vec<AblationRow> = Vec::new();
    let mut full_records: Option<Vec<VerdictRecord>> = None;
    let mut full_f1: Option<f64> = None;
    let mut total_unchecked = 0usize;

    for (run_name, ablations) in plans {
        let mut variant = cfg.variant.clone();
        variant.stage_ablations = ablations.clone();

        let verdicts = parallel_map(&traces, cfg.concurrency_limit, |t| {
            check_trace(t, &variant, &judges)
        })?;
        let records = verdict_records(&traces, &verdicts);
        let file = format!("verdicts_{run_name}.jsonl");
        write_jsonl(&cfg.output_dir.join(&file), &records)?;
        ctx.record_output(&file)?;
        total_unchecked += count_unchecked(&records);

        let preds = step_predictions(&records, &gold);
        let report = compute_report(&preds, &correctness_map(&traces), &cfg.report)?;

        let flipped = match &full_records {
            Some(full) => full
                .iter()
                .zip(&records)
                .filter(|(a, b)| a.verdict.gap_type != b.verdict.gap_type)
                .count(),
            None => 0,
        };
        let delta = match (full_f1, report.s_f1) {
            (Some(base), Some(now)) => Some(now - base),
            _ => None,
        };
        if full_records.is_none() {
            full_records = Some(records);
            full_f1 = report.s_f1;
        }
        rows.push(AblationRow {
            run: run_name,
            ablated: ablations.iter().map(|s| s.to_string()).collect(),
            s_f1: report.s_f1,
            delta_f1: delta,
            flipped_steps: flipped,
            verdicts_file: file,
        });
    }

    let json = serde_json::to_string_pretty(&SeededReport {
        seed: cfg.seed,
        report: &rows,
    })
    .map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(cfg.output_dir.join(ABLATION_JSON_FILE), json + "\n")?;
    let mut text = format!(
        "{:<12} {:<8} {:>9} {:>9} {:>14}\n",
        "run", "ablated", "sF1", "dF1", "flipped steps"
    );
    for row in &rows {
        text.push_str(&format!(
            "{:<12} {:<8} {:>9} {:>9} {:>14}\n",
            row.run,
            if row.ablated.is_empty() {
                "-".into()
            } else {
                row.ablated.join(",")
            },
            fmt_opt(row.s_f1),
            fmt_opt(row.delta_f1),
            row.flipped_steps,
        ));
    }
    std::fs::write(cfg.output_dir.join(ABLATION_TEXT_FILE), text)?;
    ctx.record_output(ABLATION_JSON_FILE)?;
    ctx.record_output(ABLATION_TEXT_FILE)?;
    ctx.finish(Some(&judges), total_unchecked)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub s_f1: Option<f64>,
    pub q_f1: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub gap_rate: f64,
    pub no_gap: f64,
    pub irrelevant_evidence: f64,
    pub contradicted_claim: f64,
    pub missing_bridge: f64,
    /// Gap verdicts suppressed to no-gap at this threshold.
    pub suppressed: usize,
}

fn cmd_sweep(
    cfg: &RunConfig,
    thresholds: &[f64],
    config_file: Option<&Path>,
) -> Result<(), CliError> {
    if thresholds.is_empty() {
        return Err(CliError::Config("no thresholds given".into()));
    }
    for &tau in thresholds {
        if !(0.0..=1.0).contains(&tau) || !tau.is_finite() {
            return Err(CliError::Config(format!(
                "threshold {tau} outside [0, 1]"
            )));
        }
    }

    let mut ctx = RunContext::start(cfg, "sweep", config_file)?;
    let traces = load_traces(cfg)?;
    let gold = load_gold(cfg)?;
    let judges = build_judges(cfg)?;

    let verdicts = parallel_map(&traces, cfg.concurrency_limit, |t| {
        check_trace(t, &cfg.variant, &judges)
    })?;
    let base = verdict_records(&traces, &verdicts);
    let correctness = correctness_map(&traces);

    let mut rows = Vec::with_capacity(thresholds.len());
    for &tau in thresholds {
        let gated: Vec<VerdictRecord> = base
            .iter()
            .map(|r| VerdictRecord {
                question_id: r.question_id.clone(),
                step_index: r.step_index,
                verdict: apply_confidence_gate(r.verdict.clone(), tau),
            })
            .collect();
        let suppressed = base
            .iter()
            .zip(&gated)
            .filter(|(a, b)| a.verdict.gap_type != b.verdict.gap_type)
            .count();
        let preds = step_predictions(&gated, &gold);
        let report = compute_report(&preds, &correctness, &cfg.report)?;
        let d = report.category.distribution;
        rows.push(SweepRow {
            tau,
            s_f1: report.s_f1,
            q_f1: report.q_f1,
            balanced_accuracy: report.balanced_accuracy,
            gap_rate: d.gap_rate(),
            no_gap: d.no_gap,
            irrelevant_evidence: d.irrelevant_evidence,
            contradicted_claim: d.contradicted_claim,
            missing_bridge: d.missing_bridge,
            suppressed,
        });
    }

    let json = serde_json::to_string_pretty(&SeededReport {
        seed: cfg.seed,
        report: &rows,
    })
    .map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(cfg.output_dir.join(SWEEP_JSON_FILE), json + "\n")?;
    let mut tsv = String::from(
        "tau\ts_f1\tq_f1\tbalanced_accuracy\tgap_rate\tno_gap\tie\tcc\tmb\tsuppressed\n",
    );
    for r in &rows {
        tsv.push_str(&format!(
            "{:.2}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\n",
            r.tau,
            fmt_opt(r.s_f1),
            fmt_opt(r.q_f1),
            fmt_opt(r.balanced_accuracy),
            r.gap_rate,
            r.no_gap,
            r.irrelevant_evidence,
            r.contradicted_claim,
            r.missing_bridge,
            r.suppressed,
        ));
    }
    std::fs::write(cfg.output_dir.join(SWEEP_TSV_FILE), tsv)?;
    ctx.record_output(SWEEP_JSON_FILE)?;
    ctx.record_output(SWEEP_TSV_FILE)?;
    ctx.finish(Some(&judges), count_unchecked(&base))
}

fn cmd_reward(
    cfg: &RunConfig,
    group_size: Option<usize>,
    config_file: Option<&Path>,
) -> Result<(), CliError> {
    let mut ctx = RunContext::start(cfg, "reward", config_file)?;
    let traces = load_traces(cfg)?;
    let judges = build_judges(cfg)?;

    let verdicts = parallel_map(&traces, cfg.concurrency_limit, |t| {
        check_trace(t, &cfg.variant, &judges)
    })?;
    let records = verdict_records(&traces, &verdicts);

    let mut breakdowns: Vec<RewardBreakdown> = Vec::with_capacity(traces.len());
    for (trace, vs) in traces.iter().zip(&verdicts) {
        let taus: Vec<GapType> = vs.iter().map(|v| v.gap_type).collect();
        breakdowns.push(trajectory_return(&taus, trace, &cfg.reward)?);
    }
    write_jsonl(&cfg.output_dir.join(REWARDS_FILE), &breakdowns)?;
    ctx.record_output(REWARDS_FILE)?;

    // GRPO groups: maximal runs of consecutive records sharing a question id.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    for i in 1..=traces.len() {
        if i == traces.len() || traces[i].question_id != traces[start].question_id {
            groups.push((start, i));
            start = i;
        }
    }
    if let Some(size) = group_size {
        for &(s, e) in &groups {
            if e - s != size {
                return Err(CliError::MalformedInput(format!(
                    "question {} has {} rollouts, expected the configured group size {}",
                    traces[s].question_id,
                    e - s,
                    size
                )));
            }
        }
    }
    let mut advantages: Vec<TokenAdvantages> = Vec::new();
    for &(s, e) in &groups {
        let group_traces: Vec<&ReasoningTrace> = traces[s..e].iter().collect();
        advantages.extend(assign_dense_advantages(
            &breakdowns[s..e],
            &group_traces,
            &cfg.reward,
        )?);
    }
    write_jsonl(&cfg.output_dir.join(ADVANTAGES_FILE), &advantages)?;
    ctx.record_output(ADVANTAGES_FILE)?;

    ctx.finish(Some(&judges), count_unchecked(&records))
}

/// One teacher-labeled step of the distillation pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillRecord {
    pub question_id: String,
    pub step_index: usize,
    pub claim: String,
    pub verdict: GapVerdict,
    pub artifacts: JudgeArtifacts,
}

fn cmd_distill_export(cfg: &RunConfig, config_file: Option<&Path>) -> Result<(), CliError> {
    let mut ctx = RunContext::start(cfg, "distill-export", config_file)?;
    let traces = load_traces(cfg)?;
    let judges = build_judges(cfg)?;

    let per_trace = parallel_map(&traces, cfg.concurrency_limit, |t| {
        check_trace_full(t, &cfg.variant, &judges)
    })?;
    let mut rows = Vec::new();
    let mut unchecked = 0usize;
    for (trace, steps) in traces.iter().zip(per_trace) {
        for (i, (verdict, artifacts)) in steps.into_iter().enumerate() {
            unchecked += verdict.unchecked as usize;
            rows.push(DistillRecord {
                question_id: trace.question_id.clone(),
                step_index: i + 1,
                claim: trace.steps[i].claim().to_string(),
                verdict,
                artifacts,
            });
        }
    }
    write_jsonl(&cfg.output_dir.join(DISTILL_FILE), &rows)?;
    ctx.record_output(DISTILL_FILE)?;
    ctx.finish(Some(&judges), unchecked)
}

fn cmd_trap(
    cfg: &RunConfig,
    w_strata: &[f64],
    config_file: Option<&Path>,
) -> Result<(), CliError> {
    if w_strata.is_empty() {
        return Err(CliError::Config("no wrong-answer strata given".into()));
    }
    let mut ctx = RunContext::start(cfg, "trap", config_file)?;
    let traces = load_traces(cfg)?;
    let report: TrapReport = trap_experiment(&traces, w_strata, cfg.seed)?;

    let json = serde_json::to_string_pretty(&SeededReport {
        seed: cfg.seed,
        report: &report,
    })
    .map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(cfg.output_dir.join(TRAP_JSON_FILE), json + "\n")?;
    let mut tsv =
        String::from("target_w\tachieved_w\tempirical_qf1\tanalytic_qf1\twithin_tolerance\n");
    for row in &report.rows {
        tsv.push_str(&format!(
            "{:.4}\t{:.4}\t{:.6}\t{:.6}\t{}\n",
            row.target_w, row.achieved_w, row.empirical_qf1, row.analytic_qf1, row.within_tolerance
        ));
    }
    std::fs::write(cfg.output_dir.join(TRAP_TSV_FILE), tsv)?;
    ctx.record_output(TRAP_JSON_FILE)?;
    ctx.record_output(TRAP_TSV_FILE)?;
    ctx.finish(None, 0)
}

/// Execute a parsed invocation.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.global)?;
    let config_file = cli.global.config.as_deref();
    match &cli.command {
        Command::Check => cmd_check(&cfg, config_file),
        Command::Ablate { stages } => cmd_ablate(&cfg, stages, config_file),
        Command::Sweep { thresholds } => cmd_sweep(&cfg, thresholds, config_file),
        Command::Reward { group_size } => cmd_reward(&cfg, *group_size, config_file),
        Command::DistillExport => cmd_distill_export(&cfg, config_file),
        Command::Trap { w_strata } => cmd_trap(&cfg, w_strata, config_file),
    }
}

/// Parse `args` and run; clap errors are reported as config errors.
pub fn try_main<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    execute(cli)
}

/// Binary entry point.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
