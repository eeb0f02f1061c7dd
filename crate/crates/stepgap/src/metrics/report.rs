//! Assembled metrics report: one record per evaluation run.

use super::{
    answer_gap_crosstab, balanced_accuracy, bootstrap_ci, category_health, cohens_kappa,
    first_gap_distribution, step_prf, typed_f1, unchecked_tally, CategoryHealth, CorrectnessMap,
    CrossTab, FirstGapDistribution, MetricsError, StepPrediction, TypedF1,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub bootstrap_iters: usize,
    pub confidence_level: f64,
    pub seed: u64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            bootstrap_iters: 2000,
            confidence_level: 0.95,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub total: usize,
    pub checked: usize,
    pub unchecked: usize,
    pub gold_labeled: usize,
}

/// Every metric of a run, with undefined values as explicit nulls. The exact
/// serialized field names are pinned by the metrics-report schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub s_p: Option<f64>,
    pub s_r: Option<f64>,
    pub s_f1: Option<f64>,
    pub s_f1_ci: Option<(f64, f64)>,
    pub q_f1: Option<f64>,
    pub q_f1_ci: Option<(f64, f64)>,
    pub balanced_accuracy: Option<f64>,
    pub typed_f1: Option<TypedF1>,
    pub kappa: Option<f64>,
    pub category: CategoryHealth,
    pub first_gap: FirstGapDistribution,
    pub crosstab: CrossTab,
    pub counts: StepCounts,
}

/// Compute the full report.
///
/// Metrics that need gold labels (sP/sR/sF1, typed F1, balanced accuracy, κ)
/// come out null when the predictions carry none; question-level metrics
/// need only the correctness map. Bootstrap seeds derive from
/// `config.seed`: the step resampler uses it directly, the question
/// resampler uses `seed + 1`.
pub fn compute_report(
    preds: &[StepPrediction],
    correctness: &CorrectnessMap,
    config: &ReportConfig,
) -> Result<MetricsReport, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput("no step predictions"));
    }

    let labeled: Vec<StepPrediction> = preds
        .iter()
        .filter(|p| !p.unchecked && p.gold.is_some())
        .cloned()
        .collect();

    let (s_p, s_r, s_f1, s_f1_ci, ba, typed, kappa) = if labeled.is_empty() {
        (None, None, None, None, None, None, None)
    } else {
        let prf = step_prf(preds)?;
        let ci = match bootstrap_ci(
            &labeled,
            |s| step_prf(s).ok().and_then(|p| p.f1()),
            config.bootstrap_iters,
            config.confidence_level,
            config.seed,
        ) {
            Ok(ci) => Some(ci),
            Err(MetricsError::DomainError(_)) => None,
            Err(e) => return Err(e),
        };
        let ba = balanced_accuracy(preds)?.ba;
        let typed = typed_f1(preds)?;
        let pred_labels: Vec<_> = labeled.iter().map(|p| p.predicted).collect();
        let gold_labels: Vec<_> = labeled.iter().map(|p| p.gold.unwrap()).collect();
        let kappa = cohens_kappa(&pred_labels, &gold_labels)?;
        (
            prf.precision(),
            prf.recall(),
            prf.f1(),
            ci,
            ba,
            Some(typed),
            kappa,
        )
    };

    let crosstab = answer_gap_crosstab(preds, correctness)?;
    let q_f1 = crosstab.qf1_percent();

    // Question-level bootstrap over (correct, flagged) outcome pairs.
    let outcomes: Vec<(bool, bool)> = {
        let mut flagged: std::collections::BTreeMap<&str, bool> = Default::default();
        for p in preds.iter().filter(|p| !p.unchecked) {
            *flagged.entry(&p.question_id).or_insert(false) |= p.predicted.is_gap();
        }
        flagged
            .into_iter()
            .filter_map(|(qid, fl)| {
                correctness.get(qid).copied().flatten().map(|c| (c, fl))
            })
            .collect()
    };
    let q_f1_ci = if outcomes.is_empty() {
        None
    } else {
        match bootstrap_ci(
            &outcomes,
            |s| {
                let tp = s.iter().filter(|(c, f)| !*c && *f).count();
                let fp = s.iter().filter(|(c, f)| *c && *f).count();
                let fn_ = s.iter().filter(|(c, f)| !*c && !*f).count();
                let denom = 2 * tp + fp + fn_;
                if denom == 0 {
                    None
                } else {
                    Some(200.0 * tp as f64 / denom as f64)
                }
            },
            config.bootstrap_iters,
            config.confidence_level,
            config.seed.wrapping_add(1),
        ) {
            Ok(ci) => Some(ci),
            Err(MetricsError::DomainError(_)) => None,
            Err(e) => return Err(e),
        }
    };

    Ok(MetricsReport {
        s_p,
        s_r,
        s_f1,
        s_f1_ci,
        q_f1,
        q_f1_ci,
        balanced_accuracy: ba,
        typed_f1: typed,
        kappa,
        category: category_health(preds)?,
        first_gap: first_gap_distribution(preds, correctness)?,
        crosstab,
        counts: StepCounts {
            total: preds.len(),
            checked: preds.len() - unchecked_tally(preds),
            unchecked: unchecked_tally(preds),
            gold_labeled: labeled.len(),
        },
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "n/a".into(),
    }
}

fn fmt_ci(ci: Option<(f64, f64)>) -> String {
    match ci {
        Some((lo, hi)) => format!("[{lo:.2}, {hi:.2}]"),
        None => "[n/a]".into(),
    }
}

fn fmt_frac_pct(f: f64) -> String {
    format!("{:.1}%", 100.0 * f)
}

/// Render the report as an aligned, human-readable table.
pub fn render_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    let c = &report.counts;
    out.push_str(&format!(
        "steps        total {}   checked {}   unchecked {}   gold-labeled {}\n",
        c.total, c.checked, c.unchecked, c.gold_labeled
    ));
    out.push_str(&format!(
        "step-level   sP {}   sR {}   sF1 {}   95% CI {}\n",
        fmt_opt(report.s_p),
        fmt_opt(report.s_r),
        fmt_opt(report.s_f1),
        fmt_ci(report.s_f1_ci),
    ));
    out.push_str(&format!(
        "question     qF1 {}   95% CI {}   BA {}   kappa {}\n",
        fmt_opt(report.q_f1),
        fmt_ci(report.q_f1_ci),
        fmt_opt(report.balanced_accuracy),
        match report.kappa {
            Some(k) => format!("{k:.3}"),
            None => "n/a".into(),
        },
    ));
    match &report.typed_f1 {
        Some(t) => out.push_str(&format!(
            "typed F1     CC {}   IE {}   MB {}   macro {}   micro {}\n",
            fmt_opt(t.contradicted_claim),
            fmt_opt(t.irrelevant_evidence),
            fmt_opt(t.missing_bridge),
            fmt_opt(t.macro_f1),
            fmt_opt(t.micro_f1),
        )),
        None => out.push_str("typed F1     n/a (no gold labels)\n"),
    }
    let d = &report.category.distribution;
    let mut health = if report.category.health_flag {
        if report.category.in_reference_band {
            "ok (IE within 38-41% reference band)".to_string()
        } else {
            "ok".to_string()
        }
    } else {
        "DEGENERATE (IE share above 70% floor)".to_string()
    };
    if report.category.never_fires_warning {
        health.push_str("  [warning: gap rate under 5%, checker barely fires]");
    }
    out.push_str(&format!(
        "categories   no-gap {}   IE {}   CC {}   MB {}   health {}\n",
        fmt_frac_pct(d.no_gap),
        fmt_frac_pct(d.irrelevant_evidence),
        fmt_frac_pct(d.contradicted_claim),
        fmt_frac_pct(d.missing_bridge),
        health,
    ));
    let fg = &report.first_gap;
    out.push_str(&format!(
        "first gap    IE {}   CC {}   MB {}   over {} wrong flagged questions\n",
        fmt_frac_pct(fg.irrelevant_evidence),
        fmt_frac_pct(fg.contradicted_claim),
        fmt_frac_pct(fg.missing_bridge),
        fg.question_count,
    ));
    let t = &report.crosstab;
    out.push_str(&format!(
        "crosstab     TP {}   FN {}   FP {}   TN {}   unknown excluded {}\n",
        t.tp, t.fn_, t.fp, t.tn, t.excluded_unknown
    ));
    out
}
