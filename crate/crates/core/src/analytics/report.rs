use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checker::{Checker, NaiveChecker};
use super::gmm::{gmm_fit, Cov, Point};
use super::replay::{replay_with, workflow_points, AnalyticsError, SessionMetrics, WorkflowPoint};
use super::similarity::{pairwise_similarity, Embedder, SimilarityError, TermFrequencyEmbedder};
use crate::session::UiMode;
use crate::study::CorpusEntry;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub sd: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Summary {
            n,
            mean,
            sd,
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub source: String,
    pub participant: Option<u64>,
    pub task_index: Option<usize>,
    pub reply_text: String,
    pub metrics: SessionMetrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLog {
    pub source: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub sessions: usize,
    pub metrics: BTreeMap<String, Summary>,
    pub screen_time_s: BTreeMap<String, Summary>,
    pub salutation_missing_pct: f64,
    pub closing_missing_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CdlrSummary {
    pub tapped_fraction: Summary,
    /// Share of tapped sentences that carried text at finalize.
    pub replied_pct: f64,
    /// Share of replied sentences answered with suggestion text.
    pub replied_with_suggestion_pct: f64,
    /// Accepted suggestions per page, as percentages of all acceptances.
    pub accepted_page_pct: BTreeMap<usize, f64>,
    pub accepted_without_prompt_pct: f64,
    pub accepted_unedited_pct: f64,
    pub manual_entry_pct: f64,
    pub accepted_suggestion_pct: f64,
    pub improve_used_pct: f64,
    pub improvement_accepted_pct: f64,
    /// Per session, among sessions that used the improvement pass.
    pub improve_requests: Summary,
    pub last_improvement_sent_unchanged_pct: f64,
    pub edit_distance_after_improvement: Summary,
    pub skipped_local_response_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MsgSummary {
    pub first_generation_accepted_pct: f64,
    pub prompt_before_first_generation_pct: f64,
    pub sent_unedited_pct: f64,
    pub edit_distance_after_accept: Summary,
    pub generations: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGroup {
    pub email_id: String,
    pub mode: UiMode,
    pub replies: usize,
    pub mean_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSummary {
    pub seed: u64,
    pub weights: Vec<f64>,
    pub means: Vec<Point>,
    pub covariances: Vec<Cov>,
    pub cluster_sizes: Vec<usize>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowReport {
    pub points: Vec<WorkflowPoint>,
    pub omitted: usize,
    pub gmm: Option<GmmSummary>,
    pub gmm_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformitySummary {
    pub coded: usize,
    pub conforming_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub sessions: Vec<SessionEntry>,
    pub skipped: Vec<SkippedLog>,
    pub conditions: BTreeMap<String, ConditionSummary>,
    pub cdlr: CdlrSummary,
    pub msg: MsgSummary,
    pub similarity: Vec<SimilarityGroup>,
    pub workflow: WorkflowReport,
    pub conformity: Option<BTreeMap<String, ConformitySummary>>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Scatter data: one row per workflow point.
    pub fn workflow_csv(&self) -> String {
        let mut out = String::from("norm_time,norm_length,used_improve\n");
        for p in &self.workflow.points {
            out.push_str(&format!(
                "{},{},{}\n",
                p.norm_time, p.norm_length, p.used_improve
            ));
        }
        out
    }
}

pub struct ReportOptions<'a> {
    pub embedder: &'a dyn Embedder,
    pub checker: &'a dyn Checker,
    pub gmm_k: usize,
    pub gmm_seed: u64,
}

impl Default for ReportOptions<'_> {
    fn default() -> Self {
        Self {
            embedder: &TermFrequencyEmbedder,
            checker: &NaiveChecker,
            gmm_k: 3,
            gmm_seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Checker(#[from] super::checker::CheckerError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("conformity file: {0}")]
    Conformity(String),
}

/// Condition labels a session counts towards. CDLR sessions are also split
/// by whether the improvement pass was used.
pub fn conditions_of(m: &SessionMetrics) -> Vec<String> {
    let mut out = vec![m.mode.as_str().to_owned()];
    if m.mode == UiMode::Cdlr {
        out.push(
            if m.used_improve {
                "CDLR_impr"
            } else {
                "CDLR_no_impr"
            }
            .to_owned(),
        );
    }
    out
}

type MetricFn = fn(&SessionMetrics) -> f64;

const METRICS: &[(&str, MetricFn)] = &[
    ("completion_time_s", |m| m.completion_time_s),
    ("writing_speed_cps", |m| m.writing_speed_cps),
    ("keystrokes", |m| m.keystrokes as f64),
    ("reply_length_chars", |m| m.reply_length_chars as f64),
    ("error_rate", |m| m.error_rate),
    ("distinct2", |m| m.distinct2),
];

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

fn condition_summaries(sessions: &[SessionEntry]) -> BTreeMap<String, ConditionSummary> {
    let mut groups: BTreeMap<String, Vec<&SessionMetrics>> = BTreeMap::new();
    for s in sessions {
        for c in conditions_of(&s.metrics) {
            groups.entry(c).or_default().push(&s.metrics);
        }
    }
    groups
        .into_iter()
        .map(|(name, ms)| {
            let metrics = METRICS
                .iter()
                .map(|(key, f)| {
                    let values: Vec<f64> = ms.iter().map(|m| f(m)).collect();
                    (key.to_string(), Summary::of(&values))
                })
                .collect();
            let mut screens: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for m in &ms {
                for (screen, secs) in &m.time_per_screen {
                    screens.entry(screen.clone()).or_default().push(*secs);
                }
            }
            let summary = ConditionSummary {
                sessions: ms.len(),
                metrics,
                screen_time_s: screens
                    .into_iter()
                    .map(|(k, v)| (k, Summary::of(&v)))
                    .collect(),
                salutation_missing_pct: pct(
                    ms.iter().filter(|m| !m.salutation_present).count(),
                    ms.len(),
                ),
                closing_missing_pct: pct(
                    ms.iter().filter(|m| !m.closing_present).count(),
                    ms.len(),
                ),
            };
            (name, summary)
        })
        .collect()
}

fn cdlr_summary(sessions: &[SessionEntry]) -> CdlrSummary {
    let stats: Vec<_> = sessions
        .iter()
        .filter_map(|s| s.metrics.cdlr.as_ref().map(|c| (&s.metrics, c)))
        .collect();
    let n = stats.len();
    let tapped: usize = stats.iter().map(|(_, c)| c.sentences_tapped).sum();
    let replied: usize = stats.iter().map(|(_, c)| c.sentences_replied).sum();
    let with_suggestion: usize = stats.iter().map(|(_, c)| c.replied_with_suggestion).sum();
    let pages: Vec<usize> = stats
        .iter()
        .flat_map(|(_, c)| c.accepted_pages.iter().copied())
        .collect();
    let mut page_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for p in &pages {
        *page_counts.entry(*p).or_default() += 1;
    }
    let improved: Vec<_> = stats
        .iter()
        .filter(|(_, c)| c.improve_requests > 0)
        .collect();
    let accepted_impr: Vec<_> = stats
        .iter()
        .filter_map(|(_, c)| c.last_improvement_sent_unchanged)
        .collect();
    let distances: Vec<f64> = stats
        .iter()
        .filter_map(|(_, c)| c.edit_distance_after_improvement.map(|d| d as f64))
        .collect();
    CdlrSummary {
        tapped_fraction: Summary::of(
            &stats
                .iter()
                .map(|(_, c)| {
                    if c.sentence_count == 0 {
                        0.0
                    } else {
                        c.sentences_tapped as f64 / c.sentence_count as f64
                    }
                })
                .collect::<Vec<_>>(),
        ),
        replied_pct: pct(replied, tapped),
        replied_with_suggestion_pct: pct(with_suggestion, replied),
        accepted_page_pct: page_counts
            .into_iter()
            .map(|(p, c)| (p, pct(c, pages.len())))
            .collect(),
        accepted_without_prompt_pct: pct(
            stats.iter().map(|(_, c)| c.accepted_without_prompt).sum(),
            pages.len(),
        ),
        accepted_unedited_pct: pct(
            stats.iter().map(|(_, c)| c.accepted_unedited).sum(),
            pages.len(),
        ),
        manual_entry_pct: pct(
            stats.iter().filter(|(_, c)| c.manual_text_entered).count(),
            n,
        ),
        accepted_suggestion_pct: pct(
            stats
                .iter()
                .filter(|(_, c)| !c.accepted_pages.is_empty())
                .count(),
            n,
        ),
        improve_used_pct: pct(improved.len(), n),
        improvement_accepted_pct: pct(
            stats
                .iter()
                .filter(|(_, c)| c.improvements_accepted > 0)
                .count(),
            n,
        ),
        improve_requests: Summary::of(
            &improved
                .iter()
                .map(|(_, c)| c.improve_requests as f64)
                .collect::<Vec<_>>(),
        ),
        last_improvement_sent_unchanged_pct: pct(
            accepted_impr.iter().filter(|x| **x).count(),
            accepted_impr.len(),
        ),
        edit_distance_after_improvement: Summary::of(&distances),
        skipped_local_response_pct: pct(
            stats
                .iter()
                .filter(|(m, _)| m.skipped_local_response)
                .count(),
            n,
        ),
    }
}

fn msg_summary(sessions: &[SessionEntry]) -> MsgSummary {
    let stats: Vec<_> = sessions
        .iter()
        .filter_map(|s| s.metrics.msg.as_ref())
        .collect();
    let n = stats.len();
    MsgSummary {
        first_generation_accepted_pct: pct(
            stats.iter().filter(|m| m.first_generation_accepted).count(),
            n,
        ),
        prompt_before_first_generation_pct: pct(
            stats
                .iter()
                .filter(|m| m.prompt_before_first_generation)
                .count(),
            n,
        ),
        sent_unedited_pct: pct(stats.iter().filter(|m| m.sent_unedited).count(), n),
        edit_distance_after_accept: Summary::of(
            &stats
                .iter()
                .filter_map(|m| m.edit_distance_after_accept.map(|d| d as f64))
                .collect::<Vec<_>>(),
        ),
        generations: Summary::of(
            &stats
                .iter()
                .map(|m| m.generations as f64)
                .collect::<Vec<_>>(),
        ),
    }
}

/// Replays every log and aggregates the results. Logs that fail to replay are
/// listed under `skipped`; checker and embedder failures abort.
///
/// `logs` pairs a source name with the log text. Output order follows the
/// source names, so the report does not depend on input order.
pub fn build_report(
    logs: &[(String, String)],
    options: &ReportOptions<'_>,
) -> Result<AnalysisReport, ReportError> {
    let mut sorted: Vec<&(String, String)> = logs.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));

    let mut sessions = Vec::new();
    let mut skipped = Vec::new();
    let mut replies: BTreeMap<(String, UiMode), Vec<String>> = BTreeMap::new();
    for (source, text) in sorted {
        match replay_with(text, options.checker) {
            Ok(r) => {
                replies
                    .entry((r.metrics.email_id.clone(), r.metrics.mode))
                    .or_default()
                    .push(r.state.draft.clone());
                sessions.push(SessionEntry {
                    source: source.clone(),
                    participant: r.header.as_ref().map(|h| h.participant),
                    task_index: r.header.as_ref().map(|h| h.task_index),
                    reply_text: r.state.draft.clone(),
                    metrics: r.metrics,
                });
            }
            Err(AnalyticsError::Checker(e)) => return Err(e.into()),
            Err(e) => skipped.push(SkippedLog {
                source: source.clone(),
                reason: e.to_string(),
            }),
        }
    }

    let mut similarity = Vec::new();
    for ((email_id, mode), texts) in &replies {
        if texts.len() < 2 {
            continue;
        }
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let s = pairwise_similarity(&refs, options.embedder)?;
        similarity.push(SimilarityGroup {
            email_id: email_id.clone(),
            mode: *mode,
            replies: texts.len(),
            mean_similarity: s.mean,
        });
    }

    let metrics: Vec<SessionMetrics> = sessions.iter().map(|s| s.metrics.clone()).collect();
    let (points, omitted) = workflow_points(&metrics);
    let coords: Vec<Point> = points
        .iter()
        .map(|p| [p.norm_time, p.norm_length])
        .collect();
    let (gmm, gmm_error) = match gmm_fit(&coords, options.gmm_k, options.gmm_seed) {
        Ok(m) => (
            Some(GmmSummary {
                seed: options.gmm_seed,
                cluster_sizes: m.cluster_sizes(),
                final_log_likelihood: m.log_likelihood.last().copied().unwrap_or(f64::NAN),
                weights: m.weights,
                means: m.means,
                covariances: m.covariances,
                assignments: m.assignments,
                iterations: m.iterations,
                converged: m.converged,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };

    Ok(AnalysisReport {
        conditions: condition_summaries(&sessions),
        cdlr: cdlr_summary(&sessions),
        msg: msg_summary(&sessions),
        sessions,
        skipped,
        similarity,
        workflow: WorkflowReport {
            points,
            omitted,
            gmm,
            gmm_error,
        },
        conformity: None,
    })
}

/// Worksheet for manual conformity coding: one row per session with the sent
/// reply next to the briefing's key facts and an empty `conforms` column.
pub fn conformity_worksheet(report: &AnalysisReport, corpus: &[CorpusEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "source",
        "email_id",
        "mode",
        "briefing",
        "key_facts",
        "reply",
        "conforms",
    ])
    .expect("in-memory csv");
    for s in &report.sessions {
        let entry = corpus.iter().find(|e| e.id == s.metrics.email_id);
        w.write_record([
            s.source.as_str(),
            s.metrics.email_id.as_str(),
            s.metrics.mode.as_str(),
            entry.map_or("", |e| e.briefing_text.as_str()),
            &entry.map_or(String::new(), |e| e.key_facts.join("; ")),
            s.reply_text.as_str(),
            "",
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

/// Reads a coded worksheet and attaches per-condition conformity rates.
/// Rows with an empty `conforms` cell are ignored.
pub fn ingest_conformity(report: &mut AnalysisReport, coded_csv: &str) -> Result<(), ReportError> {
    let mut r = csv::Reader::from_reader(coded_csv.as_bytes());
    let headers = r
        .headers()
        .map_err(|e| ReportError::Conformity(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReportError::Conformity(format!("missing column `{name}`")))
    };
    let (src_col, val_col) = (col("source")?, col("conforms")?);
    let by_source: BTreeMap<&str, &SessionMetrics> = report
        .sessions
        .iter()
        .map(|s| (s.source.as_str(), &s.metrics))
        .collect();
    let mut tallies: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| ReportError::Conformity(e.to_string()))?;
        let value = row.get(val_col).unwrap_or("").trim();
        if value.is_empty() {
            continue;
        }
        let conforms = match value {
            "1" | "yes" | "true" => true,
            "0" | "no" | "false" => false,
            other => {
                return Err(ReportError::Conformity(format!(
                    "row {}: unrecognized value `{other}`",
                    i + 2
                )))
            }
        };
        let source = row.get(src_col).unwrap_or("");
        let m = by_source
            .get(source)
            .ok_or_else(|| ReportError::Conformity(format!("unknown source `{source}`")))?;
        for c in conditions_of(m) {
            let t = tallies.entry(c).or_default();
            t.0 += 1;
            t.1 += usize::from(conforms);
        }
    }
    report.conformity = Some(
        tallies
            .into_iter()
            .map(|(c, (n, yes))| {
                (
                    c,
                    ConformitySummary {
                        coded: n,
                        conforming_pct: pct(yes, n),
                    },
                )
            })
            .collect(),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(s.n, 4);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        assert!((s.sd - 4.0824829046386).abs() < 1e-9);
        assert_eq!(Summary::of(&[]), Summary::default());
        assert_eq!(Summary::of(&[7.0]).sd, 0.0);
    }
}
