//! Log replay, interaction and email metrics, workflow clustering and the
//! aggregate report.

mod checker;
pub mod gmm;
mod replay;
mod report;
mod similarity;
mod textmetrics;

pub use checker::{error_rate, Checker, CheckerError, Dialect, NaiveChecker};
pub use gmm::{adjusted_rand_index, best_match_accuracy, gmm_fit, GmmError, GmmModel};
pub use replay::{
    replay, replay_log, replay_with, workflow_points, AnalyticsError, CdlrStats, MsgStats,
    Replayed, SessionMetrics, WorkflowPoint,
};
pub use report::{
    build_report, conditions_of, conformity_worksheet, ingest_conformity, AnalysisReport,
    CdlrSummary, ConditionSummary, ConformitySummary, GmmSummary, MsgSummary, ReportError,
    ReportOptions, SessionEntry, SimilarityGroup, SkippedLog, Summary, WorkflowReport,
};
pub use similarity::{
    cosine, pairwise_similarity, Embedder, Similarity, SimilarityError, TermFrequencyEmbedder,
};
pub use textmetrics::{
    distinct2, edit_distance, lexical_words, structure_flags, structure_flags_with, StructureFlags,
    StructureLexicon,
};
