//! Evaluation of robot behaviour against the human group: timing
//! appropriateness, its histogram, group synchronization tables and the
//! signed-rank comparison between methods.

mod gsi;
mod histogram;
mod ta;
mod wilcoxon;

pub use gsi::{
    group_key, gsi_table, session_gsi, AnalysisReport, Diagnostic, DiagnosticKind,
    GroupComparison, IterationGsi, SessionGsi, Winner, WinnerCounts, TIE_TOLERANCE,
};
pub use histogram::{bin_of, histogram_of, ta_histogram, Histogram, BIN_COUNT, BIN_WIDTH, RANGE_END};
pub use ta::{timing_appropriateness, TaOutcome, TaSample};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_with, PMethod, WilcoxonResult, EXACT_LIMIT,
    EXACT_MAX,
};
