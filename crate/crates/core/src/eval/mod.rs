//! Forecast scoring, leave-one-interface-out evaluation and traces.

mod cv;
mod metrics;
mod trace;

pub use cv::{
    cross_validate, format_table, score_fold, scored_pairs, write_report_csv, FoldResult,
    MetricsReport, REPORT_COLUMNS,
};
pub use metrics::{average, compute_metrics, quantile, variance, Metrics};
pub use trace::{emit_trace, read_trace_csv, render_svg, write_trace_csv, TraceRow};
