//! Image-usage study over HTTP access logs.
//!
//! Successful `GET /thumbnail?...` requests are image views; successful
//! `POST /api/thumbnail` requests are creations by the thumbnail tool. The
//! thumbnail URL carries the dataset and whether a person or the smoke
//! detector made the image, which is enough to compute:
//!
//! * `D`, the whole days between capture and view, per view;
//! * view histograms over `D`, dataset date and view date;
//! * the summary table of images, views and users;
//! * per-IP usage vectors and their Pearson correlation matrix.

mod correlation;
mod access_log;
mod report;
mod stats;
mod views;

pub use correlation::{correlation_matrix, pearson, CorrelationMatrix};
pub use access_log::{parse_log, AccessLogEntry, ParseStats, LOG_TIME_FORMAT};
pub use report::{
    analyze_lines, parse_cidrs, parse_tz, read_log_glob, write_report, AnalysisConfig,
    AnalysisReport, OriginHistograms,
};
pub use stats::{aggregate, summarize, user_vectors, Axis, BucketKey, Histogram, UsageSummary, UserVector};
pub use views::{derive_views, is_excluded, CreationEvent, Derivation, DerivationStats, ImageView};
