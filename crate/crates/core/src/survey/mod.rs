//! Survey scoring and paired before/after significance tests.

mod response;
mod study;
mod wilcoxon;

pub use response::{
    csv_columns, participation_levels, read_survey_csv, variable_scores, write_survey_csv,
    LikertSet, RejectedResponse, Rejection, SurveyResponse, SurveyRow, Variable,
};
#[cfg(test)]
pub(crate) use response::sample;
pub use study::{run_study, write_study, StudyReport, VariableOutcome, VariableReport};
pub use wilcoxon::{
    doubled_signed_ranks, wilcoxon_right, wilcoxon_right_with, Method, TestResult, EXACT_MAX_N,
};
