//! Challenge scoring: MAE, RMSE and Pearson R, database and heart-rate-band
//! strata, submission files and the leaderboard.

mod leaderboard;
mod metrics;
mod report;

pub use leaderboard::{
    competition_ranks, leaderboard, leaderboard_from_reports, render_csv, render_text, Entry,
    RankedRow,
};
pub use metrics::{mae, pearson_r, rmse, Correlation, Metrics};
pub use report::{evaluate, stratify_bands, EvalReport, HrBand, Submission, HIGH_ABOVE, LOW_BELOW};
