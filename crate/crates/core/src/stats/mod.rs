//! Inference engine: mixed model fitting, tests, marginal means, contrasts,
//! correlations, and the distributions behind their p-values.

pub mod correlation;
pub mod distributions;
pub mod frame;
pub mod inference;
pub mod lmm;
pub mod quadrature;
pub mod studentized_range;

use thiserror::Error;

pub use correlation::{correlation_from_r, pearson, CorrelationResult};
pub use distributions::{f_cdf, f_sf, normal_cdf, t_cdf, t_two_sided_p};
pub use frame::{build_frame, AnalysisMode, CellLayout, Factor, ModelFrame, Observation};
pub use inference::{
    anova_table, effect_test, emmeans, emmeans_with, grouped_contrast, pairwise_contrasts,
    pairwise_contrasts_with, satterthwaite_df, wald_f, Adjustment, ContrastResult, DfMethod,
    EmmResult, FTestResult,
};
pub use lmm::{fit_lmm, fit_lmm_fixed_theta, fit_lmm_with, reml_criterion, LmmFit, LmmOptions};
pub use studentized_range::{studentized_range_cdf, studentized_range_quantile, StudentizedRange};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty cell: {0}")]
    EmptyCell(String),
    #[error("design is rank deficient: rank {rank} with {columns} columns and {rows} rows")]
    RankDeficientDesign { rank: usize, columns: usize, rows: usize },
    #[error("REML search did not converge in [{}, {}]; last criteria {last:?}", .bracket.0, .bracket.1)]
    NonConvergence { bracket: (f64, f64), last: Vec<f64> },
    #[error("singular hypothesis: {0}")]
    SingularHypothesis(String),
    #[error("inestimable combination: {0}")]
    InestimableCombination(String),
    #[error("overlapping groups: {0}")]
    OverlappingGroups(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}
