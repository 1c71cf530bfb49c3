//! Model selection, likelihood-ratio tests, the log-rank test and cut-point
//! classification into short- and long-term survivors.

pub mod classify;
pub mod logrank;
pub mod selection;

pub use crate::estimation::aic;
pub use classify::{
    classify, cut_point, cut_point_with, subpop_treatment_comparison, ClassificationResult,
    CutRule, Stratum, StratumComparison, SubpopComparison,
};
pub use logrank::{log_rank, log_rank_by_arm, LogRankResult};
pub use selection::{comparable, lr_test, lr_test_values, rank_by_aic, rank_models, LrtResult};
