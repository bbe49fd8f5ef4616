//! Correlation metrics, the Alexander-Govern scale-effect test, violin-plot
//! summaries and generated-weight similarity.

mod ag;
mod correlation;
mod similarity;
mod violin;

pub use ag::{alexander_govern, alexander_govern_samples, chi2_sf, significance_decision, AgResult, GroupedScores};
pub use correlation::{average_ranks, krcc, plcc, srcc};
pub use similarity::{weight_similarity, WeightSimilarity};
pub use violin::{
    quantile, scale_effect, violin_data, GroupSummary, MethodResult, ScaleEffectReport, StatsMode, ViolinData,
};
