//! Judge-aware ranking from pairwise comparisons.
//!
//! Extends the Bradley-Terry-Luce model with a per-judge discrimination
//! parameter `gamma_k > 0`: judge `k` prefers candidate `i` over `j` with
//! probability `sigma(gamma_k * (s_i - s_j))`. The crate jointly estimates
//! the latent scores `s` and the judge reliabilities by constrained maximum
//! likelihood, provides Wald confidence intervals from the plug-in
//! asymptotic covariance, and ships a simulation harness for convergence,
//! coverage, and subsampling studies.

pub mod data;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod model;
pub mod simulator;

pub use data::{
    aggregate, canonicalize, check_connectivity, load_records, ComparisonRecord, Dataset,
    RecordFormat, Roster, TripleStats,
};
pub use error::{Error, Result};
pub use estimator::{fit_unweighted, fit_weighted, FitConfig, FitResult, StopReason};
pub use inference::{
    covariance, covariance_unweighted, fisher_information, normal_quantile, rank_agreement,
    wald_ci_component, wald_ci_linear, ConfidenceInterval, CovarianceEstimate, RankAgreement,
};
pub use model::{
    gauge_transform, grad_log_likelihood, log_likelihood, predict_prob, project_to_constraints,
    Design, Params,
};
pub use simulator::{
    gen_truth, run_coverage_study, run_mse_study, run_subsample_study, simulate_comparisons,
    StudyConfig, SubsampleConfig, TruthSpec,
};
