//! Metrics, variance diagnostics, 2-D projection and the experiment harnesses.

mod harness;
mod metrics;
mod pca;

pub use harness::{
    adapt_and_evaluate, read_table, run_ablation, run_ablation_runs, run_pipeline, run_sensitivity, source_only, synthetic_benchmark,
    target_train_labels, train_model, upper_bound, write_table, AblationRow, AblationVariant, RunConfig, RunOutcome,
    SensitivityGrid, SweepRow,
};
pub use metrics::{domain_variances, evaluate, Confusion, DomainVariance, EvalReport};
pub use pca::{feature_variance, principal_components, project_2d, Principal};
