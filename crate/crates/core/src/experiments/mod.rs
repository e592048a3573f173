//! Reproducible studies and report emission.

pub mod config;
pub mod convergence;
pub mod derivatives;
pub mod evaluation;
pub mod multirange;
pub mod report;

pub use config::{RunConfig, RUN_CONFIG_VERSION};
pub use convergence::{
    convergence_study, crossing, evaluate_forward, ConvergenceConfig, ConvergenceRow, ConvergenceSummary,
};
pub use derivatives::{central_derivative, derivative_report, DerivativeRow, DerivativeSweep};
pub use evaluation::{fidelity, held_out_devices, saturation_probe, Device, FidelityReport, SaturationReport};
pub use multirange::{default_constraint_sets, multi_range_study, ConstraintSet, StudyRow};
pub use report::{emit_json, emit_report, git_blob_hash, Manifest, ReportMeta, Table};
