//! Forward/inverse network cascade: layouts, training and extraction.

pub mod extract;
pub mod layout;
pub mod metrics;
pub mod models;
pub mod training;

pub use extract::{
    extract, extract_resolved, resolve_constraints, two_stage_extract, two_stage_extract_with, ConstraintMap,
    ExtractionRequest, ExtractionResult, HandoffHook, InverseModel, Saturation, SaturationThresholds, TwoStageRequest,
    TwoStageResult,
};
pub use metrics::{median, rmse_percent};
pub use models::ModelSet;
pub use training::{
    new_forward, new_inverse, train_cascade, train_forward, train_inverse, Architecture, NetConfig,
    ReconstructionObjective, TrainedCascade,
};
