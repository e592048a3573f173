//! Dense feed-forward networks: passes, training and persistence.

pub mod gradcheck;
pub mod network;
pub mod optim;
pub mod schedule;
pub mod serialize;
pub mod train;

pub use gradcheck::{check_network, check_objective, gradient_check, GradCheck};
pub use network::{Activation, Dense, ForwardCache, Gradients, Mlp, ModelMeta, ScalingConstants};
pub use optim::{Adam, AdamConfig};
pub use schedule::{PlateauEvent, PlateauSchedule};
pub use serialize::{load_model, model_hash, save_model, LoadedModel, ModelDocument, MODEL_SCHEMA_VERSION};
pub use train::{train, DataSplit, EpochRecord, Objective, Regression, StopReason, TrainConfig, TrainReport};

/// Hidden layers in the default architecture.
pub const DEFAULT_HIDDEN_LAYERS: usize = 3;
/// Units per hidden layer in the default architecture.
pub const DEFAULT_HIDDEN_WIDTH: usize = 300;

/// `[input, width x hidden_layers, output]`.
pub fn layer_dims(input: usize, hidden_layers: usize, width: usize, output: usize) -> Vec<usize> {
    let mut dims = vec![input];
    dims.extend(std::iter::repeat_n(width, hidden_layers));
    dims.push(output);
    dims
}
