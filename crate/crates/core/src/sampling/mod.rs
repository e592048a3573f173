//! Parameter registry, random sampling, normalization and datasets.

pub mod dataset;
pub mod io;
pub mod normalize;
pub mod registry;

pub use dataset::{
    augment_with_ranges, build_dataset, generate_sample, sample_local_range, sample_params, sample_rng, Dataset,
    DatasetMeta, SamplingOptions, TrainingSample,
};
pub use io::{read_dataset, write_dataset};
pub use normalize::{denormalize, denormalize_global, normalize_floating, normalize_global, RangeConstraint};
pub use registry::{find, parameter_names, params_from_map, phig_spec, registry, ParameterSpec, CGG_NAMES, ID_NAMES};
