//! Floating-normalization parameter extraction with cascaded neural networks.

pub mod cascade;
pub mod error;
pub mod experiments;
pub mod neural;
pub mod sampling;
pub mod scalar;
pub mod stage;
pub mod surrogate;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use stage::{Scheme, Stage};

pub type Mlp = neural::Mlp<f64>;
pub type Mlp32 = neural::Mlp<f32>;
pub type RangeConstraint = sampling::RangeConstraint<f64>;
