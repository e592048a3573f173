//! Fixed (global) and floating (local) min-max normalization.
//!
//! Floating normalization maps a value to `[0, 1]` using a per-instance
//! `[local_min, local_max]` window instead of the global training range. With
//! the window equal to the global range both maps are the same expression and
//! agree bit-for-bit. A zero-width window pins the parameter: normalizing
//! yields the neutral 0.5 and denormalizing yields `local_min` whatever the
//! network emits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::registry::ParameterSpec;
use crate::scalar::Scalar;

/// Relative width (of the global span) below which a window counts as fixed.
pub const DEGENERATE_SPAN: f64 = 1e-12;

/// Per-parameter extraction window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeConstraint<T = f64> {
    pub local_min: T,
    pub local_max: T,
}

impl<T: Scalar> RangeConstraint<T> {
    /// Unchecked constructor; see [`RangeConstraint::checked`] for validation.
    pub fn new(local_min: T, local_max: T) -> Self {
        Self { local_min, local_max }
    }

    pub fn fixed(value: T) -> Self {
        Self::new(value, value)
    }

    pub fn span(&self) -> T {
        self.local_max - self.local_min
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.local_min && x <= self.local_max
    }

    pub fn is_degenerate(&self, global_span: T) -> bool {
        self.span() < T::lit(DEGENERATE_SPAN) * global_span
    }
}

impl RangeConstraint<f64> {
    /// The global window of `spec`.
    pub fn global(spec: &ParameterSpec) -> Self {
        Self::new(spec.global_min, spec.global_max)
    }

    /// Validates `global_min <= local_min <= local_max <= global_max`.
    pub fn checked(spec: &ParameterSpec, local_min: f64, local_max: f64) -> Result<Self> {
        let c = Self::new(local_min, local_max);
        c.validate(spec)?;
        Ok(c)
    }

    pub fn validate(&self, spec: &ParameterSpec) -> Result<()> {
        if !self.local_min.is_finite() || !self.local_max.is_finite() {
            return Err(Error::constraint(spec.name, "range bounds must be finite"));
        }
        if self.local_min > self.local_max {
            return Err(Error::constraint(
                spec.name,
                format!("local min {} exceeds local max {}", self.local_min, self.local_max),
            ));
        }
        if self.local_min < spec.global_min || self.local_max > spec.global_max {
            return Err(Error::constraint(
                spec.name,
                format!(
                    "range [{}, {}] outside global range [{}, {}]",
                    self.local_min, self.local_max, spec.global_min, spec.global_max
                ),
            ));
        }
        Ok(())
    }

    pub fn is_fixed(&self, spec: &ParameterSpec) -> bool {
        self.is_degenerate(spec.span())
    }
}

/// Floating normalization of `x` within `c`.
///
/// `global_span` decides degeneracy: windows narrower than
/// `1e-12 * global_span` normalize to 0.5.
pub fn normalize_floating<T: Scalar>(x: T, c: &RangeConstraint<T>, global_span: T) -> Result<T> {
    if !x.is_finite() || !c.contains(x) {
        return Err(Error::invalid(format!(
            "value {x} outside local range [{}, {}]",
            c.local_min, c.local_max
        )));
    }
    if c.is_degenerate(global_span) {
        return Ok(T::lit(0.5));
    }
    Ok((x - c.local_min) / (c.local_max - c.local_min))
}

/// Maps a normalized value back into `c`.
///
/// The result never leaves `[local_min, local_max]`; a zero-width window
/// returns `local_min` exactly.
pub fn denormalize<T: Scalar>(x_norm: T, c: &RangeConstraint<T>) -> Result<T> {
    if !(x_norm >= T::zero() && x_norm <= T::one()) {
        return Err(Error::invalid(format!("normalized value {x_norm} outside [0, 1]")));
    }
    let x = x_norm * (c.local_max - c.local_min) + c.local_min;
    Ok(x.max(c.local_min).min(c.local_max))
}

/// Global min-max normalization over the registry range of `spec`.
pub fn normalize_global(x: f64, spec: &ParameterSpec) -> Result<f64> {
    if !x.is_finite() || !spec.contains(x) {
        return Err(Error::constraint(
            spec.name,
            format!(
                "value {x} outside global range [{}, {}]",
                spec.global_min, spec.global_max
            ),
        ));
    }
    Ok((x - spec.global_min) / (spec.global_max - spec.global_min))
}

pub fn denormalize_global(x_norm: f64, spec: &ParameterSpec) -> Result<f64> {
    denormalize(x_norm, &RangeConstraint::global(spec))
}
