//! Input layouts of the forward and inverse networks.
//!
//! Both networks share a conditioning block: every `(local_min, local_max)`
//! pair in canonical order, each bound scaled by its global range, followed
//! for the Id stage by the globally scaled PHIG.
//!
//! | stage | forward input            | out | inverse input          | out |
//! |-------|--------------------------|-----|------------------------|-----|
//! | Cgg   | 6 norm + 12 range        | 15  | 15 curve + 12 range    | 6   |
//! | Id    | 11 norm + 22 range + PHIG| 16  | 16 curve + 22 range + PHIG | 11 |

use crate::sampling::normalize::RangeConstraint;
use crate::sampling::registry::{phig_spec, registry};
use crate::stage::Stage;

pub fn n_params(stage: Stage) -> usize {
    registry(stage).len()
}

pub fn condition_len(stage: Stage) -> usize {
    2 * n_params(stage) + usize::from(stage == Stage::Id)
}

pub fn forward_input_len(stage: Stage) -> usize {
    n_params(stage) + condition_len(stage)
}

pub fn inverse_input_len(stage: Stage) -> usize {
    stage.curve_len() + condition_len(stage)
}

/// Globally scaled work function as fed to the Id networks.
pub fn scale_phig(phig: f64) -> f64 {
    let s = phig_spec();
    (phig - s.global_min) / s.span()
}

/// Range bounds (and PHIG for Id) in network space.
pub fn condition_inputs(stage: Stage, ranges: &[RangeConstraint], phig: Option<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(condition_len(stage));
    for (spec, c) in registry(stage).iter().zip(ranges) {
        out.push((c.local_min - spec.global_min) / spec.span());
        out.push((c.local_max - spec.global_min) / spec.span());
    }
    if stage == Stage::Id {
        out.push(scale_phig(phig.unwrap_or(f64::NAN)));
    }
    out
}

pub fn forward_input(stage: Stage, normalized: &[f64], ranges: &[RangeConstraint], phig: Option<f64>) -> Vec<f64> {
    let mut v = normalized.to_vec();
    v.extend(condition_inputs(stage, ranges, phig));
    v
}

pub fn inverse_input(stage: Stage, scaled_curve: &[f64], ranges: &[RangeConstraint], phig: Option<f64>) -> Vec<f64> {
    let mut v = scaled_curve.to_vec();
    v.extend(condition_inputs(stage, ranges, phig));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_lengths() {
        assert_eq!(forward_input_len(Stage::Cgg), 18);
        assert_eq!(inverse_input_len(Stage::Cgg), 27);
        assert_eq!(forward_input_len(Stage::Id), 34);
        assert_eq!(inverse_input_len(Stage::Id), 39);
    }

    #[test]
    fn global_ranges_scale_to_unit_pairs() {
        let ranges: Vec<_> = registry(Stage::Cgg).iter().map(RangeConstraint::global).collect();
        let c = condition_inputs(Stage::Cgg, &ranges, None);
        assert!(c.chunks(2).all(|p| p == [0.0, 1.0]));
        assert_eq!(scale_phig(4.5), (4.5 - 4.2) / (4.8 - 4.2));
    }
}
