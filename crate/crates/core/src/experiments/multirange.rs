//! Repeated two-stage extraction of one device under several constraint sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::extract::{two_stage_extract, ConstraintMap, InverseModel, SaturationThresholds, TwoStageRequest};
use crate::error::{Error, Result};
use crate::experiments::evaluation::Device;
use crate::sampling::dataset::sample_rng;
use crate::sampling::registry::registry;
use crate::stage::Stage;
use crate::surrogate::Simulator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSet {
    pub label: String,
    #[serde(default)]
    pub cgg: ConstraintMap,
    #[serde(default)]
    pub id: ConstraintMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub label: String,
    pub cgg_constraints: ConstraintMap,
    pub id_constraints: ConstraintMap,
    pub cgg_params: Vec<f64>,
    pub id_params: Vec<f64>,
    pub cgg_rmse_percent: f64,
    pub id_rmse_percent: f64,
    /// Names of saturated parameters across both stages.
    pub saturated: Vec<String>,
    pub provenance_id: String,
}

/// Global row, `n_feasible` random windows around the true values, and one
/// row with PHIG forced into `infeasible_phig`.
pub fn default_constraint_sets(
    device: &Device,
    n_feasible: usize,
    seed: u64,
    infeasible_phig: [f64; 2],
) -> Result<Vec<ConstraintSet>> {
    let phig_spec = &registry(Stage::Cgg)[0];
    if !(infeasible_phig[0] > device.phig() || infeasible_phig[1] < device.phig()) {
        return Err(Error::constraint(
            "PHIG",
            format!("window {infeasible_phig:?} contains the device value {}", device.phig()),
        ));
    }
    let mut sets = vec![ConstraintSet {
        label: "PS1".into(),
        cgg: ConstraintMap::new(),
        id: ConstraintMap::new(),
    }];
    for k in 0..n_feasible {
        let mut rng = sample_rng(seed, k as u64);
        let mut around = |stage: Stage, truth: &[f64]| -> ConstraintMap {
            registry(stage)
                .iter()
                .zip(truth)
                .map(|(s, &x)| {
                    // Window covering a random quarter-to-half of the global span.
                    let width = s.span() * rng.random_range(0.25..0.5);
                    let lo = (x - width * rng.random_range(0.0..1.0)).max(s.global_min);
                    let hi = (lo + width).min(s.global_max).max(x);
                    (s.name.to_string(), [lo, hi])
                })
                .collect()
        };
        let cgg = around(Stage::Cgg, &device.cgg_params);
        let id = around(Stage::Id, &device.id_params);
        sets.push(ConstraintSet {
            label: format!("PS{}", k + 2),
            cgg,
            id,
        });
    }
    let mut cgg = ConstraintMap::new();
    cgg.insert(phig_spec.name.to_string(), infeasible_phig);
    sets.push(ConstraintSet {
        label: format!("PS{}", n_feasible + 2),
        cgg,
        id: ConstraintMap::new(),
    });
    Ok(sets)
}

pub fn multi_range_study(
    device: &Device,
    sets: &[ConstraintSet],
    models: (&InverseModel, &InverseModel),
    sim: &dyn Simulator,
    thresholds: &SaturationThresholds,
) -> Result<Vec<StudyRow>> {
    sets.iter()
        .map(|set| {
            let req = TwoStageRequest {
                cgg_curve: device.cgg_curve.clone(),
                id_curve: device.id_curve.clone(),
                cgg_constraints: set.cgg.clone(),
                id_constraints: set.id.clone(),
            };
            let out = two_stage_extract(&req, models.0, models.1, sim, thresholds)?;
            let mut saturated: Vec<String> = out.cgg.saturated().into_iter().map(String::from).collect();
            saturated.extend(out.id.saturated().into_iter().map(String::from));
            Ok(StudyRow {
                label: set.label.clone(),
                cgg_params: out.cgg.param_vec(),
                id_params: out.id.param_vec(),
                cgg_constraints: out.cgg.constraints,
                id_constraints: out.id.constraints,
                cgg_rmse_percent: out.cgg.rmse_percent,
                id_rmse_percent: out.id.rmse_percent,
                saturated,
                provenance_id: out.provenance_id,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::evaluation::held_out_devices;
    use crate::surrogate::Surrogate;

    #[test]
    fn feasible_sets_contain_the_truth() {
        let d = &held_out_devices(1, 9, Some(4.4), &Surrogate::new()).unwrap()[0];
        let sets = default_constraint_sets(d, 5, 2, [4.7, 4.8]).unwrap();
        assert_eq!(sets.len(), 7);
        assert!(sets[0].cgg.is_empty() && sets[0].id.is_empty());
        for set in &sets[1..6] {
            for (s, x) in registry(Stage::Cgg).iter().zip(&d.cgg_params) {
                let [lo, hi] = set.cgg[s.name];
                assert!(s.global_min <= lo && lo <= *x && *x <= hi && hi <= s.global_max);
            }
            for (s, x) in registry(Stage::Id).iter().zip(&d.id_params) {
                let [lo, hi] = set.id[s.name];
                assert!(lo <= *x && *x <= hi);
            }
        }
        assert_eq!(sets[6].cgg["PHIG"], [4.7, 4.8]);
        assert!(default_constraint_sets(d, 1, 2, [4.3, 4.5]).is_err());
    }
}
