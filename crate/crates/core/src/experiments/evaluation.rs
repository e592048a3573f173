//! Held-out surrogate devices and extraction scorecards.

use serde::{Deserialize, Serialize};

use crate::cascade::extract::{
    extract_resolved, two_stage_extract_with, ConstraintMap, HandoffHook, InverseModel, Saturation,
    SaturationThresholds, TwoStageRequest,
};
use crate::cascade::metrics::median;
use crate::error::Result;
use crate::sampling::dataset::{sample_params, sample_rng};
use crate::sampling::normalize::RangeConstraint;
use crate::sampling::registry::registry;
use crate::stage::Stage;
use crate::surrogate::Simulator;

/// One synthetic device with both characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    /// Cgg-stage parameters; PHIG first.
    pub cgg_params: Vec<f64>,
    pub id_params: Vec<f64>,
    pub cgg_curve: Vec<f64>,
    pub id_curve: Vec<f64>,
}

impl Device {
    pub fn phig(&self) -> f64 {
        self.cgg_params[0]
    }
}

/// `n` devices drawn uniformly over the global ranges; `phig` overrides the
/// drawn work function when given.
pub fn held_out_devices(n: usize, seed: u64, phig: Option<f64>, sim: &dyn Simulator) -> Result<Vec<Device>> {
    (0..n)
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let mut cgg_params = sample_params(registry(Stage::Cgg), &mut rng);
            let id_params = sample_params(registry(Stage::Id), &mut rng);
            if let Some(p) = phig {
                cgg_params[0] = p;
            }
            let cgg_curve = sim.simulate(Stage::Cgg, &cgg_params, None)?.values;
            let id_curve = sim.simulate(Stage::Id, &id_params, Some(cgg_params[0]))?.values;
            Ok(Device {
                cgg_params,
                id_params,
                cgg_curve,
                id_curve,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub cgg_rmse: Vec<f64>,
    /// Id stage fed the PHIG extracted from Cgg.
    pub two_stage_id_rmse: Vec<f64>,
    /// Id stage fed the true PHIG; diagnostic only.
    pub true_phig_id_rmse: Vec<f64>,
    /// |extracted - true| PHIG, in eV.
    pub phig_error: Vec<f64>,
}

impl FidelityReport {
    pub fn median_cgg(&self) -> f64 {
        median(&self.cgg_rmse)
    }

    pub fn median_two_stage_id(&self) -> f64 {
        median(&self.two_stage_id_rmse)
    }

    pub fn median_true_phig_id(&self) -> f64 {
        median(&self.true_phig_id_rmse)
    }
}

/// Two-stage extraction of every device under the given constraint maps.
pub fn fidelity(
    devices: &[Device],
    cgg_constraints: &ConstraintMap,
    id_constraints: &ConstraintMap,
    models: (&InverseModel, &InverseModel),
    sim: &dyn Simulator,
    thresholds: &SaturationThresholds,
) -> Result<FidelityReport> {
    let mut r = FidelityReport {
        cgg_rmse: Vec::new(),
        two_stage_id_rmse: Vec::new(),
        true_phig_id_rmse: Vec::new(),
        phig_error: Vec::new(),
    };
    let id_global: Vec<RangeConstraint> = registry(Stage::Id).iter().map(RangeConstraint::global).collect();
    for d in devices {
        let req = TwoStageRequest {
            cgg_curve: d.cgg_curve.clone(),
            id_curve: d.id_curve.clone(),
            cgg_constraints: cgg_constraints.clone(),
            id_constraints: id_constraints.clone(),
        };
        let out = two_stage_extract_with(&req, models.0, models.1, sim, thresholds, HandoffHook::default())?;
        let oracle = extract_resolved(
            Stage::Id,
            &d.id_curve,
            &id_global,
            Some(d.phig()),
            models.1,
            sim,
            thresholds,
        )?;
        r.cgg_rmse.push(out.cgg.rmse_percent);
        r.two_stage_id_rmse.push(out.id.rmse_percent);
        r.true_phig_id_rmse.push(oracle.rmse_percent);
        r.phig_error.push((out.cgg.params["PHIG"] - d.phig()).abs());
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub n: usize,
    /// Extractions whose PHIG output was flagged low.
    pub n_low: usize,
    pub constrained_rmse: Vec<f64>,
    pub unconstrained_rmse: Vec<f64>,
}

impl SaturationReport {
    pub fn rmse_ratio(&self) -> f64 {
        median(&self.constrained_rmse) / median(&self.unconstrained_rmse)
    }
}

/// Cgg extraction of every device with PHIG forced into `window`, against
/// the unconstrained extraction of the same curves.
pub fn saturation_probe(
    devices: &[Device],
    window: [f64; 2],
    model: &InverseModel,
    sim: &dyn Simulator,
    thresholds: &SaturationThresholds,
) -> Result<SaturationReport> {
    let specs = registry(Stage::Cgg);
    let global: Vec<RangeConstraint> = specs.iter().map(RangeConstraint::global).collect();
    let mut narrowed = global.clone();
    narrowed[0] = RangeConstraint::checked(&specs[0], window[0], window[1])?;
    let mut r = SaturationReport {
        n: devices.len(),
        n_low: 0,
        constrained_rmse: Vec::new(),
        unconstrained_rmse: Vec::new(),
    };
    for d in devices {
        let c = extract_resolved(Stage::Cgg, &d.cgg_curve, &narrowed, None, model, sim, thresholds)?;
        let u = extract_resolved(Stage::Cgg, &d.cgg_curve, &global, None, model, sim, thresholds)?;
        if c.saturation["PHIG"] == Saturation::Low {
            r.n_low += 1;
        }
        r.constrained_rmse.push(c.rmse_percent);
        r.unconstrained_rmse.push(u.rmse_percent);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::Surrogate;

    #[test]
    fn devices_are_reproducible_and_in_range() {
        let sim = Surrogate::new();
        let a = held_out_devices(5, 3, None, &sim).unwrap();
        assert_eq!(a, held_out_devices(5, 3, None, &sim).unwrap());
        for d in &a {
            for (s, v) in registry(Stage::Id).iter().zip(&d.id_params) {
                assert!(s.contains(*v));
            }
        }
        let b = held_out_devices(2, 3, Some(4.4), &sim).unwrap();
        assert!(b.iter().all(|d| d.phig() == 4.4));
        assert_eq!(b[0].id_params, a[0].id_params);
    }
}
