//! Constrained extraction with a trained inverse network.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cascade::layout;
use crate::cascade::metrics::rmse_percent;
use crate::error::{Error, Result};
use crate::neural::network::Activation;
use crate::neural::serialize::{model_hash, sha256_hex};
use crate::sampling::normalize::{denormalize, RangeConstraint};
use crate::sampling::registry::{parameter_names, phig_spec, registry};
use crate::stage::Stage;
use crate::surrogate::{scale_curve, CurveVector, Simulator};
use crate::Mlp;

/// Raw-output bounds beyond which a parameter counts as pinned to its window edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaturationThresholds {
    pub low: f64,
    pub high: f64,
}

impl Default for SaturationThresholds {
    fn default() -> Self {
        Self {
            low: 0.005,
            high: 0.995,
        }
    }
}

impl SaturationThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.low && self.low < self.high && self.high < 1.0) {
            return Err(Error::invalid("saturation thresholds need 0 < low < high < 1"));
        }
        Ok(())
    }

    pub fn classify(&self, raw: f64, c: &RangeConstraint, global_span: f64) -> Saturation {
        if c.is_degenerate(global_span) {
            Saturation::None
        } else if raw < self.low {
            Saturation::Low
        } else if raw > self.high {
            Saturation::High
        } else {
            Saturation::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Saturation {
    None,
    Low,
    High,
}

/// Constraint map as exchanged over the wire: name -> `[min, max]`.
pub type ConstraintMap = BTreeMap<String, [f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionRequest {
    pub stage: Stage,
    /// Measured curve in physical units on the canonical grid.
    pub curve: Vec<f64>,
    /// Missing parameters default to their global range.
    #[serde(default)]
    pub constraints: ConstraintMap,
    /// Work function for the Id stage, in eV.
    #[serde(default)]
    pub fixed_phig: Option<f64>,
}

/// Resolves a constraint map to one validated window per parameter.
pub fn resolve_constraints(stage: Stage, map: &ConstraintMap) -> Result<Vec<RangeConstraint>> {
    let specs = registry(stage);
    if let Some(name) = map.keys().find(|k| !specs.iter().any(|s| s.name == k.as_str())) {
        return Err(Error::constraint(
            name.clone(),
            format!("not a {stage}-stage parameter"),
        ));
    }
    specs
        .iter()
        .map(|s| match map.get(s.name) {
            Some(&[lo, hi]) => RangeConstraint::checked(s, lo, hi),
            None => Ok(RangeConstraint::global(s)),
        })
        .collect()
}

pub fn constraint_map(stage: Stage, ranges: &[RangeConstraint]) -> ConstraintMap {
    registry(stage)
        .iter()
        .zip(ranges)
        .map(|(s, c)| (s.name.to_string(), [c.local_min, c.local_max]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub stage: Stage,
    pub parameter_order: Vec<String>,
    /// Physical values keyed by parameter name.
    pub params: BTreeMap<String, f64>,
    /// Raw sigmoid outputs of the inverse network.
    pub normalized_outputs: BTreeMap<String, f64>,
    pub saturation: BTreeMap<String, Saturation>,
    pub constraints: ConstraintMap,
    /// Work function the Id stage ran with.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phig: Option<f64>,
    pub target_curve: Vec<f64>,
    pub reconstructed_curve: Vec<f64>,
    pub rmse_percent: f64,
    pub model_hash: String,
}

impl ExtractionResult {
    /// Parameters in canonical order.
    pub fn param_vec(&self) -> Vec<f64> {
        self.parameter_order.iter().map(|n| self.params[n]).collect()
    }

    pub fn saturated(&self) -> Vec<&str> {
        self.parameter_order
            .iter()
            .filter(|n| self.saturation[*n] != Saturation::None)
            .map(String::as_str)
            .collect()
    }
}

/// A trained inverse network checked against the current registry.
#[derive(Debug, Clone)]
pub struct InverseModel {
    pub stage: Stage,
    pub net: Mlp,
    pub hash: String,
}

impl InverseModel {
    pub fn new(net: Mlp) -> Result<Self> {
        let stage = net
            .meta
            .stage
            .ok_or_else(|| Error::invalid("inverse model metadata lacks a stage"))?;
        if net.meta.parameter_order != parameter_names(stage) {
            return Err(Error::invalid(format!(
                "inverse model parameter order does not match the {stage} registry"
            )));
        }
        if net.input_dim() != layout::inverse_input_len(stage) || net.output_dim() != layout::n_params(stage) {
            return Err(Error::invalid(format!(
                "inverse model dims {:?} do not fit the {stage} layout",
                net.dims()
            )));
        }
        if net.activations().last() != Some(&Activation::Sigmoid) {
            return Err(Error::invalid("inverse model needs a sigmoid output layer"));
        }
        let hash = model_hash(&net)?;
        Ok(Self { stage, net, hash })
    }
}

fn check_phig(stage: Stage, phig: Option<f64>) -> Result<()> {
    match (stage, phig) {
        (Stage::Cgg, Some(_)) => Err(Error::constraint(
            "PHIG",
            "fixed_phig applies to the id stage; constrain PHIG to [x, x] instead",
        )),
        (Stage::Id, None) => Err(Error::constraint("PHIG", "id-stage extraction needs fixed_phig")),
        (Stage::Id, Some(p)) if !phig_spec().contains(p) => Err(Error::constraint(
            "PHIG",
            format!(
                "fixed_phig {p} outside global range [{}, {}]",
                phig_spec().global_min,
                phig_spec().global_max
            ),
        )),
        _ => Ok(()),
    }
}

/// Runs one extraction: scale, infer, denormalize, re-simulate, score.
pub fn extract(
    req: &ExtractionRequest,
    model: &InverseModel,
    simulator: &dyn Simulator,
    thresholds: &SaturationThresholds,
) -> Result<ExtractionResult> {
    check_phig(req.stage, req.fixed_phig)?;
    let ranges = resolve_constraints(req.stage, &req.constraints)?;
    extract_resolved(
        req.stage,
        &req.curve,
        &ranges,
        req.fixed_phig,
        model,
        simulator,
        thresholds,
    )
}

/// Extraction with already-validated windows; PHIG is not range-checked.
pub fn extract_resolved(
    stage: Stage,
    curve: &[f64],
    ranges: &[RangeConstraint],
    phig: Option<f64>,
    model: &InverseModel,
    simulator: &dyn Simulator,
    thresholds: &SaturationThresholds,
) -> Result<ExtractionResult> {
    thresholds.validate()?;
    if model.stage != stage {
        return Err(Error::invalid(format!(
            "loaded inverse model serves {}, not {stage}",
            model.stage
        )));
    }
    if (stage == Stage::Id) != phig.is_some_and(f64::is_finite) {
        return Err(Error::constraint(
            "PHIG",
            "a finite PHIG is required for, and only for, the id stage",
        ));
    }
    let target = CurveVector::new(stage, curve.to_vec())?;
    let scaled = scale_curve(&target, stage)?;
    let input = layout::inverse_input(stage, &scaled, ranges, phig);
    let raw = model.net.predict(&input)?;
    let specs = registry(stage);
    let params = raw
        .iter()
        .zip(ranges)
        .map(|(&r, c)| denormalize(r, c))
        .collect::<Result<Vec<_>>>()?;
    let recon = simulator.simulate(stage, &params, phig)?;
    let rmse = rmse_percent(&recon.values, &target.values, stage)?;
    let names = parameter_names(stage);
    let by_name = |v: &[f64]| names.iter().cloned().zip(v.iter().copied()).collect::<BTreeMap<_, _>>();
    Ok(ExtractionResult {
        stage,
        params: by_name(&params),
        normalized_outputs: by_name(&raw),
        saturation: names
            .iter()
            .cloned()
            .zip(specs.iter().zip(raw.iter().zip(ranges)))
            .map(|(n, (s, (&r, c)))| (n, thresholds.classify(r, c, s.span())))
            .collect(),
        constraints: constraint_map(stage, ranges),
        phig,
        target_curve: target.values,
        reconstructed_curve: recon.values,
        rmse_percent: rmse,
        model_hash: model.hash.clone(),
        parameter_order: names,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStageRequest {
    pub cgg_curve: Vec<f64>,
    pub id_curve: Vec<f64>,
    #[serde(default)]
    pub cgg_constraints: ConstraintMap,
    #[serde(default)]
    pub id_constraints: ConstraintMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub provenance_id: String,
    pub cgg: ExtractionResult,
    pub id: ExtractionResult,
}

/// Test hook: perturbs the PHIG handed from the Cgg to the Id stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HandoffHook {
    pub phig_offset: f64,
}

/// Cgg extraction, then Id extraction with the extracted PHIG held fixed.
pub fn two_stage_extract(
    req: &TwoStageRequest,
    cgg_model: &InverseModel,
    id_model: &InverseModel,
    simulator: &dyn Simulator,
    thresholds: &SaturationThresholds,
) -> Result<TwoStageResult> {
    two_stage_extract_with(req, cgg_model, id_model, simulator, thresholds, HandoffHook::default())
}

pub fn two_stage_extract_with(
    req: &TwoStageRequest,
    cgg_model: &InverseModel,
    id_model: &InverseModel,
    simulator: &dyn Simulator,
    thresholds: &SaturationThresholds,
    hook: HandoffHook,
) -> Result<TwoStageResult> {
    let cgg_ranges = resolve_constraints(Stage::Cgg, &req.cgg_constraints)?;
    let id_ranges = resolve_constraints(Stage::Id, &req.id_constraints)?;
    let cgg = extract_resolved(
        Stage::Cgg,
        &req.cgg_curve,
        &cgg_ranges,
        None,
        cgg_model,
        simulator,
        thresholds,
    )?;
    let phig = cgg.params["PHIG"] + hook.phig_offset;
    let id = extract_resolved(
        Stage::Id,
        &req.id_curve,
        &id_ranges,
        Some(phig),
        id_model,
        simulator,
        thresholds,
    )?;
    let mut material = serde_json::to_vec(req)?;
    material.extend_from_slice(cgg_model.hash.as_bytes());
    material.extend_from_slice(id_model.hash.as_bytes());
    let provenance_id = sha256_hex(&material)[..16].to_string();
    Ok(TwoStageResult { provenance_id, cgg, id })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::training::{new_inverse, Architecture};
    use crate::stage::Scheme;
    use crate::surrogate::{CggParams, Surrogate};

    fn model(stage: Stage) -> InverseModel {
        let arch = Architecture {
            hidden_layers: 1,
            width: 8,
            init_seed: 1,
        };
        InverseModel::new(new_inverse(stage, Scheme::Custom, &arch).unwrap()).unwrap()
    }

    fn cgg_curve() -> Vec<f64> {
        let p = CggParams::from_slice(&[4.5, 2.5e-11, 1.2e-9, 1.0, 1.0, 5e-11]).unwrap();
        Surrogate::new().simulate_cgg(&p).unwrap().values
    }

    #[test]
    fn zero_span_returns_fixed_value() {
        let mut constraints = ConstraintMap::new();
        constraints.insert("PHIG".into(), [4.7, 4.7]);
        let req = ExtractionRequest {
            stage: Stage::Cgg,
            curve: cgg_curve(),
            constraints,
            fixed_phig: None,
        };
        let r = extract(&req, &model(Stage::Cgg), &Surrogate::new(), &Default::default()).unwrap();
        assert_eq!(r.params["PHIG"], 4.7);
        assert_eq!(r.saturation["PHIG"], Saturation::None);
        assert_eq!(
            r.constraints["CFS"],
            [registry(Stage::Cgg)[1].global_min, registry(Stage::Cgg)[1].global_max]
        );
    }

    #[test]
    fn bad_constraints_name_the_parameter() {
        let mut constraints = ConstraintMap::new();
        constraints.insert("PHIG".into(), [4.9, 5.0]);
        let req = ExtractionRequest {
            stage: Stage::Cgg,
            curve: cgg_curve(),
            constraints,
            fixed_phig: None,
        };
        let err = extract(&req, &model(Stage::Cgg), &Surrogate::new(), &Default::default()).unwrap_err();
        assert_eq!(err.parameter(), Some("PHIG"));
        let mut unknown = ConstraintMap::new();
        unknown.insert("U0".into(), [0.01, 0.02]);
        assert_eq!(
            resolve_constraints(Stage::Cgg, &unknown).unwrap_err().parameter(),
            Some("U0")
        );
    }

    #[test]
    fn wrong_length_and_stage_rejected() {
        let m = model(Stage::Cgg);
        let mut req = ExtractionRequest {
            stage: Stage::Cgg,
            curve: cgg_curve()[..14].to_vec(),
            constraints: Default::default(),
            fixed_phig: None,
        };
        assert!(extract(&req, &m, &Surrogate::new(), &Default::default()).is_err());
        req.curve = cgg_curve();
        req.fixed_phig = Some(4.5);
        assert!(extract(&req, &m, &Surrogate::new(), &Default::default()).is_err());
    }

    #[test]
    fn saturation_classification() {
        let t = SaturationThresholds::default();
        let c = RangeConstraint::new(4.7, 4.8);
        assert_eq!(t.classify(0.001, &c, 0.6), Saturation::Low);
        assert_eq!(t.classify(0.999, &c, 0.6), Saturation::High);
        assert_eq!(t.classify(0.5, &c, 0.6), Saturation::None);
        assert_eq!(t.classify(0.001, &RangeConstraint::fixed(4.7), 0.6), Saturation::None);
    }

    #[test]
    fn two_stage_hands_phig_over_bitwise() {
        let sim = Surrogate::new();
        let idp = crate::surrogate::IdParams::from_slice(
            &registry(Stage::Id)
                .iter()
                .map(|s| 0.5 * (s.global_min + s.global_max))
                .collect::<Vec<_>>(),
            4.5,
        )
        .unwrap();
        let req = TwoStageRequest {
            cgg_curve: cgg_curve(),
            id_curve: sim.simulate_id(&idp).unwrap().values,
            cgg_constraints: Default::default(),
            id_constraints: Default::default(),
        };
        let (cm, im) = (model(Stage::Cgg), model(Stage::Id));
        let a = two_stage_extract(&req, &cm, &im, &sim, &Default::default()).unwrap();
        assert_eq!(a.id.phig.unwrap().to_bits(), a.cgg.params["PHIG"].to_bits());
        let b = two_stage_extract(&req, &cm, &im, &sim, &Default::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance_id.len(), 16);
        let json = serde_json::to_value(&a).unwrap();
        assert!(json["cgg"]["params"]["PHIG"].is_f64());
    }
}
