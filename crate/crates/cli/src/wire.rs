//! JSON payloads shared by the CLI and the HTTP service.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use floatnorm::cascade::ConstraintMap;
use floatnorm::sampling::{params_from_map, phig_spec, registry, ParameterSpec};
use floatnorm::surrogate::{scale_curve, Simulator};
use floatnorm::{Error, Result, Stage};

/// Body of every error response and of CLI errors on stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parameter: Option<String>,
}

impl ErrorBody {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            error: message.into(),
            kind: kind.into(),
            parameter: None,
        }
    }
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        Self {
            error: e.to_string(),
            kind: e.kind().into(),
            parameter: e.parameter().map(String::from),
        }
    }
}

/// Parses a stage name; unknown names are their own error class.
pub fn parse_stage(s: &str) -> std::result::Result<Stage, ErrorBody> {
    s.parse()
        .map_err(|_| ErrorBody::new("unknown_stage", format!("unknown stage {s:?}; expected cgg or id")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub stage: String,
    pub params: BTreeMap<String, f64>,
    /// Work function for the Id stage; `params.PHIG` is accepted too.
    #[serde(default)]
    pub phig: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub stage: Stage,
    /// Gate voltage of every curve point.
    pub vg: Vec<f64>,
    /// Drain voltage of every curve point (Id only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vd: Option<Vec<f64>>,
    /// Physical units: F for Cgg, A for Id.
    pub curve: Vec<f64>,
    /// Network-space view.
    pub scaled: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub log10: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phig: Option<f64>,
}

pub fn simulate(sim: &dyn Simulator, stage: Stage, req: &SimulateRequest) -> Result<SimulateResponse> {
    let mut params = req.params.clone();
    let phig = match stage {
        Stage::Cgg => {
            if req.phig.is_some() {
                return Err(Error::Constraint {
                    parameter: "PHIG".into(),
                    message: "for the cgg stage PHIG belongs in params".into(),
                });
            }
            None
        }
        Stage::Id => {
            let from_params = params.remove("PHIG");
            let p = req.phig.or(from_params).ok_or_else(|| Error::Constraint {
                parameter: "PHIG".into(),
                message: "id simulation needs phig".into(),
            })?;
            let s = phig_spec();
            if !s.contains(p) {
                return Err(Error::Constraint {
                    parameter: "PHIG".into(),
                    message: format!("value {p} outside global range [{}, {}]", s.global_min, s.global_max),
                });
            }
            Some(p)
        }
    };
    let values = params_from_map(stage, &params)?;
    let curve = sim.simulate(stage, &values, phig)?;
    let scaled = scale_curve(&curve, stage)?;
    let grid = sim.grid();
    let (vg, vd) = match stage {
        Stage::Cgg => (grid.cgg_vg.clone(), None),
        Stage::Id => {
            let (vg, vd): (Vec<f64>, Vec<f64>) = grid
                .id_vd
                .iter()
                .flat_map(|&vd| grid.id_vg.iter().map(move |&vg| (vg, vd)))
                .unzip();
            (vg, Some(vd))
        }
    };
    let log10 = (stage == Stage::Id).then(|| curve.values.iter().map(|v| v.log10()).collect());
    Ok(SimulateResponse {
        stage,
        vg,
        vd,
        curve: curve.values,
        scaled,
        log10,
        phig,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractBody {
    pub stage: String,
    pub curve: Vec<f64>,
    #[serde(default)]
    pub constraints: ConstraintMap,
    #[serde(default)]
    pub fixed_phig: Option<f64>,
}

/// Registry listing: every stage's parameters in canonical order.
pub fn parameter_list() -> Vec<ParameterSpec> {
    Stage::ALL
        .into_iter()
        .flat_map(|s| registry(s).iter().copied())
        .collect()
}
