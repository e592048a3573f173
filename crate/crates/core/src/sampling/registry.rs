//! Global parameter ranges and canonical orderings.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stage::Stage;

/// A compact-model parameter and its global (training) range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterSpec {
    pub name: &'static str,
    pub global_min: f64,
    pub global_max: f64,
    pub units: &'static str,
    pub stage: Stage,
    /// Position in the stage's canonical ordering.
    pub index: usize,
}

impl ParameterSpec {
    pub fn span(&self) -> f64 {
        self.global_max - self.global_min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.global_min && x <= self.global_max
    }
}

const fn spec(
    name: &'static str,
    global_min: f64,
    global_max: f64,
    units: &'static str,
    stage: Stage,
    index: usize,
) -> ParameterSpec {
    ParameterSpec {
        name,
        global_min,
        global_max,
        units,
        stage,
        index,
    }
}

pub const CGG_NAMES: [&str; 6] = ["PHIG", "CFS", "EOT", "QMFACTOR", "QMTCECV", "CGSL"];

pub const ID_NAMES: [&str; 11] = [
    "CIT", "U0", "UA", "EU", "ETA0", "CDSCD", "VSAT", "KSATIV", "RDSW", "PCLM", "MEXP",
];

static CGG_SPECS: [ParameterSpec; 6] = [
    spec("PHIG", 4.2, 4.8, "eV", Stage::Cgg, 0),
    spec("CFS", 5e-11, 5e-10, "F/m", Stage::Cgg, 1),
    spec("EOT", 5e-10, 5e-9, "m", Stage::Cgg, 2),
    spec("QMFACTOR", -10.0, 10.0, "-", Stage::Cgg, 3),
    spec("QMTCECV", 0.01, 2.0, "-", Stage::Cgg, 4),
    spec("CGSL", 5e-11, 5e-10, "F/m", Stage::Cgg, 5),
];

// PCLM lower bound: the published table prints min > max; 1.3e-3 is used.
static ID_SPECS: [ParameterSpec; 11] = [
    spec("CIT", 1e-4, 1e-2, "F/m^2", Stage::Id, 0),
    spec("U0", 5e-3, 5e-2, "m^2/(V*s)", Stage::Id, 1),
    spec("UA", 3e-2, 3.0, "1/V", Stage::Id, 2),
    spec("EU", 1.0, 5.0, "-", Stage::Id, 3),
    spec("ETA0", 6e-2, 6.0, "-", Stage::Id, 4),
    spec("CDSCD", 7e-5, 7e-1, "F/(V*m^2)", Stage::Id, 5),
    spec("VSAT", 50000.0, 150000.0, "m/s", Stage::Id, 6),
    spec("KSATIV", 0.1, 10.0, "-", Stage::Id, 7),
    spec("RDSW", 50.0, 300.0, "ohm*um", Stage::Id, 8),
    spec("PCLM", 1.3e-3, 1.3e-1, "-", Stage::Id, 9),
    spec("MEXP", 2.01, 10.0, "-", Stage::Id, 10),
];

/// Parameters extracted by `stage`, in canonical order.
pub fn registry(stage: Stage) -> &'static [ParameterSpec] {
    match stage {
        Stage::Cgg => &CGG_SPECS,
        Stage::Id => &ID_SPECS,
    }
}

/// The work function, extracted by the Cgg stage and carried into the Id stage.
pub fn phig_spec() -> &'static ParameterSpec {
    &CGG_SPECS[0]
}

pub fn parameter_names(stage: Stage) -> Vec<String> {
    registry(stage).iter().map(|s| s.name.to_string()).collect()
}

/// Looks a parameter up by name across both stages.
pub fn find(name: &str) -> Option<&'static ParameterSpec> {
    CGG_SPECS.iter().chain(ID_SPECS.iter()).find(|s| s.name == name)
}

pub fn find_in(stage: Stage, name: &str) -> Result<&'static ParameterSpec> {
    registry(stage)
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::constraint(name, format!("not a {stage}-stage parameter")))
}

/// Canonical-order values from a name-keyed map, each checked against its
/// global range. Missing, unknown and out-of-range names are reported by name.
pub fn params_from_map(stage: Stage, map: &std::collections::BTreeMap<String, f64>) -> Result<Vec<f64>> {
    let specs = registry(stage);
    if let Some(name) = map.keys().find(|k| !specs.iter().any(|s| s.name == k.as_str())) {
        return Err(Error::constraint(
            name.clone(),
            format!("not a {stage}-stage parameter"),
        ));
    }
    specs
        .iter()
        .map(|s| {
            let v = *map
                .get(s.name)
                .ok_or_else(|| Error::constraint(s.name, "missing value"))?;
            if !s.contains(v) {
                return Err(Error::constraint(
                    s.name,
                    format!("value {v} outside global range [{}, {}]", s.global_min, s.global_max),
                ));
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_from_map_checks_names_and_bounds() {
        let mut m: std::collections::BTreeMap<String, f64> = registry(Stage::Cgg)
            .iter()
            .map(|s| (s.name.to_string(), s.global_min))
            .collect();
        assert_eq!(params_from_map(Stage::Cgg, &m).unwrap()[0], 4.2);
        m.insert("PHIG".into(), 5.0);
        assert_eq!(params_from_map(Stage::Cgg, &m).unwrap_err().parameter(), Some("PHIG"));
        m.remove("PHIG");
        assert_eq!(params_from_map(Stage::Cgg, &m).unwrap_err().parameter(), Some("PHIG"));
        m.insert("PHIG".into(), 4.5);
        m.insert("VSAT".into(), 1e5);
        assert_eq!(params_from_map(Stage::Cgg, &m).unwrap_err().parameter(), Some("VSAT"));
    }

    #[test]
    fn ranges_are_ordered_and_indices_canonical() {
        for stage in Stage::ALL {
            for (i, s) in registry(stage).iter().enumerate() {
                assert!(s.global_min < s.global_max, "{}", s.name);
                assert_eq!(s.index, i);
                assert_eq!(s.stage, stage);
            }
        }
        let cgg: Vec<_> = registry(Stage::Cgg).iter().map(|s| s.name).collect();
        assert_eq!(cgg, CGG_NAMES);
        let id: Vec<_> = registry(Stage::Id).iter().map(|s| s.name).collect();
        assert_eq!(id, ID_NAMES);
    }

    #[test]
    fn table_bounds() {
        let phig = find("PHIG").unwrap();
        assert_eq!((phig.global_min, phig.global_max), (4.2, 4.8));
        let vsat = find("VSAT").unwrap();
        assert_eq!((vsat.global_min, vsat.global_max), (5e4, 1.5e5));
        let mexp = find("MEXP").unwrap();
        assert_eq!(mexp.global_min, 2.01);
        assert!(find("PCLM").unwrap().global_min < find("PCLM").unwrap().global_max);
        assert!(find("QMTCENCV").is_none());
    }

    #[test]
    fn eot_quantum_correction_stays_positive_over_table() {
        let eot = find("EOT").unwrap();
        let qm = find("QMFACTOR").unwrap();
        assert!(eot.global_min + qm.global_min * crate::surrogate::T_QM0 > 0.0);
    }

    #[test]
    fn stage_lookup_rejects_foreign_names() {
        assert!(find_in(Stage::Id, "PHIG").is_err());
        assert_eq!(find_in(Stage::Id, "RDSW").unwrap().index, 8);
    }
}
