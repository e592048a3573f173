//! Analytic FinFET-like C-V / I-V surrogate and the simulator interface.
//!
//! The surrogate stands in for a full compact model. Its closed forms are
//! smooth in every parameter, so finite-difference derivatives exist
//! everywhere except at the final current floor and the drain-bias guard.
//!
//! Capacitance, per gate voltage `Vg`:
//!
//! ```text
//! Vth_c  = PHIG - PHI_REF
//! EOT_q  = EOT + QMFACTOR * T_QM0 * s(QMTCECV * (Vg - Vth_c) / VT)
//! Cgg    = W*CFS + W*CGSL * s(S_OV * (Vth_c - Vg)) + A * EPS_HK / EOT_q * s((Vg - Vth_c) / (N_C * VT))
//! ```
//!
//! Drain current, per `(Vg, Vd)`: see [`id_point`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, softplus, Scalar};
use crate::stage::Stage;

/// Thermal voltage (V).
pub const VT: f64 = 0.02585;
/// High-k permittivity (F/m).
pub const EPS_HK: f64 = 3.453e-11;
/// Fin width (m).
pub const WIDTH: f64 = 1.0e-7;
/// Gate length (m).
pub const LENGTH: f64 = 2.0e-8;
/// Gate area (m²).
pub const AREA: f64 = WIDTH * LENGTH;
/// Reference work function (eV).
pub const PHI_REF: f64 = 4.5;
/// Capacitance turn-on ideality.
pub const N_C: f64 = 1.5;
/// Overlap sigmoid slope (1/V).
pub const S_OV: f64 = 5.0;
/// Quantum-mechanical thickness scale (m).
pub const T_QM0: f64 = 1.0e-11;
/// Inversion oxide capacitance per area (F/m²).
pub const COX_I: f64 = 0.02;
/// Interface/depletion capacitance density for the subthreshold slope (F/m²).
pub const C_DEN: f64 = 0.5;
/// DIBL scale (V).
pub const K_DIBL: f64 = 0.02;
/// Threshold offset of the current model (V).
pub const V_OFF: f64 = 0.3;
/// Capacitance scale for network space (F).
pub const C_REF: f64 = 1e-16;
/// Current floor (A).
pub const I_FLOOR: f64 = 1e-14;

/// Drain biases of the two Id-Vg sweeps, in output order.
pub const ID_VD: [f64; 2] = [0.05, 0.7];

/// Canonical bias points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasGrid {
    /// 15 gate voltages, -0.7 V to 0.7 V step 0.1 V.
    pub cgg_vg: Vec<f64>,
    /// 8 gate voltages, 0 V to 0.7 V step 0.1 V.
    pub id_vg: Vec<f64>,
    /// Drain voltages of the linear and saturation sweeps.
    pub id_vd: [f64; 2],
}

impl BiasGrid {
    pub fn canonical() -> Self {
        Self {
            cgg_vg: (0..15).map(|i| (i as f64 - 7.0) / 10.0).collect(),
            id_vg: (0..8).map(|i| i as f64 / 10.0).collect(),
            id_vd: ID_VD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn uniform(v: &[f64], n: usize, first: f64, name: &str) -> Result<()> {
            if v.len() != n {
                return Err(Error::invalid(format!("{name}: expected {n} points, got {}", v.len())));
            }
            if (v[0] - first).abs() > 1e-12 {
                return Err(Error::invalid(format!("{name}: must start at {first} V")));
            }
            for w in v.windows(2) {
                if ((w[1] - w[0]) - 0.1).abs() > 1e-12 {
                    return Err(Error::invalid(format!("{name}: spacing must be 0.1 V")));
                }
            }
            Ok(())
        }
        uniform(&self.cgg_vg, 15, -0.7, "cgg_vg")?;
        uniform(&self.id_vg, 8, 0.0, "id_vg")?;
        if self.id_vd != ID_VD {
            return Err(Error::invalid("id_vd must be [0.05, 0.7]"));
        }
        Ok(())
    }

    pub fn len(&self, stage: Stage) -> usize {
        match stage {
            Stage::Cgg => self.cgg_vg.len(),
            Stage::Id => self.id_vg.len() * self.id_vd.len(),
        }
    }
}

impl Default for BiasGrid {
    fn default() -> Self {
        Self::canonical()
    }
}

/// Parameters of the capacitance stage, canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct CggParams<T> {
    pub phig: T,
    pub cfs: T,
    pub eot: T,
    pub qmfactor: T,
    pub qmtcecv: T,
    pub cgsl: T,
}

impl<T: Scalar> CggParams<T> {
    pub const LEN: usize = 6;

    pub fn from_slice(v: &[T]) -> Result<Self> {
        match *v {
            [phig, cfs, eot, qmfactor, qmtcecv, cgsl] => Ok(Self {
                phig,
                cfs,
                eot,
                qmfactor,
                qmtcecv,
                cgsl,
            }),
            _ => Err(Error::invalid(format!("expected 6 Cgg parameters, got {}", v.len()))),
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.phig, self.cfs, self.eot, self.qmfactor, self.qmtcecv, self.cgsl]
    }
}

/// Parameters of the current stage plus the work function carried over from
/// the capacitance stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct IdParams<T> {
    pub cit: T,
    pub u0: T,
    pub ua: T,
    pub eu: T,
    pub eta0: T,
    pub cdscd: T,
    pub vsat: T,
    pub ksativ: T,
    pub rdsw: T,
    pub pclm: T,
    pub mexp: T,
    /// Companion value, not extracted by the current stage.
    pub phig: T,
}

impl<T: Scalar> IdParams<T> {
    pub const LEN: usize = 11;

    /// Builds from the 11 canonical current-stage values and PHIG.
    pub fn from_slice(v: &[T], phig: T) -> Result<Self> {
        match *v {
            [cit, u0, ua, eu, eta0, cdscd, vsat, ksativ, rdsw, pclm, mexp] => Ok(Self {
                cit,
                u0,
                ua,
                eu,
                eta0,
                cdscd,
                vsat,
                ksativ,
                rdsw,
                pclm,
                mexp,
                phig,
            }),
            _ => Err(Error::invalid(format!("expected 11 Id parameters, got {}", v.len()))),
        }
    }

    /// The 11 extracted values in canonical order (PHIG excluded).
    pub fn to_vec(&self) -> Vec<T> {
        vec![
            self.cit,
            self.u0,
            self.ua,
            self.eu,
            self.eta0,
            self.cdscd,
            self.vsat,
            self.ksativ,
            self.rdsw,
            self.pclm,
            self.mexp,
        ]
    }
}

/// Gate capacitance at one gate voltage.
pub fn cgg_point<T: Scalar>(p: &CggParams<T>, vg: T) -> T {
    let vt = T::lit(VT);
    let vth = p.phig - T::lit(PHI_REF);
    let eot_q = eot_quantum(p, vg);
    let width = T::lit(WIDTH);
    width * p.cfs
        + width * p.cgsl * sigmoid(T::lit(S_OV) * (vth - vg))
        + T::lit(AREA) * (T::lit(EPS_HK) / eot_q) * sigmoid((vg - vth) / (T::lit(N_C) * vt))
}

/// Quantum-corrected electrical oxide thickness.
pub fn eot_quantum<T: Scalar>(p: &CggParams<T>, vg: T) -> T {
    let vth = p.phig - T::lit(PHI_REF);
    p.eot + p.qmfactor * T::lit(T_QM0) * sigmoid(p.qmtcecv * (vg - vth) / T::lit(VT))
}

/// Drain current at one bias point.
///
/// The saturation blend `Vd / (1 + (Vd/Vdsat)^MEXP)^(1/MEXP)` is evaluated as
/// `Vd / exp(softplus(MEXP * ln(Vd/Vdsat)) / MEXP)`, which cannot overflow.
pub fn id_point<T: Scalar>(p: &IdParams<T>, vg: T, vd: T) -> T {
    let one = T::one();
    let vt = T::lit(VT);
    let vth = p.phig - T::lit(PHI_REF) + T::lit(V_OFF) - T::lit(K_DIBL) * p.eta0 * vd;
    let n = one + (p.cit + p.cdscd * vd) / T::lit(C_DEN);
    let q = n * vt * softplus((vg - vth) / (n * vt));
    let mu_eff = p.u0 / (one + (p.ua * softplus(vg - vth + T::lit(0.3))).powf(p.eu));
    let esat_l = T::lit(2.0) * p.vsat * T::lit(LENGTH) / mu_eff;
    let vdsat = p.ksativ * (q * esat_l) / (q + esat_l) + T::lit(1e-3);
    let blend = softplus(p.mexp * (vd / vdsat).ln()) / p.mexp;
    let vdseff = vd / blend.exp();
    let id0 = T::lit(WIDTH / LENGTH) * mu_eff * T::lit(COX_I) * q * vdseff * (one + p.pclm * (vd - vdseff));
    let rds = p.rdsw * T::lit(1e-6) / T::lit(WIDTH);
    let id = id0 / (one + rds * id0 / vd.max(T::lit(0.05)));
    id.max(T::lit(I_FLOOR))
}

/// A device response on the canonical grid, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveVector {
    pub kind: Stage,
    /// Farads for Cgg, amperes for Id (Vd = 0.05 V block first).
    pub values: Vec<f64>,
}

impl CurveVector {
    pub fn new(kind: Stage, values: Vec<f64>) -> Result<Self> {
        if values.len() != kind.curve_len() {
            return Err(Error::invalid(format!(
                "{kind} curve must have {} points, got {}",
                kind.curve_len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid(format!(
                "{kind} curve point {i} must be finite and positive, got {}",
                values[i]
            )));
        }
        Ok(Self { kind, values })
    }

    /// Rebuilds a curve from its network-space representation.
    pub fn from_scaled(kind: Stage, scaled: &[f64]) -> Result<Self> {
        if scaled.len() != kind.curve_len() {
            return Err(Error::invalid(format!(
                "{kind} curve must have {} points, got {}",
                kind.curve_len(),
                scaled.len()
            )));
        }
        Ok(Self {
            kind,
            values: scaled.iter().map(|&s| unscale_value(kind, s)).collect(),
        })
    }

    pub fn scaled(&self) -> Vec<f64> {
        self.values.iter().map(|&v| scale_value(self.kind, v)).collect()
    }
}

/// Maps one physical value into network space.
pub fn scale_value(kind: Stage, v: f64) -> f64 {
    match kind {
        Stage::Cgg => v / C_REF,
        Stage::Id => (v.max(I_FLOOR).log10() + 14.0) / 12.0,
    }
}

pub fn unscale_value(kind: Stage, s: f64) -> f64 {
    match kind {
        Stage::Cgg => s * C_REF,
        Stage::Id => 10f64.powf(s * 12.0 - 14.0),
    }
}

/// Network-space view of `curve`; fails when the curve is not of `kind`.
pub fn scale_curve(curve: &CurveVector, kind: Stage) -> Result<Vec<f64>> {
    if curve.kind != kind {
        return Err(Error::invalid(format!("expected a {kind} curve, got {}", curve.kind)));
    }
    Ok(curve.scaled())
}

pub fn unscale_curve(kind: Stage, scaled: &[f64]) -> Result<CurveVector> {
    CurveVector::from_scaled(kind, scaled)
}

/// Backend able to produce curves on the canonical grid.
///
/// Implementations must emit 15 Cgg points ordered by increasing Vg, and 16 Id
/// points as the Vd = 0.05 V sweep followed by the Vd = 0.7 V sweep.
pub trait Simulator: Send + Sync {
    fn grid(&self) -> &BiasGrid;
    fn simulate_cgg(&self, p: &CggParams<f64>) -> Result<CurveVector>;
    fn simulate_id(&self, p: &IdParams<f64>) -> Result<CurveVector>;

    /// Dispatches on stage; `params` in canonical order, `phig` used by Id only.
    fn simulate(&self, stage: Stage, params: &[f64], phig: Option<f64>) -> Result<CurveVector> {
        match stage {
            Stage::Cgg => self.simulate_cgg(&CggParams::from_slice(params)?),
            Stage::Id => {
                let phig = phig.ok_or_else(|| Error::invalid("Id simulation requires PHIG"))?;
                self.simulate_id(&IdParams::from_slice(params, phig)?)
            }
        }
    }
}

/// The analytic surrogate on the canonical grid.
#[derive(Debug, Clone, Default)]
pub struct Surrogate {
    grid: BiasGrid,
}

impl Surrogate {
    pub fn new() -> Self {
        Self::default()
    }
}

fn check_finite(names: &[&str], values: &[f64]) -> Result<()> {
    for (name, v) in names.iter().zip(values) {
        if !v.is_finite() {
            return Err(Error::constraint(*name, format!("non-finite value {v}")));
        }
    }
    Ok(())
}

impl Simulator for Surrogate {
    fn grid(&self) -> &BiasGrid {
        &self.grid
    }

    fn simulate_cgg(&self, p: &CggParams<f64>) -> Result<CurveVector> {
        check_finite(&crate::sampling::CGG_NAMES, &p.to_vec())?;
        let mut values = Vec::with_capacity(self.grid.cgg_vg.len());
        for &vg in &self.grid.cgg_vg {
            let eot_q = eot_quantum(p, vg);
            if eot_q <= 0.0 {
                return Err(Error::Domain(format!(
                    "quantum-corrected EOT {eot_q:e} m is not positive at Vg = {vg} V"
                )));
            }
            values.push(cgg_point(p, vg));
        }
        Ok(CurveVector {
            kind: Stage::Cgg,
            values,
        })
    }

    fn simulate_id(&self, p: &IdParams<f64>) -> Result<CurveVector> {
        check_finite(&crate::sampling::ID_NAMES, &p.to_vec())?;
        check_finite(&["PHIG"], &[p.phig])?;
        if p.mexp <= 0.0 {
            return Err(Error::constraint("MEXP", "must be positive"));
        }
        let values = self
            .grid
            .id_vd
            .iter()
            .flat_map(|&vd| self.grid.id_vg.iter().map(move |&vg| id_point(p, vg, vd)))
            .collect();
        Ok(CurveVector {
            kind: Stage::Id,
            values,
        })
    }
}

/// One Id-Vd sweep at fixed gate voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdVdCurve {
    pub vg: f64,
    pub vd: Vec<f64>,
    pub id: Vec<f64>,
}

/// Output characteristics for report plots.
pub fn simulate_id_vd(p: &IdParams<f64>, vg_list: &[f64], vd_grid: &[f64]) -> Result<Vec<IdVdCurve>> {
    check_finite(&crate::sampling::ID_NAMES, &p.to_vec())?;
    if p.mexp <= 0.0 {
        return Err(Error::constraint("MEXP", "must be positive"));
    }
    Ok(vg_list
        .iter()
        .map(|&vg| IdVdCurve {
            vg,
            vd: vd_grid.to_vec(),
            id: vd_grid.iter().map(|&vd| id_point(p, vg, vd)).collect(),
        })
        .collect())
}

/// Drain sweep 0 to 0.7 V in 0.05 V steps.
pub fn default_vd_sweep() -> Vec<f64> {
    (0..=14).map(|i| i as f64 * 0.05).collect()
}
