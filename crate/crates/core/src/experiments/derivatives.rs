//! Transconductance and output-conductance overlays.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::surrogate::{id_point, IdParams, ID_VD};

/// Canonical gate grid step, in volts.
pub const VG_STEP: f64 = 0.1;
/// Drain sweep step, in volts.
pub const VD_STEP: f64 = 0.05;
/// Dense sweep spacing, in volts.
pub const DENSE_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeRow {
    pub bias: f64,
    pub target_derivative: f64,
    pub fit_derivative: f64,
}

/// One derivative sweep at a fixed companion bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSweep {
    /// `"gm"` (d/dVg) or `"gd"` (d/dVd).
    pub kind: String,
    /// The bias held constant: Vd for gm, Vg for gd.
    pub fixed_bias: f64,
    pub rows: Vec<DerivativeRow>,
}

/// Central difference `(f(x+h) - f(x-h)) / 2h` at each point.
pub fn central_derivative(f: impl Fn(f64) -> f64, xs: &[f64], h: f64) -> Vec<f64> {
    xs.iter().map(|&x| (f(x + h) - f(x - h)) / (2.0 * h)).collect()
}

fn dense(lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / DENSE_STEP).round() as usize;
    (0..=n).map(|i| lo + i as f64 * DENSE_STEP).collect()
}

fn sweep(
    kind: &str,
    fixed_bias: f64,
    xs: &[f64],
    h: f64,
    target: impl Fn(f64) -> f64,
    fit: impl Fn(f64) -> f64,
) -> DerivativeSweep {
    let t = central_derivative(target, xs, h);
    let f = central_derivative(fit, xs, h);
    DerivativeSweep {
        kind: kind.into(),
        fixed_bias,
        rows: xs
            .iter()
            .zip(t.iter().zip(&f))
            .map(|(&bias, (&target_derivative, &fit_derivative))| DerivativeRow {
                bias,
                target_derivative,
                fit_derivative,
            })
            .collect(),
    }
}

/// gm over Vg in [0, 0.7] at both drain biases and gd over Vd in [0, 0.7]
/// at `gd_vg`; steps are half the corresponding grid spacing.
pub fn derivative_report(target: &IdParams<f64>, fit: &IdParams<f64>, gd_vg: &[f64]) -> Result<Vec<DerivativeSweep>> {
    let mut out = Vec::new();
    let vg = dense(0.0, 0.7);
    for vd in ID_VD {
        out.push(sweep(
            "gm",
            vd,
            &vg,
            VG_STEP / 2.0,
            |x| id_point(target, x, vd),
            |x| id_point(fit, x, vd),
        ));
    }
    // Start half a step in so the lower difference point stays at Vd >= 0.
    let vd = dense(VD_STEP / 2.0, 0.7);
    for &g in gd_vg {
        out.push(sweep(
            "gd",
            g,
            &vd,
            VD_STEP / 2.0,
            |x| id_point(target, g, x),
            |x| id_point(fit, g, x),
        ));
    }
    Ok(out)
}
