//! Curve-fit error in physical units.

use crate::error::{Error, Result};
use crate::stage::Stage;

/// Denominator floor for Cgg points, in farads.
pub const FLOOR_CGG: f64 = 1e-18;
/// Denominator floor for Id points, in amperes.
pub const FLOOR_ID: f64 = 1e-14;

pub fn floor(stage: Stage) -> f64 {
    match stage {
        Stage::Cgg => FLOOR_CGG,
        Stage::Id => FLOOR_ID,
    }
}

/// `100 * sqrt(mean(((y - t) / max(|t|, floor))^2))`.
pub fn rmse_percent(fit: &[f64], target: &[f64], stage: Stage) -> Result<f64> {
    if fit.len() != target.len() {
        return Err(Error::invalid(format!(
            "fit has {} points, target has {}",
            fit.len(),
            target.len()
        )));
    }
    if fit.is_empty() {
        return Err(Error::invalid("empty curves"));
    }
    let fl = floor(stage);
    let ss: f64 = fit
        .iter()
        .zip(target)
        .map(|(y, t)| ((y - t) / t.abs().max(fl)).powi(2))
        .sum();
    Ok(100.0 * (ss / fit.len() as f64).sqrt())
}

/// Median of finite values; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let t: Vec<f64> = (1..=15).map(|i| i as f64 * 1e-16).collect();
        assert_eq!(rmse_percent(&t, &t, Stage::Cgg).unwrap(), 0.0);
        let scaled: Vec<f64> = t.iter().map(|v| v * 1.01).collect();
        assert!((rmse_percent(&scaled, &t, Stage::Cgg).unwrap() - 1.0).abs() < 1e-9);
        let mut one = t.clone();
        one[4] *= 1.1;
        let expected = 100.0 * (0.01f64 / 15.0).sqrt();
        assert!((rmse_percent(&one, &t, Stage::Cgg).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 2.582).abs() < 1e-3);
    }

    #[test]
    fn floor_applies_below_threshold() {
        let t = [1e-20, 1e-20];
        let y = [1e-20 + 1e-19, 1e-20];
        let v = rmse_percent(&y, &t, Stage::Cgg).unwrap();
        assert!((v - 100.0 * (0.01f64 / 2.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(rmse_percent(&[1.0], &[1.0, 2.0], Stage::Id).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
