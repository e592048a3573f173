//! Surrogate curves against values computed by an independent Python
//! implementation of the same formulas (`tests/data/*_golden.csv`).

use std::path::PathBuf;

use floatnorm::surrogate::{Simulator, Surrogate};
use floatnorm::Stage;

const REL_TOL: f64 = 1e-10;

fn rows(name: &str) -> Vec<Vec<f64>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn assert_close(got: &[f64], want: &[f64], row: usize) {
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        let rel = (g - w).abs() / w.abs();
        assert!(rel < REL_TOL, "row {row} point {i}: {g:e} vs {w:e} (rel {rel:e})");
    }
}

#[test]
fn cgg_matches_reference() {
    let sim = Surrogate::new();
    let data = rows("cgg_golden.csv");
    assert_eq!(data.len(), 25);
    for (k, row) in data.iter().enumerate() {
        let curve = sim.simulate(Stage::Cgg, &row[..6], None).unwrap();
        assert_close(&curve.values, &row[6..], k);
    }
}

#[test]
fn id_matches_reference() {
    let sim = Surrogate::new();
    let data = rows("id_golden.csv");
    assert_eq!(data.len(), 25);
    for (k, row) in data.iter().enumerate() {
        let curve = sim.simulate(Stage::Id, &row[..11], Some(row[11])).unwrap();
        assert_close(&curve.values, &row[12..], k);
    }
}
