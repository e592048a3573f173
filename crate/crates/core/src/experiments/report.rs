//! Study output: CSV tables, JSON metadata and a run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::convergence::{ConvergenceRow, ConvergenceSummary};
use crate::experiments::derivatives::DerivativeSweep;
use crate::experiments::multirange::StudyRow;
use crate::sampling::io::fmt_f64;

pub const MANIFEST: &str = "manifest.json";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Column-named string table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let columns = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()).map_err(csv_err))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Self { columns, rows })
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(&["scheme", "n_train", "seed", "validation_mse", "wall_time_s", "error"]);
    for r in rows {
        t.rows.push(vec![
            r.scheme.to_string(),
            r.n_train.to_string(),
            r.seed.to_string(),
            opt(r.validation_mse),
            format!("{:.3}", r.wall_time_s),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

/// Median MSE per scheme and size, for plotting.
pub fn convergence_curve_table(s: &ConvergenceSummary) -> Table {
    let mut t = Table::new(&["scheme", "n_train", "median_validation_mse"]);
    for c in &s.curves {
        for (n, m) in c.n_train.iter().zip(&c.median_mse) {
            t.rows.push(vec![c.scheme.to_string(), n.to_string(), fmt_f64(*m)]);
        }
    }
    t
}

pub fn study_table(rows: &[StudyRow]) -> Table {
    let mut cols = vec!["label".to_string()];
    let first = rows.first();
    let names = |m: Option<&crate::cascade::ConstraintMap>| {
        m.map(|m| m.keys().cloned().collect::<Vec<_>>()).unwrap_or_default()
    };
    let (cgg_names, id_names) = (
        names(first.map(|r| &r.cgg_constraints)),
        names(first.map(|r| &r.id_constraints)),
    );
    for n in cgg_names.iter().chain(&id_names) {
        cols.extend([format!("{n}_min"), format!("{n}_max"), n.clone()]);
    }
    cols.extend(["cgg_rmse_percent", "id_rmse_percent", "saturated", "provenance_id"].map(String::from));
    let mut rows_out = Vec::new();
    let order = |stage| crate::sampling::parameter_names(stage);
    for r in rows {
        let mut row = vec![r.label.clone()];
        for (constraints, params, stage) in [
            (&r.cgg_constraints, &r.cgg_params, crate::Stage::Cgg),
            (&r.id_constraints, &r.id_params, crate::Stage::Id),
        ] {
            let by_name: BTreeMap<String, f64> = order(stage).into_iter().zip(params.iter().copied()).collect();
            for (n, [lo, hi]) in constraints {
                row.extend([fmt_f64(*lo), fmt_f64(*hi), fmt_f64(by_name[n])]);
            }
        }
        row.extend([
            fmt_f64(r.cgg_rmse_percent),
            fmt_f64(r.id_rmse_percent),
            r.saturated.join(";"),
            r.provenance_id.clone(),
        ]);
        rows_out.push(row);
    }
    Table {
        columns: cols,
        rows: rows_out,
    }
}

pub fn derivative_table(sweeps: &[DerivativeSweep]) -> Table {
    let mut t = Table::new(&["kind", "fixed_bias", "bias", "target_derivative", "fit_derivative"]);
    for s in sweeps {
        for r in &s.rows {
            t.rows.push(vec![
                s.kind.clone(),
                fmt_f64(s.fixed_bias),
                fmt_f64(r.bias),
                fmt_f64(r.target_derivative),
                fmt_f64(r.fit_derivative),
            ]);
        }
    }
    t
}

/// Provenance written next to every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMeta {
    pub schema_version: u32,
    pub study: String,
    pub seeds: Vec<u64>,
    /// SHA-256 of the canonical JSON of the study configuration.
    pub config_hash: String,
    /// Git-style blob hashes of the model files used, keyed by file name.
    pub model_hashes: BTreeMap<String, String>,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl ReportMeta {
    pub fn new(study: &str, seeds: Vec<u64>, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            study: study.into(),
            seeds,
            config_hash: config_hash(config)?,
            model_hashes: BTreeMap::new(),
            extra: BTreeMap::new(),
        })
    }
}

pub fn config_hash(config: &impl Serialize) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(config)?)))
}

/// SHA-256 over `"blob <len>\0" ++ bytes`, the object id git assigns a file
/// in a SHA-256 repository.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(git_blob_hash(&fs::read(path)?))
}

/// Files of a run directory with their content hashes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(MANIFEST);
        if !p.exists() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_str(&fs::read_to_string(p)?)?)
    }

    pub fn record(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.files.insert(name.into(), hash_file(&dir.join(name))?);
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Writes `<name>.csv` and `<name>.meta.json` under `dir` and lists both in
/// the manifest.
pub fn emit_report(dir: &Path, name: &str, table: &Table, meta: &ReportMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    let csv_name = format!("{name}.csv");
    let meta_name = format!("{name}.meta.json");
    table.write_csv(&dir.join(&csv_name))?;
    fs::write(dir.join(&meta_name), serde_json::to_string_pretty(meta)? + "\n")?;
    let mut manifest = Manifest::load(dir)?;
    manifest.record(dir, &csv_name)?;
    manifest.record(dir, &meta_name)?;
    manifest.save(dir)
}

/// Writes any serializable value as pretty JSON and lists it in the manifest.
pub fn emit_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    let mut manifest = Manifest::load(dir)?;
    manifest.record(dir, name)?;
    manifest.save(dir)
}
