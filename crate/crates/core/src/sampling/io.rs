//! Dataset persistence: a CSV table plus a JSON metadata sidecar.
//!
//! Columns: the stage's parameters in canonical order, then `PHIG` for the Id
//! stage, then `<NAME>_min,<NAME>_max` per parameter, then `curve_00..` with
//! network-space curve values. Floats are written as shortest round-trip
//! decimals so reading back reproduces every bit.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sampling::dataset::{Dataset, DatasetMeta, TrainingSample, DATASET_FORMAT_VERSION};
use crate::sampling::normalize::RangeConstraint;
use crate::sampling::registry::registry;
use crate::stage::Stage;

/// Sidecar location for a dataset CSV: `data.csv` -> `data.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn header(stage: Stage) -> Vec<String> {
    let specs = registry(stage);
    let mut cols: Vec<String> = specs.iter().map(|s| s.name.to_string()).collect();
    if stage == Stage::Id {
        cols.push("PHIG".into());
    }
    for s in specs {
        cols.push(format!("{}_min", s.name));
        cols.push(format!("{}_max", s.name));
    }
    cols.extend((0..stage.curve_len()).map(|i| format!("curve_{i:02}")));
    cols
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let stage = ds.stage();
    let mut out = csv::Writer::from_path(path).map_err(csv_io)?;
    out.write_record(header(stage)).map_err(csv_io)?;
    let mut row = Vec::new();
    for s in &ds.samples {
        row.clear();
        row.extend(s.params.iter().map(|&v| fmt_f64(v)));
        if let Some(p) = s.phig {
            row.push(fmt_f64(p));
        }
        for c in &s.ranges {
            row.push(fmt_f64(c.local_min));
            row.push(fmt_f64(c.local_max));
        }
        row.extend(s.curve.iter().map(|&v| fmt_f64(v)));
        out.write_record(&row).map_err(csv_io)?;
    }
    out.flush()?;
    let meta = serde_json::to_string_pretty(&ds.meta)?;
    fs::write(sidecar_path(path), meta + "\n")?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let meta_path = sidecar_path(path);
    let meta_text = fs::read_to_string(&meta_path)?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Version {
            found: meta.format_version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let stage = meta.stage;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(csv_io)?;
    let expected_header = header(stage);
    let mut records = reader.records();
    match records.next() {
        Some(Ok(h)) if h.iter().eq(expected_header.iter().map(String::as_str)) => {}
        Some(Ok(_)) => return Err(parse_err(1, format!("header does not match the {stage} column layout"))),
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        None => return Err(parse_err(1, "missing header".into())),
    }

    let n_par = registry(stage).len();
    let has_phig = stage == Stage::Id;
    let width = expected_header.len();
    let mut samples = Vec::with_capacity(meta.n_samples);
    for (row_idx, rec) in records.enumerate() {
        let line = row_idx + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(col, f)| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("column {}: cannot parse {f:?}", expected_header[col])))
            })
            .collect::<Result<Vec<_>>>()?;
        let (params, rest) = vals.split_at(n_par);
        let (phig, rest) = if has_phig {
            (Some(rest[0]), &rest[1..])
        } else {
            (None, rest)
        };
        let (range_vals, curve) = rest.split_at(2 * n_par);
        let ranges = range_vals
            .chunks_exact(2)
            .map(|p| RangeConstraint::new(p[0], p[1]))
            .collect();
        let sample = TrainingSample::new(stage, params.to_vec(), ranges, curve.to_vec(), phig)
            .map_err(|e| parse_err(line, e.to_string()))?;
        samples.push(sample);
    }
    if samples.len() != meta.n_samples {
        return Err(parse_err(
            samples.len() + 2,
            format!("expected {} samples, found {}", meta.n_samples, samples.len()),
        ));
    }
    Ok(Dataset { meta, samples })
}
