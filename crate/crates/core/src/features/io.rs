//! Dataset files and the raw-telemetry → dataset path.
//!
//! `<dir>/<interface>.csv` holds `timestamp`, the 116 inputs (unnormalized)
//! and `future_bitrate`; `<dir>/<interface>.json` is the sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    aggregate_flows, input_columns, join_samples, label_and_shift, schema_hash, Dataset,
    InterfaceSample, JoinReport, Scaler, INPUT_WIDTH, TARGET_COLUMN,
};
use crate::error::{Error, Result};
use crate::telemetry::{list_flow_tables, read_flows, read_interface_meta, read_system, InterfaceMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub interface: String,
    pub rows: usize,
    pub offset: usize,
    pub interval: f64,
    pub schema_hash: String,
    pub columns: Vec<String>,
    pub target: String,
    /// min/max of this interface's own rows; cross-validation refits on the
    /// training folds
    pub scaler: Scaler,
    pub join: JoinReport,
}

fn paths(dir: &Path, interface: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{interface}.csv")), dir.join(format!("{interface}.json")))
}

pub fn write_dataset(dir: &Path, ds: &Dataset, join: JoinReport) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (csv_path, json_path) = paths(dir, &ds.interface);
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(input_columns().iter().cloned());
    header.push(TARGET_COLUMN.into());
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(INPUT_WIDTH + 2);
    for (i, row) in ds.inputs.rows().into_iter().enumerate() {
        rec.clear();
        rec.push(ds.timestamps[i].to_string());
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(ds.targets[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let sidecar = DatasetSidecar {
        interface: ds.interface.clone(),
        rows: ds.len(),
        offset: ds.offset,
        interval: ds.interval,
        schema_hash: schema_hash().to_string(),
        columns: input_columns().to_vec(),
        target: TARGET_COLUMN.into(),
        scaler: Scaler::fit(&[ds])?,
        join,
    };
    fs::write(&json_path, serde_json::to_vec_pretty(&sidecar)?)
        .map_err(|e| Error::io(&json_path, e))?;
    Ok((csv_path, json_path))
}

/// Reads `<interface>.csv` (path given) and its sidecar, checking the schema.
pub fn read_dataset(csv_path: &Path) -> Result<(Dataset, DatasetSidecar)> {
    let json_path = csv_path.with_extension("json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: DatasetSidecar = serde_json::from_str(&text)?;
    if sidecar.schema_hash != schema_hash() {
        return Err(Error::SchemaMismatch {
            expected: schema_hash().to_string(),
            found: sidecar.schema_hash,
        });
    }
    let mut r = csv::Reader::from_path(csv_path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    if header.len() != INPUT_WIDTH + 2 || header[1..=INPUT_WIDTH] != *input_columns() {
        return Err(Error::Parse {
            context: csv_path.display().to_string(),
            message: "header does not match the feature schema".into(),
        });
    }
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut targets = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize| Error::Parse {
            context: format!("{} row {}", csv_path.display(), line + 2),
            message: format!("column {col} is not a number"),
        };
        if rec.len() != INPUT_WIDTH + 2 {
            return Err(Error::Parse {
                context: format!("{} row {}", csv_path.display(), line + 2),
                message: format!("expected {} columns, found {}", INPUT_WIDTH + 2, rec.len()),
            });
        }
        timestamps.push(rec[0].parse::<i64>().map_err(|_| bad(0))?);
        for k in 1..=INPUT_WIDTH {
            values.push(rec[k].parse::<f64>().map_err(|_| bad(k))?);
        }
        targets.push(rec[INPUT_WIDTH + 1].parse::<f64>().map_err(|_| bad(INPUT_WIDTH + 1))?);
    }
    let n = targets.len();
    let inputs = Array2::from_shape_vec((n, INPUT_WIDTH), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok((
        Dataset {
            interface: sidecar.interface.clone(),
            timestamps,
            inputs,
            targets,
            offset: sidecar.offset,
            interval: sidecar.interval,
        },
        sidecar,
    ))
}

/// Reads every `<interface>.csv` dataset in `dir` in file-name order, or only
/// the listed interfaces in the given order.
pub fn read_dataset_dir(dir: &Path, only: &[String]) -> Result<Vec<(Dataset, DatasetSidecar)>> {
    let files: Vec<PathBuf> = if only.is_empty() {
        let mut v: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.with_extension("json").exists())
            .collect();
        v.sort();
        v
    } else {
        only.iter().map(|id| paths(dir, id).0).collect()
    };
    if files.is_empty() {
        return Err(Error::InsufficientData(format!("no datasets in {}", dir.display())));
    }
    files.iter().map(|p| read_dataset(p)).collect()
}

/// Joins one interface's flow tables with its system rows by timestamp.
pub fn build_from_telemetry(
    root: &Path,
    meta: &InterfaceMeta,
) -> Result<(Vec<InterfaceSample>, JoinReport)> {
    let dir = root.join(&meta.id);
    let system = read_system(&dir.join("system.csv"))?;
    let tables = list_flow_tables(&dir)?;
    let mut report = JoinReport::default();
    let mut out = Vec::with_capacity(system.len());
    for (ts, sys) in &system {
        // nearest flow table by timestamp
        let pos = tables.partition_point(|(t, _)| t < ts);
        let nearest = [pos.checked_sub(1), Some(pos)]
            .into_iter()
            .flatten()
            .filter_map(|i| tables.get(i))
            .min_by_key(|(t, _)| (t - ts).abs());
        let (agg, agg_ts) = match nearest {
            Some((t, path)) if (t - ts).abs() <= super::JOIN_TOLERANCE_SECS => {
                (aggregate_flows(&read_flows(path)?), *t)
            }
            Some((t, _)) => ([0.0; super::AGG_WIDTH], *t),
            None => ([0.0; super::AGG_WIDTH], i64::MIN / 2),
        };
        if let Some(s) = join_samples(&agg, agg_ts, sys, *ts, meta.capacity, &mut report) {
            out.push(s);
        }
    }
    Ok((out, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct TelemetryFeaturizeReport {
    pub interface: String,
    pub rows: usize,
    pub join: JoinReport,
    pub csv: PathBuf,
}

/// Builds and writes a dataset for every interface under `root` (or only
/// those listed in `only`).
pub fn featurize_dir(
    root: &Path,
    out: &Path,
    offset: usize,
    interval: f64,
    only: &[String],
) -> Result<Vec<TelemetryFeaturizeReport>> {
    let meta = read_interface_meta(root)?;
    for want in only {
        if !meta.iter().any(|m| &m.id == want) {
            return Err(Error::UnknownInterface(want.clone()));
        }
    }
    let mut reports = Vec::new();
    for m in meta.iter().filter(|m| only.is_empty() || only.contains(&m.id)) {
        let (samples, join) = build_from_telemetry(root, m)?;
        let ds = label_and_shift(&m.id, &samples, offset, interval)?;
        let (csv, _) = write_dataset(out, &ds, join)?;
        log::info!("{}: {} rows ({} dropped at join)", m.id, ds.len(), join.dropped);
        reports.push(TelemetryFeaturizeReport {
            interface: m.id.clone(),
            rows: ds.len(),
            join,
            csv,
        });
    }
    Ok(reports)
}
