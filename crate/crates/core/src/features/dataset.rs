use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{InterfaceSample, INPUT_WIDTH};
use crate::error::{Error, Result};

/// Labeled rows of one interface, in timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub interface: String,
    pub timestamps: Vec<i64>,
    /// rows x 116
    pub inputs: Array2<f64>,
    /// `max_bitrate` `offset` samples later, never rescaled
    pub targets: Vec<f64>,
    pub offset: usize,
    /// seconds between rows
    pub interval: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Seconds between a row and its label.
    pub fn horizon_secs(&self) -> f64 {
        self.offset as f64 * self.interval
    }

    /// The `max_bitrate` input column.
    pub fn current(&self) -> Vec<f64> {
        self.inputs.column(INPUT_WIDTH - 1).to_vec()
    }
}

/// Pairs each sample with `max_bitrate` `offset` samples ahead and drops the
/// last `offset` samples.
pub fn label_and_shift(
    interface: &str,
    samples: &[InterfaceSample],
    offset: usize,
    interval: f64,
) -> Result<Dataset> {
    if offset == 0 {
        return Err(Error::invalid("offset", "must be at least 1"));
    }
    if samples.len() <= offset {
        return Err(Error::InsufficientData(format!(
            "interface {interface}: {} samples for offset {offset}",
            samples.len()
        )));
    }
    let n = samples.len() - offset;
    let mut inputs = Array2::zeros((n, INPUT_WIDTH));
    for (mut row, s) in inputs.axis_iter_mut(Axis(0)).zip(samples) {
        for (dst, v) in row.iter_mut().zip(s.inputs()) {
            *dst = v;
        }
    }
    Ok(Dataset {
        interface: interface.to_string(),
        timestamps: samples[..n].iter().map(|s| s.timestamp).collect(),
        inputs,
        targets: samples[offset..].iter().map(|s| s.max_bitrate).collect(),
        offset,
        interval,
    })
}

/// Reconstructs the `max_bitrate` series a dataset was labeled from.
pub fn unshift(ds: &Dataset) -> Vec<f64> {
    let mut v = ds.current();
    let n = v.len();
    v.extend_from_slice(&ds.targets[n.saturating_sub(ds.offset)..]);
    v
}

/// Per-column min-max normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(sets: &[&Dataset]) -> Result<Scaler> {
        let views: Vec<ArrayView2<'_, f64>> = sets.iter().map(|d| d.inputs.view()).collect();
        Self::fit_rows(&views)
    }

    pub fn fit_rows(blocks: &[ArrayView2<'_, f64>]) -> Result<Scaler> {
        let width = blocks.first().map(|b| b.ncols()).unwrap_or(0);
        if blocks.iter().all(|b| b.nrows() == 0) {
            return Err(Error::InsufficientData("scaler fitting set is empty".into()));
        }
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for b in blocks {
            if b.ncols() != width {
                return Err(Error::Shape(format!("scaler: {} vs {width} columns", b.ncols())));
            }
            for row in b.rows() {
                for (k, &v) in row.iter().enumerate() {
                    min[k] = min[k].min(v);
                    max[k] = max[k].max(v);
                }
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    pub fn scale_value(&self, col: usize, v: f64) -> f64 {
        let span = self.max[col] - self.min[col];
        if span > 0.0 {
            (v - self.min[col]) / span
        } else {
            0.0
        }
    }

    /// Normalizes rows in place. Values outside the fitted range are not
    /// clamped.
    pub fn transform_inplace(&self, rows: &mut Array2<f64>) -> Result<()> {
        if rows.ncols() != self.width() {
            return Err(Error::Shape(format!(
                "scaler has {} columns, rows have {}",
                self.width(),
                rows.ncols()
            )));
        }
        for mut row in rows.rows_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = self.scale_value(k, *v);
            }
        }
        Ok(())
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(k, &v)| self.scale_value(k, v)).collect()
    }

    /// A normalized copy of `ds`; targets are left as they are.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut out = ds.clone();
        self.transform_inplace(&mut out.inputs)?;
        Ok(out)
    }
}

/// One leave-one-interface-out split, as indices into the dataset list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub index: usize,
    pub validation: usize,
    pub train: Vec<usize>,
}

pub fn make_folds(k: usize) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid("folds", format!("need at least 2 interfaces, got {k}")));
    }
    Ok((0..k)
        .map(|i| Fold {
            index: i,
            validation: i,
            train: (0..k).filter(|&j| j != i).collect(),
        })
        .collect())
}
