use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{average, compute_metrics, quantile, variance, Metrics};
use crate::error::{Error, Result};
use crate::features::{make_folds, Dataset};
use crate::forecast::{train_model, ArimaConfig, ModelKind, TrainConfig, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub interface: String,
    pub samples: usize,
    /// variance of the validation targets
    pub variance: f64,
    pub metrics: Metrics,
    pub abs_err_median: f64,
    pub abs_err_p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: ModelKind,
    pub folds: Vec<FoldResult>,
    pub average: Metrics,
}

/// Paired `(predicted, actual)` values of rows from `start` on that have a
/// prediction.
pub fn scored_pairs(pred: &[Option<f64>], actual: &[f64], start: usize) -> (Vec<f64>, Vec<f64>) {
    pred.iter()
        .zip(actual)
        .skip(start)
        .filter_map(|(p, &a)| p.map(|p| (p, a)))
        .unzip()
}

/// Scores a trained model on one validation dataset.
pub fn score_fold(
    model: &TrainedModel,
    fold: usize,
    ds: &Dataset,
    start: usize,
) -> Result<FoldResult> {
    let pred = model.predict_dataset(ds)?;
    let (p, a) = scored_pairs(&pred, &ds.targets, start);
    let metrics = compute_metrics(&p, &a)?;
    let abs: Vec<f64> = p.iter().zip(&a).map(|(p, a)| (p - a).abs()).collect();
    Ok(FoldResult {
        fold,
        interface: ds.interface.clone(),
        samples: p.len(),
        variance: variance(&ds.targets),
        metrics,
        abs_err_median: quantile(&abs, 0.5),
        abs_err_p95: quantile(&abs, 0.95),
    })
}

/// Leave-one-interface-out evaluation: fold `i` trains a fresh model with
/// seed `cfg.seed ^ i` on every other interface and scores interface `i`.
///
/// All models are scored from row `cfg.window - 1` on, the first row the
/// LSTM can predict, so the three kinds see the same rows.
pub fn cross_validate(
    kind: ModelKind,
    datasets: &[Dataset],
    cfg: &TrainConfig,
    arima: &ArimaConfig,
) -> Result<MetricsReport> {
    let folds = make_folds(datasets.len())?;
    let start = cfg.window.saturating_sub(1);
    let mut results = Vec::with_capacity(folds.len());
    for f in &folds {
        let annotate = |e: Error| Error::Fold {
            fold: f.index,
            interface: datasets[f.validation].interface.clone(),
            source: Box::new(e),
        };
        let train: Vec<&Dataset> = f.train.iter().map(|&i| &datasets[i]).collect();
        let mut fold_cfg = cfg.clone();
        fold_cfg.seed = cfg.seed ^ f.index as u64;
        let t0 = std::time::Instant::now();
        let model = train_model(kind, &train, &fold_cfg, arima).map_err(annotate)?;
        let r = score_fold(&model, f.index, &datasets[f.validation], start).map_err(annotate)?;
        log::info!(
            "{kind} fold {} ({}): mae {:.5} in {:.1}s",
            f.index,
            r.interface,
            r.metrics.mae,
            t0.elapsed().as_secs_f64()
        );
        results.push(r);
    }
    let per: Vec<Metrics> = results.iter().map(|r| r.metrics).collect();
    Ok(MetricsReport {
        model: kind,
        average: average(&per),
        folds: results,
    })
}

pub const REPORT_COLUMNS: [&str; 9] =
    ["model", "fold", "interface", "bias", "mae", "mse", "rmse", "samples", "variance"];

/// One row per fold and one `avg` row per report.
pub fn write_report_csv<W: Write>(out: W, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for r in reports {
        for f in &r.folds {
            let m = f.metrics;
            w.write_record([
                r.model.to_string(),
                f.fold.to_string(),
                f.interface.clone(),
                m.bias.to_string(),
                m.mae.to_string(),
                m.mse.to_string(),
                m.rmse.to_string(),
                f.samples.to_string(),
                f.variance.to_string(),
            ])?;
        }
        let m = r.average;
        let samples: usize = r.folds.iter().map(|f| f.samples).sum();
        w.write_record([
            r.model.to_string(),
            "avg".into(),
            String::new(),
            m.bias.to_string(),
            m.mae.to_string(),
            m.mse.to_string(),
            m.rmse.to_string(),
            samples.to_string(),
            String::new(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}

/// Text table: per-fold rows then the averaged scores.
pub fn format_table(r: &MetricsReport) -> String {
    let mut s = String::new();
    let name = r.model.name().to_uppercase();
    let _ = writeln!(s, "{name}: averaged k-fold cross-validation scores");
    let _ = writeln!(
        s,
        "  {:<4} {:<10} {:>10} {:>10} {:>10} {:>10} {:>7} {:>9}",
        "fold", "interface", "bias", "MAE", "MSE", "RMSE", "n", "variance"
    );
    for f in &r.folds {
        let m = f.metrics;
        let _ = writeln!(
            s,
            "  {:<4} {:<10} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>7} {:>9.5}",
            f.fold, f.interface, m.bias, m.mae, m.mse, m.rmse, f.samples, f.variance
        );
    }
    let m = r.average;
    let _ = writeln!(
        s,
        "  {:<15} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
        "average", m.bias, m.mae, m.mse, m.rmse
    );
    s
}
