use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::arima::{arima_fit, ArimaConfig, ArimaFilter, ArimaModel};
use super::lstm::Lstm;
use super::mlp::Mlp;
use super::train::{fit_lstm, fit_mlp, lstm_predict_windows, window_index, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{schema_hash, unshift, Dataset, Scaler, INPUT_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Arima,
    Mlp,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Arima, ModelKind::Mlp, ModelKind::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Arima => "arima",
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arima" => Ok(ModelKind::Arima),
            "mlp" => Ok(ModelKind::Mlp),
            "lstm" => Ok(ModelKind::Lstm),
            _ => Err(Error::invalid("model", format!("unknown model '{s}' (arima, mlp, lstm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Forecaster {
    Arima(ArimaModel),
    Mlp(Mlp),
    Lstm(Lstm),
}

impl Forecaster {
    pub fn kind(&self) -> ModelKind {
        match self {
            Forecaster::Arima(_) => ModelKind::Arima,
            Forecaster::Mlp(_) => ModelKind::Mlp,
            Forecaster::Lstm(_) => ModelKind::Lstm,
        }
    }
}

/// A fitted forecaster with everything needed to apply it to raw rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub forecaster: Forecaster,
    /// fitted on the training rows; ARIMA models carry one too so that every
    /// checkpoint has the same layout
    pub scaler: Scaler,
    pub offset: usize,
    pub interval: f64,
    pub schema_hash: String,
    pub config: TrainConfig,
    pub loss_curve: Vec<f64>,
    pub adam: Option<AdamState>,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.forecaster.kind()
    }

    /// Rows of history needed before the first prediction.
    pub fn window(&self) -> usize {
        match &self.forecaster {
            Forecaster::Lstm(m) => m.window,
            _ => 1,
        }
    }

    pub fn check_schema(&self, hash: &str) -> Result<()> {
        if self.schema_hash != hash {
            return Err(Error::SchemaMismatch {
                expected: self.schema_hash.clone(),
                found: hash.to_string(),
            });
        }
        Ok(())
    }

    /// Clamped predictions of `ds.targets`, `None` while warming up.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<Option<f64>>> {
        if ds.offset != self.offset {
            return Err(Error::invalid(
                "dataset",
                format!("offset {} but the model predicts {} steps ahead", ds.offset, self.offset),
            ));
        }
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        match &self.forecaster {
            Forecaster::Arima(m) => {
                let series = ds.current();
                Ok(m.walk_forward(&series, self.offset)?
                    .into_iter()
                    .map(|p| p.map(clamp))
                    .collect())
            }
            Forecaster::Mlp(m) => {
                let x = self.scaler.apply(ds)?;
                Ok(m.forward(x.inputs.view())?.iter().map(|&v| Some(clamp(v))).collect())
            }
            Forecaster::Lstm(m) => {
                let x = self.scaler.apply(ds)?;
                let idx = window_index(&[&x], m.window);
                let pred = lstm_predict_windows(m, &[&x], &idx)?;
                let mut out = vec![None; ds.len()];
                for ((_, t), p) in idx.into_iter().zip(pred) {
                    out[t] = Some(clamp(p));
                }
                Ok(out)
            }
        }
    }
}

/// Fits a fresh model on raw (unnormalized) training datasets.
pub fn train_model(
    kind: ModelKind,
    train: &[&Dataset],
    cfg: &TrainConfig,
    arima: &ArimaConfig,
) -> Result<TrainedModel> {
    let first = train
        .first()
        .ok_or_else(|| Error::InsufficientData("no training datasets".into()))?;
    if let Some(d) = train.iter().find(|d| d.offset != first.offset) {
        return Err(Error::invalid(
            "training data",
            format!("mixed offsets {} and {}", first.offset, d.offset),
        ));
    }
    let scaler = Scaler::fit(train)?;
    let (forecaster, loss_curve, adam) = match kind {
        ModelKind::Arima => {
            let series: Vec<Vec<f64>> = train.iter().map(|d| unshift(d)).collect();
            let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
            (Forecaster::Arima(arima_fit(&refs, arima)?), vec![], None)
        }
        ModelKind::Mlp | ModelKind::Lstm => {
            let normed: Vec<Dataset> = train.iter().map(|d| scaler.apply(d)).collect::<Result<_>>()?;
            let refs: Vec<&Dataset> = normed.iter().collect();
            if kind == ModelKind::Mlp {
                let t = fit_mlp(&refs, cfg)?;
                (Forecaster::Mlp(t.model), t.loss_curve, Some(t.adam))
            } else {
                let t = fit_lstm(&refs, cfg)?;
                (Forecaster::Lstm(t.model), t.loss_curve, Some(t.adam))
            }
        }
    };
    Ok(TrainedModel {
        forecaster,
        scaler,
        offset: first.offset,
        interval: first.interval,
        schema_hash: schema_hash().to_string(),
        config: cfg.clone(),
        loss_curve,
        adam,
    })
}

/// Streaming predictor for one interface: feed one raw input row per tick.
pub struct OnlinePredictor<'m> {
    model: &'m TrainedModel,
    rows: VecDeque<Vec<f64>>,
    arima: Option<ArimaFilter<'m>>,
}

impl<'m> OnlinePredictor<'m> {
    pub fn new(model: &'m TrainedModel) -> Self {
        let arima = match &model.forecaster {
            Forecaster::Arima(m) => Some(ArimaFilter::new(m)),
            _ => None,
        };
        OnlinePredictor {
            model,
            rows: VecDeque::new(),
            arima,
        }
    }

    /// Predicted utilization `offset` ticks ahead, or `None` while warming up.
    pub fn push(&mut self, raw: &[f64]) -> Result<Option<f64>> {
        if raw.len() != INPUT_WIDTH {
            return Err(Error::Shape(format!("row of {} values, need {INPUT_WIDTH}", raw.len())));
        }
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        if let Some(f) = self.arima.as_mut() {
            f.push(raw[INPUT_WIDTH - 1]);
            return Ok(if f.ready() { Some(clamp(f.forecast(self.model.offset)?)) } else { None });
        }
        self.rows.push_back(self.model.scaler.transform_row(raw));
        if self.rows.len() > self.model.window() {
            self.rows.pop_front();
        }
        match &self.model.forecaster {
            Forecaster::Mlp(m) => {
                let x = Array2::from_shape_vec((1, INPUT_WIDTH), self.rows.back().unwrap().clone())
                    .map_err(|e| Error::Shape(e.to_string()))?;
                Ok(Some(clamp(m.forward(x.view())?[0])))
            }
            Forecaster::Lstm(m) => {
                if self.rows.len() < m.window {
                    return Ok(None);
                }
                let flat: Vec<f64> = self.rows.iter().flatten().copied().collect();
                let x = Array3::from_shape_vec((1, m.window, INPUT_WIDTH), flat)
                    .map_err(|e| Error::Shape(e.to_string()))?;
                Ok(Some(clamp(m.forward(x.view())?[0])))
            }
            Forecaster::Arima(_) => unreachable!(),
        }
    }
}
