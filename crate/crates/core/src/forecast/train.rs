//! Minibatch training loops for the neural forecasters.

use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::lstm::{Lstm, DEFAULT_WINDOW};
use super::mlp::{Mlp, DEFAULT_SIZES};
use super::params::clip_global_norm;
use crate::error::{Error, Result};
use crate::features::{Dataset, INPUT_WIDTH};
use crate::sim::stream_rng;

const SHUFFLE_STREAM: u64 = 4;

/// Hidden width used at desk scale in place of the full 300.
pub const DESK_LSTM_HIDDEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// LSTM window length in rows
    pub window: usize,
    pub mlp_sizes: Vec<usize>,
    pub lstm_hidden: usize,
    pub lstm_dense: usize,
    /// global gradient norm bound for the LSTM
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 10,
            adam: AdamConfig::default(),
            seed: 0,
            window: DEFAULT_WINDOW,
            mlp_sizes: DEFAULT_SIZES.to_vec(),
            lstm_hidden: 300,
            lstm_dense: 116,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    /// Full-size configuration with the LSTM narrowed to
    /// [`DESK_LSTM_HIDDEN`] units.
    pub fn desk() -> Self {
        TrainConfig {
            lstm_hidden: DESK_LSTM_HIDDEN,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.window == 0 {
            return Err(Error::invalid("train config", "batch size, epochs and window must be >= 1"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::invalid("train config", "learning rate must be positive"));
        }
        if self.mlp_sizes.first() != Some(&INPUT_WIDTH) {
            return Err(Error::invalid("train config", format!("mlp input layer must be {INPUT_WIDTH}")));
        }
        Ok(())
    }
}

/// Training outcome: `loss_curve[0]` is the MSE of the untrained model over
/// the whole training set, entry `e` the mean minibatch MSE of epoch `e`.
#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub loss_curve: Vec<f64>,
    pub adam: AdamState,
}

fn stack_rows(sets: &[&Dataset]) -> Result<(Array2<f64>, Vec<f64>)> {
    let n: usize = sets.iter().map(|d| d.len()).sum();
    if n == 0 {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let views: Vec<_> = sets.iter().map(|d| d.inputs.view()).collect();
    let x = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))?;
    let y = sets.iter().flat_map(|d| d.targets.iter().copied()).collect();
    Ok((x, y))
}

fn check_loss(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("training loss {loss} in epoch {epoch}")))
    }
}

/// Trains an MLP on normalized rows, reshuffled every epoch.
pub fn fit_mlp(sets: &[&Dataset], cfg: &TrainConfig) -> Result<Trained<Mlp>> {
    cfg.validate()?;
    let (x, y) = stack_rows(sets)?;
    let mut model = Mlp::init(&cfg.mlp_sizes, cfg.seed)?;
    let mut adam = AdamState::new(model.params.len(), cfg.adam);
    let mut rng = stream_rng(cfg.seed, SHUFFLE_STREAM);
    let pred = model.forward(x.view())?;
    let mut curve = vec![mse(&pred, &y)];
    let mut order: Vec<usize> = (0..y.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), idx);
            let yb: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let (loss, grad) = model.loss_and_grad(xb.view(), &yb)?;
            check_loss(loss, epoch)?;
            adam.step(&mut model.params, &grad)?;
            total += loss * idx.len() as f64;
        }
        curve.push(total / y.len() as f64);
        log::debug!("mlp epoch {epoch}: mse {:.6}", curve[epoch]);
    }
    Ok(Trained {
        model,
        loss_curve: curve,
        adam,
    })
}

/// `(dataset, last row)` of every complete window.
pub fn window_index(sets: &[&Dataset], window: usize) -> Vec<(usize, usize)> {
    sets.iter()
        .enumerate()
        .flat_map(|(k, d)| (window.saturating_sub(1)..d.len()).map(move |t| (k, t)))
        .collect()
}

/// Copies windows into a `(batch, window, input)` block.
pub fn gather_windows(sets: &[&Dataset], idx: &[(usize, usize)], window: usize) -> Array3<f64> {
    let width = sets.first().map(|d| d.inputs.ncols()).unwrap_or(0);
    let mut out = Array3::zeros((idx.len(), window, width));
    for (b, &(k, t)) in idx.iter().enumerate() {
        out.slice_mut(s![b, .., ..])
            .assign(&sets[k].inputs.slice(s![t + 1 - window..=t, ..]));
    }
    out
}

const EVAL_CHUNK: usize = 512;

/// Predictions (unclamped) for every window in `idx`.
pub fn lstm_predict_windows(model: &Lstm, sets: &[&Dataset], idx: &[(usize, usize)]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(EVAL_CHUNK) {
        let xb = gather_windows(sets, chunk, model.window);
        out.extend(model.forward(xb.view())?);
    }
    Ok(out)
}

/// Trains an LSTM on shuffled windows; no window crosses two datasets.
pub fn fit_lstm(sets: &[&Dataset], cfg: &TrainConfig) -> Result<Trained<Lstm>> {
    cfg.validate()?;
    let windows = window_index(sets, cfg.window);
    if windows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no dataset has {} rows for one window",
            cfg.window
        )));
    }
    let target = |&(k, t): &(usize, usize)| sets[k].targets[t];
    let y: Vec<f64> = windows.iter().map(target).collect();
    let mut model = Lstm::init(INPUT_WIDTH, cfg.lstm_hidden, cfg.lstm_dense, cfg.window, cfg.seed)?;
    let mut adam = AdamState::new(model.params.len(), cfg.adam);
    let mut rng = stream_rng(cfg.seed, SHUFFLE_STREAM);
    let pred = Array1::from(lstm_predict_windows(&model, sets, &windows)?);
    let mut curve = vec![mse(&pred, &y)];
    let mut order = windows.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let xb = gather_windows(sets, idx, cfg.window);
            let yb: Vec<f64> = idx.iter().map(target).collect();
            let (loss, mut grad) = model.loss_and_grad(xb.view(), &yb)?;
            check_loss(loss, epoch)?;
            clip_global_norm(&mut grad, cfg.clip_norm);
            adam.step(&mut model.params, &grad)?;
            total += loss * idx.len() as f64;
        }
        curve.push(total / y.len() as f64);
        log::debug!("lstm epoch {epoch}: mse {:.6}", curve[epoch]);
    }
    Ok(Trained {
        model,
        loss_curve: curve,
        adam,
    })
}

fn mse(pred: &Array1<f64>, y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}
