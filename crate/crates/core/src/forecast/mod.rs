//! ARIMA, MLP and LSTM forecasters, their optimizer and checkpoints.

pub mod adam;
pub mod arima;
pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod mlp;
mod model;
pub mod params;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use arima::{ArimaConfig, ArimaModel};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use lstm::Lstm;
pub use mlp::Mlp;
pub use model::{train_model, Forecaster, ModelKind, OnlinePredictor, TrainedModel};
pub use train::{TrainConfig, DESK_LSTM_HIDDEN};
