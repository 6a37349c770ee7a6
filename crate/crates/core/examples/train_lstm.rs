//! Trains the LSTM forecaster on windows of ten samples and scores a held-out
//! interface. Pass a hidden width to override the default.
//!
//! cargo run --release --example train_lstm -- [hidden]

use std::sync::Arc;

use bwpred::eval::score_fold;
use bwpred::features::Dataset;
use bwpred::forecast::{train_model, ArimaConfig, ModelKind, TrainConfig};
use bwpred::pipeline::{resolve_interfaces, simulate_samples};
use bwpred::sim::SimConfig;
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    env_logger::init();
    let mut cfg = TrainConfig::desk();
    if let Some(h) = std::env::args().nth(1) {
        cfg.lstm_hidden = h.parse().expect("hidden width");
    }
    let topo = Arc::new(Topology::default_mesh());
    let ids: Vec<String> = ["r1-eth1", "r1-eth3", "r2-eth2", "r2-eth3"].map(String::from).to_vec();
    let ifs = resolve_interfaces(&topo, &ids)?;
    let run = simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(6, 2.0 * 3600.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        None,
    )?;
    let sets = run.datasets(&topo, 5)?;
    let train: Vec<&Dataset> = sets[..3].iter().collect();
    let model = train_model(ModelKind::Lstm, &train, &cfg, &ArimaConfig::default())?;
    println!("loss curve {:?}", model.loss_curve);
    let fold = score_fold(&model, 0, &sets[3], cfg.window - 1)?;
    println!(
        "{}: mae {:.4} rmse {:.4} median |err| {:.4} p95 |err| {:.4}",
        fold.interface, fold.metrics.mae, fold.metrics.rmse, fold.abs_err_median, fold.abs_err_p95
    );
    Ok(())
}
