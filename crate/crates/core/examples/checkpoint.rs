//! Saves a trained model, reloads it and checks that predictions and bytes
//! survive the round trip.

use std::sync::Arc;

use bwpred::features::Dataset;
use bwpred::forecast::checkpoint::declared_param_count;
use bwpred::forecast::{load_checkpoint, save_checkpoint, train_model, ArimaConfig, ModelKind, TrainConfig};
use bwpred::pipeline::{resolve_interfaces, simulate_samples};
use bwpred::sim::SimConfig;
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    let topo = Arc::new(Topology::default_mesh());
    let ifs = resolve_interfaces(&topo, &["r1-eth1".into(), "r2-eth3".into()])?;
    let run = simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(9, 1800.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        None,
    )?;
    let sets = run.datasets(&topo, 5)?;
    let refs: Vec<&Dataset> = sets.iter().collect();
    let cfg = TrainConfig { epochs: 2, ..TrainConfig::desk() };

    for kind in ModelKind::ALL {
        let model = train_model(kind, &refs, &cfg, &ArimaConfig::default())?;
        let bytes = save_checkpoint(&model)?;
        let loaded = load_checkpoint(&bytes)?;
        let same_bytes = save_checkpoint(&loaded)? == bytes;
        let same_predictions = loaded.predict_dataset(&sets[0])? == model.predict_dataset(&sets[0])?;
        println!(
            "{kind}: {} bytes, {} parameters, bytes stable {same_bytes}, predictions equal {same_predictions}",
            bytes.len(),
            declared_param_count(&bytes)?
        );
    }
    Ok(())
}
