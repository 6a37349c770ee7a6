//! Trains the 116-256-128-64-1 perceptron on three interfaces and scores a
//! fourth.

use std::sync::Arc;

use bwpred::eval::{score_fold, MetricsReport};
use bwpred::features::Dataset;
use bwpred::forecast::{train_model, ArimaConfig, ModelKind, TrainConfig};
use bwpred::pipeline::{resolve_interfaces, simulate_samples};
use bwpred::sim::SimConfig;
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    env_logger::init();
    let topo = Arc::new(Topology::default_mesh());
    let ids: Vec<String> = ["r1-eth1", "r1-eth3", "r2-eth2", "r2-eth3"].map(String::from).to_vec();
    let ifs = resolve_interfaces(&topo, &ids)?;
    let run = simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(5, 2.0 * 3600.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        None,
    )?;
    let sets = run.datasets(&topo, 5)?;
    let train: Vec<&Dataset> = sets[..3].iter().collect();
    let cfg = TrainConfig::desk();
    let model = train_model(ModelKind::Mlp, &train, &cfg, &ArimaConfig::default())?;
    for (e, loss) in model.loss_curve.iter().enumerate() {
        println!("epoch {e:>2} training mse {loss:.6}");
    }
    let fold = score_fold(&model, 0, &sets[3], 0)?;
    let report = MetricsReport {
        model: ModelKind::Mlp,
        average: fold.metrics,
        folds: vec![fold],
    };
    print!("{}", bwpred::eval::format_table(&report));
    Ok(())
}
