//! Closed-loop control on router r2: a forecaster trained on one run drives
//! blocking and load balancing on another, each compared to an uncontrolled
//! baseline.

use std::sync::Arc;

use bwpred::control::{control_loop, default_interfaces, format_summary, ControlSetup, PolicyConfig, PolicyKind};
use bwpred::features::Dataset;
use bwpred::forecast::{train_model, ArimaConfig, ModelKind, TrainConfig};
use bwpred::pipeline::{resolve_interfaces, simulate_samples, EVAL_INTERFACES};
use bwpred::sim::SimConfig;
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    env_logger::init();
    let topo = Arc::new(Topology::default_mesh());
    let ids: Vec<String> = EVAL_INTERFACES.iter().map(|s| s.to_string()).collect();
    let ifs = resolve_interfaces(&topo, &ids)?;
    let run = simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(1, 2.0 * 3600.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        None,
    )?;
    let sets = run.datasets(&topo, 5)?;
    let refs: Vec<&Dataset> = sets.iter().collect();
    let model = train_model(ModelKind::Mlp, &refs, &TrainConfig::desk(), &ArimaConfig::default())?;

    let setup = ControlSetup {
        interfaces: default_interfaces(&topo),
        topology: Arc::clone(&topo),
        profile: TrafficProfile::congested(),
        sim: SimConfig::new(11, 3600.0, 3.0),
        telemetry: TelemetryConfig::default(),
    };
    for kind in [PolicyKind::Block, PolicyKind::Balance] {
        let report = control_loop(&setup, &model, &PolicyConfig::new(kind))?;
        print!("{}", format_summary(&report));
        println!(
            "  overload reduction {:.0}%, prefix identical {}\n",
            100.0 * report.overload_reduction(),
            report.prefix_identical
        );
    }
    Ok(())
}
