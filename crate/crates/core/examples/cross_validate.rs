//! Leave-one-interface-out comparison of the three forecasters.
//!
//! cargo run --release --example cross_validate -- [hours] [seed]

use std::sync::Arc;

use bwpred::eval::{cross_validate, format_table};
use bwpred::forecast::{ArimaConfig, ModelKind, TrainConfig};
use bwpred::pipeline::{resolve_interfaces, simulate_samples, EVAL_INTERFACES};
use bwpred::sim::SimConfig;
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let hours: f64 = args.next().map_or(1.0, |s| s.parse().expect("hours"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let topo = Arc::new(Topology::default_mesh());
    let ids: Vec<String> = EVAL_INTERFACES.iter().map(|s| s.to_string()).collect();
    let ifs = resolve_interfaces(&topo, &ids)?;
    let run = simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(seed, hours * 3600.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        None,
    )?;
    let sets = run.datasets(&topo, 5)?;
    let cfg = TrainConfig { seed, ..TrainConfig::desk() };
    for kind in ModelKind::ALL {
        let report = cross_validate(kind, &sets, &cfg, &ArimaConfig::default())?;
        println!("{}", format_table(&report));
    }
    Ok(())
}
