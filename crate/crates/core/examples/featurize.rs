//! Writes raw telemetry to disk, then joins it into labeled datasets.
//!
//! cargo run --release --example featurize -- [out-dir]

use std::path::PathBuf;
use std::sync::Arc;

use bwpred::features::{featurize_dir, read_dataset};
use bwpred::pipeline::{resolve_interfaces, simulate_samples};
use bwpred::sim::SimConfig;
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("bwpred-featurize"));
    let raw = root.join("telemetry");
    let data = root.join("datasets");

    let topo = Arc::new(Topology::default_mesh());
    let ifs = resolve_interfaces(&topo, &["r1-eth1".into(), "r2-eth3".into()])?;
    simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(2, 1800.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        Some(&raw),
    )?;

    for r in featurize_dir(&raw, &data, 5, 3.0, &[])? {
        let (ds, side) = read_dataset(&r.csv)?;
        let peak = ds.targets.iter().copied().fold(0.0, f64::max);
        println!(
            "{}: {} rows x {} inputs, {} dropped at join, peak utilization {:.3} -> {}",
            ds.interface,
            ds.len(),
            side.columns.len(),
            r.join.dropped,
            peak,
            r.csv.display()
        );
    }
    Ok(())
}
