//! Prediction trace of an MLP on a held-out interface, written as CSV and SVG.
//!
//! cargo run --release --example trace_plot -- [out-dir]

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use bwpred::eval::{emit_trace, render_svg, write_trace_csv};
use bwpred::features::{schema_hash, Dataset};
use bwpred::forecast::{train_model, ArimaConfig, ModelKind, TrainConfig};
use bwpred::pipeline::{resolve_interfaces, simulate_samples};
use bwpred::sim::SimConfig;
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("bwpred-trace"));
    fs::create_dir_all(&out)?;

    let topo = Arc::new(Topology::default_mesh());
    let ids: Vec<String> = ["r1-eth3", "r2-eth3", "r3-eth3", "r1-eth1"].map(String::from).to_vec();
    let ifs = resolve_interfaces(&topo, &ids)?;
    let run = simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(8, 3600.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        None,
    )?;
    let sets = run.datasets(&topo, 5)?;
    let train: Vec<&Dataset> = sets[..3].iter().collect();
    let model = train_model(ModelKind::Mlp, &train, &TrainConfig::desk(), &ArimaConfig::default())?;

    let rows = emit_trace(&model, &sets[3], schema_hash())?;
    let csv = out.join("trace.csv");
    let file = fs::File::create(&csv)?;
    write_trace_csv(file, &rows)?;
    let svg = out.join("trace.svg");
    fs::write(&svg, render_svg(&rows, "mlp on r1-eth1"))?;
    println!("{} rows -> {} and {}", rows.len(), csv.display(), svg.display());
    Ok(())
}
