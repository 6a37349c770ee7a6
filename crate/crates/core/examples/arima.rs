//! Fits ARIMA to one interface's utilization series and forecasts 15 s ahead.

use std::sync::Arc;

use bwpred::eval::compute_metrics;
use bwpred::features::unshift;
use bwpred::forecast::arima::arima_fit;
use bwpred::forecast::ArimaConfig;
use bwpred::pipeline::{resolve_interfaces, simulate_samples};
use bwpred::sim::SimConfig;
use bwpred::telemetry::TelemetryConfig;
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    let topo = Arc::new(Topology::default_mesh());
    let ifs = resolve_interfaces(&topo, &["r1-eth1".into(), "r2-eth1".into()])?;
    let run = simulate_samples(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(4, 2.0 * 3600.0, 3.0),
        TelemetryConfig::default(),
        &ifs,
        None,
    )?;
    let sets = run.datasets(&topo, 5)?;
    let train = unshift(&sets[0]);
    let model = arima_fit(&[&train], &ArimaConfig::default())?;
    println!(
        "ARIMA({},{},{}) phi {:?} theta {:?} sigma2 {:.2e} bic {:.1}",
        model.p, model.d, model.q, model.phi, model.theta, model.sigma2, model.bic
    );

    let test = &sets[1];
    let forecasts = model.walk_forward(&test.current(), test.offset)?;
    let (p, y): (Vec<f64>, Vec<f64>) = forecasts
        .iter()
        .zip(&test.targets)
        .filter_map(|(p, &y)| p.map(|p| (p, y)))
        .unzip();
    let m = compute_metrics(&p, &y)?;
    println!("{} walk-forward: mae {:.4} rmse {:.4}", test.interface, m.mae, m.rmse);
    Ok(())
}
