//! Runs the flow-level simulator for one hour of congested traffic and prints
//! the mean utilization of every link direction.
//!
//! cargo run --release --example simulate -- [seed] [hours]

use std::sync::Arc;

use bwpred::sim::{run_simulation, SimConfig};
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let hours: f64 = args.next().map_or(1.0, |s| s.parse().expect("hours"));

    let topo = Arc::new(Topology::default_mesh());
    let log = run_simulation(
        Arc::clone(&topo),
        TrafficProfile::congested(),
        SimConfig::new(seed, hours * 3600.0, 3.0),
        |_, _| {},
    )?;

    println!(
        "{} ticks, {} flows, max capacity excess {:.2e}",
        log.ticks.len(),
        log.flows.len(),
        log.max_capacity_excess
    );
    for (l, link) in topo.links.iter().enumerate() {
        let mean = |d: usize| {
            log.ticks.iter().map(|t| t.interval_rate[l][d]).sum::<f64>() / log.ticks.len() as f64 / link.capacity
        };
        println!("{:<8} a->b {:.3}  b->a {:.3}", link.id, mean(0), mean(1));
    }
    Ok(())
}
