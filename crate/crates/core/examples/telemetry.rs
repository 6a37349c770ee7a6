//! Samples flow records and router counters of one interface for a few
//! minutes and prints the last tick.

use std::sync::Arc;

use bwpred::sim::{AdmitAll, SimConfig, Simulator};
use bwpred::telemetry::{TelemetryConfig, TelemetrySampler};
use bwpred::topology::Topology;
use bwpred::traffic::TrafficProfile;

fn main() -> bwpred::Result<()> {
    let topo = Arc::new(Topology::default_mesh());
    let iface = topo.interface("r2-eth1")?;
    let mut sim = Simulator::new(Arc::clone(&topo), TrafficProfile::congested(), SimConfig::new(3, 300.0, 3.0))?;
    let mut sampler = TelemetrySampler::new(&sim, vec![iface], TelemetryConfig::default());

    let mut last = None;
    while sim.next_tick(&mut AdmitAll).is_some() {
        last = sampler.sample(&sim).pop();
    }
    let rec = last.expect("at least one tick");
    println!("timestamp {}: {} active flows", rec.timestamp, rec.flows.len());
    for f in rec.flows.iter().take(3) {
        println!(
            "  {}:{} -> {}:{} proto {} fwd {} pkts / {} bytes, duration {:.1}s",
            f.src_ip, f.src_port, f.dst_ip, f.dst_port, f.protocol, f.total_fpackets, f.total_fvolume, f.duration
        );
    }
    let s = &rec.system;
    println!(
        "  cpu usr {:.1}% sys {:.1}%, load {:.2}, tcp est {}, down {:.2} Mbit/s up {:.2} Mbit/s",
        s.cpu_usr,
        s.cpu_sys,
        s.load_1m,
        s.tcp_est,
        s.download_bitrate / 1e6,
        s.upload_bitrate / 1e6
    );
    Ok(())
}
