//! End-to-end helpers: simulate, sample telemetry and build datasets in
//! memory, optionally mirroring the raw telemetry to disk.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::{aggregate_flows, label_and_shift, Dataset, InterfaceSample, JoinReport};
use crate::sim::{AdmitAll, SimConfig, SimulationLog, Simulator};
use crate::telemetry::{InterfaceTelemetry, TelemetryConfig, TelemetrySampler, TelemetryWriter};
use crate::topology::Topology;
use crate::traffic::TrafficProfile;

/// Interfaces used for evaluation on the default topology: one end of every
/// core link plus one host link per router, no two on the same link.
pub const EVAL_INTERFACES: [&str; 8] = [
    "r1-eth1", "r1-eth2", "r2-eth1", "r2-eth2", "r1-eth3", "r2-eth3", "r3-eth3", "r4-eth3",
];

/// Resolves interface ids, or all interfaces if `ids` is empty.
pub fn resolve_interfaces(topology: &Topology, ids: &[String]) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Ok((0..topology.interfaces.len()).collect());
    }
    ids.iter().map(|id| topology.interface(id)).collect()
}

/// Joins one tick of live telemetry into a sample.
pub fn live_sample(rec: &InterfaceTelemetry, capacity: f64) -> InterfaceSample {
    let mut report = JoinReport::default();
    crate::features::join_samples(
        &aggregate_flows(&rec.flows),
        rec.timestamp,
        &rec.system,
        rec.timestamp,
        capacity,
        &mut report,
    )
    .expect("same-tick join")
}

/// Samples of every requested interface over one run.
pub struct SampledRun {
    pub log: SimulationLog,
    pub interfaces: Vec<usize>,
    /// one series per entry of `interfaces`
    pub samples: Vec<Vec<InterfaceSample>>,
}

impl SampledRun {
    pub fn datasets(&self, topology: &Topology, offset: usize) -> Result<Vec<Dataset>> {
        let interval = self.log.config.interval;
        self.interfaces
            .iter()
            .zip(&self.samples)
            .map(|(&i, s)| label_and_shift(&topology.interfaces[i].id, s, offset, interval))
            .collect()
    }
}

/// Runs the simulator, sampling `interfaces` at every tick. With `raw_out` the
/// per-interface telemetry files are written as well.
pub fn simulate_samples(
    topology: Arc<Topology>,
    profile: TrafficProfile,
    config: SimConfig,
    telemetry: TelemetryConfig,
    interfaces: &[usize],
    raw_out: Option<&Path>,
) -> Result<SampledRun> {
    if let Some(&bad) = interfaces.iter().find(|&&i| i >= topology.interfaces.len()) {
        return Err(Error::UnknownInterface(format!("#{bad}")));
    }
    let mut sim = Simulator::new(Arc::clone(&topology), profile, config)?;
    let mut sampler = TelemetrySampler::new(&sim, interfaces.to_vec(), telemetry);
    let mut writer = match raw_out {
        Some(dir) => Some(TelemetryWriter::create(dir, &sim, interfaces)?),
        None => None,
    };
    let caps: Vec<f64> = interfaces
        .iter()
        .map(|&i| topology.links[topology.interfaces[i].link].capacity)
        .collect();
    let mut samples = vec![Vec::with_capacity(sim.config().tick_count()); interfaces.len()];
    let mut gate = AdmitAll;
    while sim.next_tick(&mut gate).is_some() {
        let batch = sampler.sample(&sim);
        if let Some(w) = writer.as_mut() {
            w.write(&batch)?;
        }
        for (k, rec) in batch.iter().enumerate() {
            samples[k].push(live_sample(rec, caps[k]));
        }
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    Ok(SampledRun {
        log: sim.into_log(&mut gate),
        interfaces: interfaces.to_vec(),
        samples,
    })
}
