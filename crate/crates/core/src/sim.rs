//! Deterministic discrete-event fluid simulator.
//!
//! Flows are continuous rates. Rates change only at flow start/end (or when a
//! controller reroutes a flow) and are constant in between, so byte counters
//! are integrated exactly. Sample ticks are where telemetry and controllers
//! observe the network.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{allocate_rates, FlowDemand};
use crate::error::{Error, Result};
use crate::topology::{Dir, LinkIdx, NodeIdx, Path, Topology};
use crate::traffic::{generate_flow_to, FlowSpec, TrafficProfile, PER_SERVER};

/// `FlowStart` payload of the single network-wide arrival clock.
const NETWORK_CLOCK: usize = usize::MAX;

/// Stream ids for sub-generators derived from the run seed.
pub(crate) const TRAFFIC_STREAM: u64 = 1;
pub(crate) const TELEMETRY_STREAM: u64 = 2;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// seconds of simulated time
    pub duration: f64,
    /// seconds between sample ticks
    pub interval: f64,
    /// when false no flows are generated
    pub traffic_enabled: bool,
}

impl SimConfig {
    pub fn new(seed: u64, duration: f64, interval: f64) -> Self {
        SimConfig {
            seed,
            duration,
            interval,
            traffic_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.interval > 0.0) || !(self.duration > self.interval) {
            return Err(Error::invalid(
                "simulation config",
                format!(
                    "need duration > interval > 0 (duration {}, interval {})",
                    self.duration, self.interval
                ),
            ));
        }
        Ok(())
    }

    /// Number of sample ticks the run produces.
    pub fn tick_count(&self) -> usize {
        (self.duration / self.interval + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum EventKind {
    FlowEnd,
    FlowStart,
    SampleTick,
}

/// Queue entry. Ordered by time, then kind (`FlowEnd < FlowStart <
/// SampleTick`), then insertion sequence.
#[derive(Debug, Clone, Copy)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub payload: usize,
    seq: u64,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for SimEvent {}
impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Running statistics over a weighted sample.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Moments {
    pub weight: f64,
    pub sum: f64,
    pub sumsq: f64,
    pub min: f64,
    pub max: f64,
}

impl Moments {
    pub fn push(&mut self, value: f64, weight: f64) {
        if weight <= 0.0 {
            return;
        }
        if self.weight == 0.0 {
            self.min = value;
            self.max = value;
        } else {
            self.min = self.min.min(value);
            self.max = self.max.max(value);
        }
        self.weight += weight;
        self.sum += weight * value;
        self.sumsq += weight * value * value;
    }

    pub fn mean(&self) -> f64 {
        if self.weight > 0.0 {
            self.sum / self.weight
        } else {
            0.0
        }
    }

    pub fn std(&self) -> f64 {
        if self.weight > 0.0 {
            let m = self.mean();
            (self.sumsq / self.weight - m * m).max(0.0).sqrt()
        } else {
            0.0
        }
    }

    /// Clamped so that `min <= mean <= max` survives rounding.
    pub fn summary(&self) -> (f64, f64, f64, f64) {
        if self.weight == 0.0 {
            return (0.0, 0.0, 0.0, 0.0);
        }
        let mean = self.mean().clamp(self.min, self.max);
        (self.min, mean, self.max, self.std())
    }
}

/// Live per-flow state.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub id: usize,
    pub spec: FlowSpec,
    pub path: Path,
    pub client_port: u16,
    /// current allocated rate, bits/s
    pub rate: f64,
    /// forward bytes delivered so far
    pub bytes: f64,
    /// forward inter-arrival times, weighted by packets sent at each rate
    pub iat: Moments,
    pub active_periods: Moments,
    pub idle_periods: Moments,
    pub episode_start: f64,
    pub episode_active: bool,
    pub ended: Option<f64>,
}

impl FlowState {
    fn close_episode(&mut self, now: f64) {
        let len = now - self.episode_start;
        if len > 0.0 {
            if self.episode_active {
                self.active_periods.push(len, 1.0);
            } else {
                self.idle_periods.push(len, 1.0);
            }
        }
        self.episode_start = now;
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct DirState {
    /// allocated rate, bits/s
    pub rate: f64,
    /// cumulative bytes
    pub bytes: f64,
    /// cumulative packets
    pub packets: f64,
    /// packets per second at the current allocation
    pub pps: f64,
}

#[derive(Debug, Clone)]
pub struct LinkState {
    pub capacity: f64,
    pub dirs: [DirState; 2],
    /// ids of active flows crossing the link, ascending
    pub flows: Vec<usize>,
}

impl LinkState {
    /// Instantaneous utilization of one direction.
    pub fn utilization(&self, dir: Dir) -> f64 {
        self.dirs[dir.index()].rate / self.capacity
    }
}

/// Decision for a flow about to start.
#[derive(Debug, Clone, PartialEq)]
pub enum Admission {
    Admit(Path),
    Reject,
}

/// Admission control consulted at every flow start.
pub trait FlowGate {
    fn admit(&mut self, spec: &FlowSpec, primary: &Path, sim: &Simulator) -> Admission;
}

/// Admits every flow on its primary route.
#[derive(Debug, Default, Clone, Copy)]
pub struct AdmitAll;

impl FlowGate for AdmitAll {
    fn admit(&mut self, _spec: &FlowSpec, primary: &Path, _sim: &Simulator) -> Admission {
        Admission::Admit(primary.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tick {
    pub index: usize,
    pub time: f64,
}

/// Link-level state recorded at one sample tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickRecord {
    pub time: f64,
    /// cumulative bytes per link, `[a->b, b->a]`
    pub bytes: Vec<[f64; 2]>,
    /// mean rate over the preceding interval, bits/s
    pub interval_rate: Vec<[f64; 2]>,
    pub active_flows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowLifetime {
    pub id: usize,
    pub spec: FlowSpec,
    pub path: Vec<(LinkIdx, usize)>,
    pub start: f64,
    pub end: f64,
    pub bytes: f64,
}

/// Everything a run leaves behind at link and flow granularity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationLog {
    pub config: SimConfig,
    pub ticks: Vec<TickRecord>,
    pub flows: Vec<FlowLifetime>,
    pub rejected: Vec<FlowSpec>,
    /// largest `(rate - capacity) / capacity` seen at any event boundary
    pub max_capacity_excess: f64,
}

impl SimulationLog {
    /// Canonical byte encoding used for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("log serializes")
    }
}

pub struct Simulator {
    topology: Arc<Topology>,
    profile: TrafficProfile,
    config: SimConfig,
    rng: ChaCha8Rng,
    now: f64,
    queue: BinaryHeap<Reverse<SimEvent>>,
    seq: u64,
    flows: Vec<FlowState>,
    active: Vec<usize>,
    links: Vec<LinkState>,
    capacity: Vec<f64>,
    prev_bytes: Vec<[f64; 2]>,
    prev_packets: Vec<[f64; 2]>,
    interval_rate: Vec<[f64; 2]>,
    interval_pps: Vec<[f64; 2]>,
    router_admissions: Vec<u64>,
    ended: Vec<usize>,
    rejected: Vec<FlowSpec>,
    ticks: Vec<TickRecord>,
    max_excess: f64,
    next_tick: usize,
    finished: bool,
}

impl Simulator {
    pub fn new(topology: Arc<Topology>, profile: TrafficProfile, config: SimConfig) -> Result<Self> {
        config.validate()?;
        profile.validate()?;
        if topology.hosts.len() < 2 {
            return Err(Error::invalid("topology", "need at least two hosts"));
        }
        let links: Vec<LinkState> = topology
            .links
            .iter()
            .map(|l| LinkState {
                capacity: l.capacity,
                dirs: [DirState::default(); 2],
                flows: Vec::new(),
            })
            .collect();
        let capacity = topology
            .links
            .iter()
            .flat_map(|l| [l.capacity, l.capacity])
            .collect();
        let n = links.len();
        let mut sim = Simulator {
            rng: stream_rng(config.seed, TRAFFIC_STREAM),
            profile,
            now: 0.0,
            queue: BinaryHeap::new(),
            seq: 0,
            flows: Vec::new(),
            active: Vec::new(),
            links,
            capacity,
            prev_bytes: vec![[0.0; 2]; n],
            prev_packets: vec![[0.0; 2]; n],
            interval_rate: vec![[0.0; 2]; n],
            interval_pps: vec![[0.0; 2]; n],
            router_admissions: vec![0; topology.nodes.len()],
            ended: Vec::new(),
            rejected: Vec::new(),
            ticks: Vec::new(),
            max_excess: f64::NEG_INFINITY,
            next_tick: 1,
            finished: false,
            topology,
            config,
        };
        if sim.config.traffic_enabled {
            if sim.profile.endpoints == PER_SERVER {
                // each server's clock starts at a random phase
                for k in 0..sim.topology.hosts.len() {
                    let first = sim.rng.random_range(0.0..=sim.profile.inter_arrival_secs.hi);
                    if first < sim.config.duration {
                        sim.push(first, EventKind::FlowStart, k);
                    }
                }
            } else {
                sim.push(0.0, EventKind::FlowStart, NETWORK_CLOCK);
            }
        }
        sim.schedule_tick();
        Ok(sim)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn topology_arc(&self) -> Arc<Topology> {
        Arc::clone(&self.topology)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn flow(&self, id: usize) -> &FlowState {
        &self.flows[id]
    }

    /// Ids of flows currently active.
    pub fn active_flows(&self) -> &[usize] {
        &self.active
    }

    pub fn link(&self, link: LinkIdx) -> &LinkState {
        &self.links[link]
    }

    /// Mean rate (bits/s) over the interval ending at the latest tick.
    pub fn interval_rate(&self, link: LinkIdx, dir: Dir) -> f64 {
        self.interval_rate[link][dir.index()]
    }

    /// Mean packet rate over the interval ending at the latest tick.
    pub fn interval_pps(&self, link: LinkIdx, dir: Dir) -> f64 {
        self.interval_pps[link][dir.index()]
    }

    /// Cumulative flows admitted through each node.
    pub fn admissions(&self, node: NodeIdx) -> u64 {
        self.router_admissions[node]
    }

    /// Flow ids in the order they ended.
    pub fn ended_flows(&self) -> &[usize] {
        &self.ended
    }

    pub fn rejected_count(&self) -> usize {
        self.rejected.len()
    }

    pub fn max_capacity_excess(&self) -> f64 {
        self.max_excess
    }

    fn push(&mut self, time: f64, kind: EventKind, payload: usize) {
        self.seq += 1;
        self.queue.push(Reverse(SimEvent {
            time,
            kind,
            payload,
            seq: self.seq,
        }));
    }

    fn schedule_tick(&mut self) {
        if self.next_tick <= self.config.tick_count() {
            let t = self.next_tick as f64 * self.config.interval;
            self.push(t, EventKind::SampleTick, self.next_tick);
            self.next_tick += 1;
        }
    }

    /// Processes events up to and including the next sample tick. Returns
    /// `None` once every tick has been emitted; the run is then finalized.
    pub fn next_tick(&mut self, gate: &mut dyn FlowGate) -> Option<Tick> {
        while let Some(Reverse(ev)) = self.queue.pop() {
            match ev.kind {
                EventKind::FlowStart => {
                    self.advance(ev.time);
                    self.start_flow(gate, ev.payload);
                }
                EventKind::FlowEnd => {
                    self.advance(ev.time);
                    self.end_flow(ev.payload);
                }
                EventKind::SampleTick => {
                    self.advance(ev.time);
                    self.sample(ev.time);
                    let tick = Tick {
                        index: ev.payload - 1,
                        time: ev.time,
                    };
                    self.schedule_tick();
                    return Some(tick);
                }
            }
        }
        self.finish();
        None
    }

    fn start_flow(&mut self, gate: &mut dyn FlowGate, clock: usize) {
        let topology = Arc::clone(&self.topology);
        let server = (clock != NETWORK_CLOCK).then_some(clock);
        let (spec, next) = generate_flow_to(&mut self.rng, self.now, &self.profile, &topology, server);
        if next < self.config.duration {
            self.push(next, EventKind::FlowStart, clock);
        }
        let primary = match topology.path(spec.src, spec.dst) {
            Some(p) => p.clone(),
            None => {
                self.rejected.push(spec);
                return;
            }
        };
        let path = match gate.admit(&spec, &primary, self) {
            Admission::Admit(p) => p,
            Admission::Reject => {
                self.rejected.push(spec);
                return;
            }
        };
        let id = self.flows.len();
        let end = spec.start_time + spec.duration;
        self.flows.push(FlowState {
            id,
            client_port: 32768 + (id % 28232) as u16,
            spec,
            path,
            rate: 0.0,
            bytes: 0.0,
            iat: Moments::default(),
            active_periods: Moments::default(),
            idle_periods: Moments::default(),
            episode_start: self.now,
            episode_active: false,
            ended: None,
        });
        self.attach(id);
        self.active.push(id);
        if end < self.config.duration {
            self.push(end, EventKind::FlowEnd, id);
        }
        self.reallocate();
        // the first allocation opens the first episode at the start time
        let f = &mut self.flows[id];
        f.episode_active = f.rate > 0.0;
    }

    fn end_flow(&mut self, id: usize) {
        if self.flows[id].ended.is_some() {
            return;
        }
        self.detach(id);
        self.active.retain(|&x| x != id);
        let now = self.now;
        let f = &mut self.flows[id];
        f.close_episode(now);
        f.ended = Some(now);
        f.rate = 0.0;
        self.ended.push(id);
        self.reallocate();
    }

    fn attach(&mut self, id: usize) {
        let topology = Arc::clone(&self.topology);
        let f = &self.flows[id];
        let mut nodes = vec![f.spec.src];
        for h in &f.path {
            let at = *nodes.last().unwrap();
            nodes.push(topology.peer(h.link, at));
        }
        for h in f.path.clone() {
            let list = &mut self.links[h.link].flows;
            if let Err(pos) = list.binary_search(&id) {
                list.insert(pos, id);
            }
        }
        for n in nodes {
            self.router_admissions[n] += 1;
        }
    }

    fn detach(&mut self, id: usize) {
        for h in self.flows[id].path.clone() {
            let list = &mut self.links[h.link].flows;
            if let Ok(pos) = list.binary_search(&id) {
                list.remove(pos);
            }
        }
    }

    /// Moves an active flow onto a new route at the current instant.
    pub fn reroute(&mut self, id: usize, path: Path) {
        if self.flows[id].ended.is_some() {
            return;
        }
        self.detach(id);
        self.flows[id].path = path;
        for h in self.flows[id].path.clone() {
            let list = &mut self.links[h.link].flows;
            if let Err(pos) = list.binary_search(&id) {
                list.insert(pos, id);
            }
        }
        self.reallocate();
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        if dt > 0.0 {
            for &id in &self.active {
                let f = &mut self.flows[id];
                if f.rate > 0.0 {
                    let bits = f.rate * dt;
                    let len = f.spec.packet_length as f64;
                    f.bytes += bits / 8.0;
                    f.iat.push(8.0 * len / f.rate, bits / (8.0 * len));
                }
            }
            for l in &mut self.links {
                for d in &mut l.dirs {
                    d.bytes += d.rate * dt / 8.0;
                    d.packets += d.pps * dt;
                }
            }
        }
        if t > self.now {
            self.now = t;
        }
    }

    fn reallocate(&mut self) {
        let demands: Vec<FlowDemand<'_>> = self
            .active
            .iter()
            .map(|&id| {
                let f = &self.flows[id];
                FlowDemand {
                    protocol: f.spec.protocol,
                    target: f.spec.target_bitrate,
                    path: &f.path,
                }
            })
            .collect();
        let rates = allocate_rates(&self.capacity, &demands);
        drop(demands);

        for l in &mut self.links {
            for d in &mut l.dirs {
                d.rate = 0.0;
                d.pps = 0.0;
            }
        }
        let now = self.now;
        for (k, &id) in self.active.iter().enumerate() {
            let f = &mut self.flows[id];
            let rate = rates[k];
            if (rate > 0.0) != f.episode_active && now > f.spec.start_time {
                f.close_episode(now);
                f.episode_active = rate > 0.0;
            }
            f.rate = rate;
            let pps = rate / (8.0 * f.spec.packet_length as f64);
            for h in &f.path {
                let d = &mut self.links[h.link].dirs[h.dir.index()];
                d.rate += rate;
                d.pps += pps;
            }
        }
        for l in &self.links {
            for d in &l.dirs {
                let excess = (d.rate - l.capacity) / l.capacity;
                if excess > self.max_excess {
                    self.max_excess = excess;
                }
            }
        }
    }

    fn sample(&mut self, time: f64) {
        let dt = self.config.interval;
        for (i, l) in self.links.iter().enumerate() {
            for d in 0..2 {
                let bytes = l.dirs[d].bytes;
                let packets = l.dirs[d].packets;
                self.interval_rate[i][d] = (bytes - self.prev_bytes[i][d]) * 8.0 / dt;
                self.interval_pps[i][d] = (packets - self.prev_packets[i][d]) / dt;
                self.prev_bytes[i][d] = bytes;
                self.prev_packets[i][d] = packets;
            }
        }
        self.ticks.push(TickRecord {
            time,
            bytes: self.prev_bytes.clone(),
            interval_rate: self.interval_rate.clone(),
            active_flows: self.active.len(),
        });
    }

    fn finish(&mut self) {
        if self.finished {
            return;
        }
        self.finished = true;
        let end = self.config.duration;
        self.advance(end);
        for id in std::mem::take(&mut self.active) {
            let f = &mut self.flows[id];
            f.close_episode(end);
            f.ended = Some(end);
            f.rate = 0.0;
            self.ended.push(id);
        }
        for l in &mut self.links {
            l.flows.clear();
        }
    }

    /// Runs any remaining ticks with `gate` and returns the log.
    pub fn into_log(mut self, gate: &mut dyn FlowGate) -> SimulationLog {
        while self.next_tick(gate).is_some() {}
        let flows = self
            .flows
            .iter()
            .map(|f| FlowLifetime {
                id: f.id,
                spec: f.spec.clone(),
                path: f.path.iter().map(|h| (h.link, h.dir.index())).collect(),
                start: f.spec.start_time,
                end: f.ended.unwrap_or(self.config.duration),
                bytes: f.bytes,
            })
            .collect();
        SimulationLog {
            config: self.config,
            ticks: self.ticks,
            flows,
            rejected: self.rejected,
            max_capacity_excess: self.max_excess,
        }
    }
}

/// Runs a full simulation, calling `observer` at every sample tick.
pub fn run_simulation(
    topology: Arc<Topology>,
    profile: TrafficProfile,
    config: SimConfig,
    mut observer: impl FnMut(&Simulator, Tick),
) -> Result<SimulationLog> {
    let mut sim = Simulator::new(topology, profile, config)?;
    let mut gate = AdmitAll;
    while let Some(tick) = sim.next_tick(&mut gate) {
        observer(&sim, tick);
    }
    Ok(sim.into_log(&mut gate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_run(seed: u64, secs: f64) -> SimulationLog {
        run_simulation(
            Arc::new(Topology::default_mesh()),
            TrafficProfile::congested(),
            SimConfig::new(seed, secs, 3.0),
            |_, _| {},
        )
        .unwrap()
    }

    #[test]
    fn event_ordering() {
        let mk = |time, kind, seq| SimEvent {
            time,
            kind,
            payload: 0,
            seq,
        };
        let mut v = vec![
            mk(3.0, EventKind::SampleTick, 1),
            mk(3.0, EventKind::FlowStart, 2),
            mk(3.0, EventKind::FlowEnd, 3),
            mk(1.0, EventKind::SampleTick, 4),
            mk(3.0, EventKind::FlowStart, 0),
        ];
        v.sort();
        let kinds: Vec<_> = v.iter().map(|e| (e.time, e.kind, e.seq)).collect();
        assert_eq!(
            kinds,
            vec![
                (1.0, EventKind::SampleTick, 4),
                (3.0, EventKind::FlowEnd, 3),
                (3.0, EventKind::FlowStart, 0),
                (3.0, EventKind::FlowStart, 2),
                (3.0, EventKind::SampleTick, 1),
            ]
        );
    }

    #[test]
    fn idle_network_reports_zero() {
        let mut cfg = SimConfig::new(1, 60.0, 3.0);
        cfg.traffic_enabled = false;
        let log = run_simulation(
            Arc::new(Topology::default_mesh()),
            TrafficProfile::sparse(),
            cfg,
            |_, _| {},
        )
        .unwrap();
        assert_eq!(log.ticks.len(), 20);
        assert!(log
            .ticks
            .iter()
            .all(|t| t.interval_rate.iter().all(|r| r == &[0.0, 0.0])));
        assert!(log.flows.is_empty());
    }

    #[test]
    fn tick_counts() {
        assert_eq!(SimConfig::new(0, 6.0 * 3600.0, 3.0).tick_count(), 7200);
        assert_eq!(SimConfig::new(0, 3.0 * 86400.0, 3.0).tick_count(), 86_400);
        assert_eq!(SimConfig::new(0, 30.0, 3.0).tick_count(), 10);
        assert!(SimConfig::new(0, 3.0, 3.0).validate().is_err());
    }

    #[test]
    fn deterministic_log() {
        assert_eq!(small_run(5, 600.0).to_bytes(), small_run(5, 600.0).to_bytes());
        assert_ne!(small_run(5, 600.0).to_bytes(), small_run(6, 600.0).to_bytes());
    }

    #[test]
    fn capacity_and_lifetimes() {
        let log = small_run(11, 1500.0);
        assert!(log.max_capacity_excess <= 1e-9, "{}", log.max_capacity_excess);
        for f in &log.flows {
            let expect = (f.spec.start_time + f.spec.duration).min(1500.0);
            assert_eq!(f.end, expect);
        }
    }

    #[test]
    fn byte_conservation() {
        // per link direction, counters equal the sum of per-flow deliveries
        let log = small_run(3, 900.0);
        let last = log.ticks.last().unwrap();
        let n = last.bytes.len();
        let mut from_flows = vec![[0.0f64; 2]; n];
        for f in &log.flows {
            // delivered bytes after the last tick would not be in the counter
            if f.end <= last.time {
                for &(l, d) in &f.path {
                    from_flows[l][d] += f.bytes;
                }
            }
        }
        let still_open: Vec<_> = log.flows.iter().filter(|f| f.end > last.time).collect();
        if still_open.is_empty() {
            for l in 0..n {
                for d in 0..2 {
                    let a = last.bytes[l][d];
                    let b = from_flows[l][d];
                    assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn moments_summary() {
        let mut m = Moments::default();
        m.push(2.0, 1.0);
        m.push(4.0, 3.0);
        let (min, mean, max, std) = m.summary();
        assert_eq!((min, max), (2.0, 4.0));
        assert!((mean - 3.5).abs() < 1e-12);
        assert!((std - (0.75f64).sqrt()).abs() < 1e-12);
        assert_eq!(Moments::default().summary(), (0.0, 0.0, 0.0, 0.0));
    }
}
