//! Router system counters.
//!
//! There is no operating system under the simulator, so every counter except
//! the interface bitrates is a fixed affine map of router load plus seeded
//! Gaussian noise, clamped non-negative.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::sim::{stream_rng, Simulator, TELEMETRY_STREAM};
use crate::topology::{NodeIdx, Topology};
use crate::traffic::Protocol;

/// 29 system-level fields. Bitrates are bits/s, memory MB, rates per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemStats {
    pub cpu_usr: f64,
    pub cpu_sys: f64,
    pub cpu_idl: f64,
    pub cpu_wai: f64,
    pub cpu_stl: f64,
    pub mem_used: f64,
    pub mem_free: f64,
    pub mem_buff: f64,
    pub mem_cach: f64,
    pub paging_in: f64,
    pub paging_out: f64,
    pub disk_read: f64,
    pub disk_writ: f64,
    pub io_read: f64,
    pub io_writ: f64,
    pub sys_int: f64,
    pub sys_csw: f64,
    pub load_1m: f64,
    pub load_5m: f64,
    pub load_15m: f64,
    pub procs_run: f64,
    pub procs_blk: f64,
    pub procs_new: f64,
    pub swap_used: f64,
    pub swap_free: f64,
    pub tcp_est: f64,
    pub tcp_tw: f64,
    pub download_bitrate: f64,
    pub upload_bitrate: f64,
}

pub const SYSTEM_COLUMNS: [&str; 29] = [
    "cpu_usr",
    "cpu_sys",
    "cpu_idl",
    "cpu_wai",
    "cpu_stl",
    "mem_used",
    "mem_free",
    "mem_buff",
    "mem_cach",
    "paging_in",
    "paging_out",
    "disk_read",
    "disk_writ",
    "io_read",
    "io_writ",
    "sys_int",
    "sys_csw",
    "load_1m",
    "load_5m",
    "load_15m",
    "procs_run",
    "procs_blk",
    "procs_new",
    "swap_used",
    "swap_free",
    "tcp_est",
    "tcp_tw",
    "download_bitrate",
    "upload_bitrate",
];

impl SystemStats {
    pub fn from_values(v: [f64; 29]) -> Self {
        SystemStats {
            cpu_usr: v[0],
            cpu_sys: v[1],
            cpu_idl: v[2],
            cpu_wai: v[3],
            cpu_stl: v[4],
            mem_used: v[5],
            mem_free: v[6],
            mem_buff: v[7],
            mem_cach: v[8],
            paging_in: v[9],
            paging_out: v[10],
            disk_read: v[11],
            disk_writ: v[12],
            io_read: v[13],
            io_writ: v[14],
            sys_int: v[15],
            sys_csw: v[16],
            load_1m: v[17],
            load_5m: v[18],
            load_15m: v[19],
            procs_run: v[20],
            procs_blk: v[21],
            procs_new: v[22],
            swap_used: v[23],
            swap_free: v[24],
            tcp_est: v[25],
            tcp_tw: v[26],
            download_bitrate: v[27],
            upload_bitrate: v[28],
        }
    }

    pub fn values(&self) -> [f64; 29] {
        [
            self.cpu_usr,
            self.cpu_sys,
            self.cpu_idl,
            self.cpu_wai,
            self.cpu_stl,
            self.mem_used,
            self.mem_free,
            self.mem_buff,
            self.mem_cach,
            self.paging_in,
            self.paging_out,
            self.disk_read,
            self.disk_writ,
            self.io_read,
            self.io_writ,
            self.sys_int,
            self.sys_csw,
            self.load_1m,
            self.load_5m,
            self.load_15m,
            self.procs_run,
            self.procs_blk,
            self.procs_new,
            self.swap_used,
            self.swap_free,
            self.tcp_est,
            self.tcp_tw,
            self.download_bitrate,
            self.upload_bitrate,
        ]
    }
}

const MEM_TOTAL_MB: f64 = 2048.0;
const SWAP_TOTAL_MB: f64 = 1024.0;
const TIME_WAIT_SECS: f64 = 60.0;

#[derive(Debug, Clone, Default)]
struct RouterState {
    admissions: u64,
    load: [f64; 3],
    time_wait: VecDeque<f64>,
    /// router-wide fields of the latest tick; bitrates are filled per interface
    stats: Option<SystemStats>,
}

/// Stateful generator of router counters. Draws a fixed number of noise
/// samples per router per tick from its own stream, so the traffic stream is
/// never disturbed.
pub struct SystemSynthesizer {
    rng: ChaCha8Rng,
    noise: f64,
    routers: Vec<RouterState>,
    ended_seen: usize,
}

impl SystemSynthesizer {
    pub fn new(topology: &Topology, seed: u64, noise: f64) -> Self {
        SystemSynthesizer {
            rng: stream_rng(seed, TELEMETRY_STREAM),
            noise,
            routers: vec![RouterState::default(); topology.nodes.len()],
            ended_seen: 0,
        }
    }

    fn gauss(&mut self, sigma: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        z * sigma * self.noise
    }

    /// Updates every router's counters for the current tick.
    pub fn observe(&mut self, sim: &Simulator) {
        let topo = sim.topology();
        let t = sim.now();
        let dt = sim.config().interval;

        // TIME_WAIT bookkeeping from flows that ended since the last tick
        let ended = sim.ended_flows();
        for &id in &ended[self.ended_seen..] {
            let f = sim.flow(id);
            if f.spec.protocol != Protocol::Tcp {
                continue;
            }
            let end = f.ended.unwrap_or(t);
            for r in path_routers(topo, f.spec.src, &f.path) {
                self.routers[r].time_wait.push_back(end);
            }
        }
        self.ended_seen = ended.len();

        let routers: Vec<NodeIdx> = topo.routers().collect();
        for r in routers {
            let mut pps = 0.0;
            let mut flows = 0usize;
            let mut tcp = 0usize;
            for i in topo.router_interfaces(r) {
                let link = topo.interfaces[i].link;
                let inbound = topo.inbound_dir(link, r);
                pps += sim.interval_pps(link, inbound);
                for &id in &sim.link(link).flows {
                    let f = sim.flow(id);
                    if f.path.iter().any(|h| h.link == link && h.dir == inbound) {
                        flows += 1;
                        if f.spec.protocol == Protocol::Tcp {
                            tcp += 1;
                        }
                    }
                }
            }
            let kpps = pps / 1000.0;
            let admissions = sim.admissions(r);
            let new_flows = (admissions - self.routers[r].admissions) as f64;
            self.routers[r].admissions = admissions;
            let new_rate = new_flows / dt;

            let cpu_usr = (5.0 + 0.4 * kpps + self.gauss(1.0)).clamp(0.0, 95.0);
            let cpu_sys = (1.5 + 0.15 * kpps + self.gauss(0.5)).clamp(0.0, 100.0 - cpu_usr);
            let cpu_wai =
                (0.3 + self.gauss(0.2).abs()).clamp(0.0, 100.0 - cpu_usr - cpu_sys);
            let cpu_stl =
                (0.1 + self.gauss(0.05)).clamp(0.0, 100.0 - cpu_usr - cpu_sys - cpu_wai);
            let cpu_idl = (100.0 - cpu_usr - cpu_sys - cpu_wai - cpu_stl).max(0.0);

            let run_queue = (cpu_usr + cpu_sys) / 50.0;
            let state = &mut self.routers[r];
            for (k, window) in [60.0, 300.0, 900.0].iter().enumerate() {
                let a = (-dt / window).exp();
                state.load[k] = a * state.load[k] + (1.0 - a) * run_queue;
            }
            let load = state.load;
            while state.time_wait.front().is_some_and(|&e| e < t - TIME_WAIT_SECS) {
                state.time_wait.pop_front();
            }
            let tcp_tw = state.time_wait.len() as f64;

            let mem_used = (380.0 + 0.05 * flows as f64 + 2.0 * kpps + self.gauss(4.0)).max(0.0);
            let mem_buff = (40.0 + self.gauss(1.0)).max(0.0);
            let mem_cach = (600.0 + 5.0 * load[0] + self.gauss(3.0)).max(0.0);
            let mem_free = (MEM_TOTAL_MB - mem_used - mem_buff - mem_cach).max(0.0);
            let paging_in = self.gauss(2.0).abs();
            let paging_out = self.gauss(1.0).abs();
            let disk_read = self.gauss(1000.0).abs();
            let disk_writ = (2000.0 + 300.0 * new_rate + self.gauss(200.0)).max(0.0);
            let io_read = disk_read / 4096.0;
            let io_writ = (disk_writ / 4096.0 + self.gauss(0.1)).max(0.0);
            let sys_int = (150.0 + pps + self.gauss(20.0)).max(0.0);
            let sys_csw = (300.0 + 0.6 * pps + 20.0 * new_rate + self.gauss(30.0)).max(0.0);
            let procs_run = (1.0 + run_queue + self.gauss(0.3)).max(0.0);
            let procs_blk = self.gauss(0.1).abs();
            let procs_new = (0.5 + 2.0 * new_rate + self.gauss(0.2)).max(0.0);
            let swap_used = (8.0 + self.gauss(0.5)).max(0.0);
            let swap_free = (SWAP_TOTAL_MB - swap_used).max(0.0);

            self.routers[r].stats = Some(SystemStats {
                cpu_usr,
                cpu_sys,
                cpu_idl,
                cpu_wai,
                cpu_stl,
                mem_used,
                mem_free,
                mem_buff,
                mem_cach,
                paging_in,
                paging_out,
                disk_read,
                disk_writ,
                io_read,
                io_writ,
                sys_int,
                sys_csw,
                load_1m: load[0],
                load_5m: load[1],
                load_15m: load[2],
                procs_run,
                procs_blk,
                procs_new,
                swap_used,
                swap_free,
                tcp_est: tcp as f64,
                tcp_tw,
                download_bitrate: 0.0,
                upload_bitrate: 0.0,
            });
        }
    }

    /// Router counters of the latest tick, with the interface's bitrates.
    pub fn stats(&self, sim: &Simulator, interface: usize) -> SystemStats {
        let topo = sim.topology();
        let iface = &topo.interfaces[interface];
        let inbound = topo.inbound_dir(iface.link, iface.router);
        let mut s = self.routers[iface.router]
            .stats
            .expect("observe() runs before stats()");
        s.download_bitrate = sim.interval_rate(iface.link, inbound);
        s.upload_bitrate = sim.interval_rate(iface.link, inbound.reverse());
        s
    }
}

fn path_routers(topo: &Topology, src: NodeIdx, path: &[crate::topology::Hop]) -> Vec<NodeIdx> {
    let mut out = Vec::new();
    let mut at = src;
    for h in path {
        at = topo.peer(h.link, at);
        if topo.nodes[at].kind == crate::topology::NodeKind::Router {
            out.push(at);
        }
    }
    out
}
