//! Per-flow meter view.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::Simulator;
use crate::topology::{Dir, Topology};
use crate::traffic::Protocol;

/// TCP header bytes per packet (IP + TCP).
pub const TCP_HEADER_BYTES: f64 = 40.0;
/// UDP header bytes per packet (IP + UDP).
pub const UDP_HEADER_BYTES: f64 = 28.0;
/// Size of a pure ACK.
pub const ACK_BYTES: f64 = 40.0;
/// Forward data packets per acknowledgement.
pub const PACKETS_PER_ACK: f64 = 2.0;

/// The 46 per-flow fields exported at every sample. Times are seconds, sizes
/// bytes. Forward is the direction from the flow's client to its server.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowRecordView {
    pub src_ip: String,
    pub src_port: u16,
    pub dst_ip: String,
    pub dst_port: u16,
    pub protocol: u8,
    pub first_ts: f64,
    pub last_ts: f64,

    pub total_fpackets: f64,
    pub total_fvolume: f64,
    pub total_bpackets: f64,
    pub total_bvolume: f64,

    pub min_fpktl: f64,
    pub mean_fpktl: f64,
    pub max_fpktl: f64,
    pub std_fpktl: f64,
    pub min_bpktl: f64,
    pub mean_bpktl: f64,
    pub max_bpktl: f64,
    pub std_bpktl: f64,
    pub min_fiat: f64,
    pub mean_fiat: f64,
    pub max_fiat: f64,
    pub std_fiat: f64,
    pub min_biat: f64,
    pub mean_biat: f64,
    pub max_biat: f64,
    pub std_biat: f64,

    pub duration: f64,

    pub min_active: f64,
    pub mean_active: f64,
    pub max_active: f64,
    pub std_active: f64,
    pub min_idle: f64,
    pub mean_idle: f64,
    pub max_idle: f64,
    pub std_idle: f64,

    pub sflow_fpackets: f64,
    pub sflow_fbytes: f64,
    pub sflow_bpackets: f64,
    pub sflow_bbytes: f64,

    pub fpsh_cnt: f64,
    pub bpsh_cnt: f64,
    pub furg_cnt: f64,
    pub burg_cnt: f64,

    pub total_fhlen: f64,
    pub total_bhlen: f64,
}

pub const FLOW_COLUMNS: [&str; 46] = [
    "src_ip",
    "src_port",
    "dst_ip",
    "dst_port",
    "protocol",
    "first_ts",
    "last_ts",
    "total_fpackets",
    "total_fvolume",
    "total_bpackets",
    "total_bvolume",
    "min_fpktl",
    "mean_fpktl",
    "max_fpktl",
    "std_fpktl",
    "min_bpktl",
    "mean_bpktl",
    "max_bpktl",
    "std_bpktl",
    "min_fiat",
    "mean_fiat",
    "max_fiat",
    "std_fiat",
    "min_biat",
    "mean_biat",
    "max_biat",
    "std_biat",
    "duration",
    "min_active",
    "mean_active",
    "max_active",
    "std_active",
    "min_idle",
    "mean_idle",
    "max_idle",
    "std_idle",
    "sflow_fpackets",
    "sflow_fbytes",
    "sflow_bpackets",
    "sflow_bbytes",
    "fpsh_cnt",
    "bpsh_cnt",
    "furg_cnt",
    "burg_cnt",
    "total_fhlen",
    "total_bhlen",
];

impl FlowRecordView {
    /// `(min, mean, max, std)` groups that must be internally ordered.
    pub fn distributions(&self) -> [(f64, f64, f64, f64); 6] {
        [
            (self.min_fpktl, self.mean_fpktl, self.max_fpktl, self.std_fpktl),
            (self.min_bpktl, self.mean_bpktl, self.max_bpktl, self.std_bpktl),
            (self.min_fiat, self.mean_fiat, self.max_fiat, self.std_fiat),
            (self.min_biat, self.mean_biat, self.max_biat, self.std_biat),
            (self.min_active, self.mean_active, self.max_active, self.std_active),
            (self.min_idle, self.mean_idle, self.max_idle, self.std_idle),
        ]
    }
}

/// Address assigned to a host: `10.0.0.<n>` by host order.
pub fn host_ip(topology: &Topology, node: usize) -> String {
    let k = topology.hosts.iter().position(|&h| h == node).unwrap_or(0);
    format!("10.0.{}.{}", (k + 1) / 256, (k + 1) % 256)
}

/// Views of every active flow crossing `interface` at the current instant.
pub fn snapshot_flows(sim: &Simulator, interface: &str, epoch_base: f64) -> Result<Vec<FlowRecordView>> {
    let topo = sim.topology();
    let iface = &topo.interfaces[topo.interface(interface)?];
    Ok(snapshot_link(sim, iface.link, epoch_base))
}

pub(crate) fn snapshot_link(sim: &Simulator, link: usize, epoch_base: f64) -> Vec<FlowRecordView> {
    let topo = sim.topology();
    let t = sim.now();
    sim.link(link)
        .flows
        .iter()
        .map(|&id| {
            let f = sim.flow(id);
            let tcp = f.spec.protocol == Protocol::Tcp;
            let len = f.spec.packet_length as f64;
            let exact_fpackets = f.bytes / len;
            let fpackets = exact_fpackets.floor();
            let fvolume = fpackets * len;
            let bpackets = if tcp {
                (exact_fpackets / PACKETS_PER_ACK).floor()
            } else {
                0.0
            };
            let bvolume = bpackets * ACK_BYTES;

            let (min_fiat, mean_fiat, max_fiat, std_fiat) = f.iat.summary();
            let (min_biat, mean_biat, max_biat, std_biat) = if tcp {
                let k = PACKETS_PER_ACK;
                (k * min_fiat, k * mean_fiat, k * max_fiat, k * std_fiat)
            } else {
                (0.0, 0.0, 0.0, 0.0)
            };
            let (fl_min, fl_mean, fl_max) = if fpackets > 0.0 {
                (len, len, len)
            } else {
                (0.0, 0.0, 0.0)
            };
            let bl = if bpackets > 0.0 { ACK_BYTES } else { 0.0 };

            // include the episode in progress
            let mut active = f.active_periods;
            let mut idle = f.idle_periods;
            let open = t - f.episode_start;
            if open > 0.0 {
                if f.episode_active {
                    active.push(open, 1.0);
                } else {
                    idle.push(open, 1.0);
                }
            }
            let (min_active, mean_active, max_active, std_active) = active.summary();
            let (min_idle, mean_idle, max_idle, std_idle) = idle.summary();
            let subflows = active.weight.max(1.0);

            let header = if tcp { TCP_HEADER_BYTES } else { UDP_HEADER_BYTES };
            FlowRecordView {
                src_ip: host_ip(topo, f.spec.src),
                src_port: f.client_port,
                dst_ip: host_ip(topo, f.spec.dst),
                dst_port: f.spec.server_port,
                protocol: f.spec.protocol.number(),
                first_ts: epoch_base + f.spec.start_time,
                last_ts: epoch_base + t,
                total_fpackets: fpackets,
                total_fvolume: fvolume,
                total_bpackets: bpackets,
                total_bvolume: bvolume,
                min_fpktl: fl_min,
                mean_fpktl: fl_mean,
                max_fpktl: fl_max,
                std_fpktl: 0.0,
                min_bpktl: bl,
                mean_bpktl: bl,
                max_bpktl: bl,
                std_bpktl: 0.0,
                min_fiat,
                mean_fiat,
                max_fiat,
                std_fiat,
                min_biat,
                mean_biat,
                max_biat,
                std_biat,
                duration: t - f.spec.start_time,
                min_active,
                mean_active,
                max_active,
                std_active,
                min_idle,
                mean_idle,
                max_idle,
                std_idle,
                sflow_fpackets: fpackets / subflows,
                sflow_fbytes: fvolume / subflows,
                sflow_bpackets: bpackets / subflows,
                sflow_bbytes: bvolume / subflows,
                fpsh_cnt: if tcp { fpackets } else { 0.0 },
                bpsh_cnt: 0.0,
                furg_cnt: 0.0,
                burg_cnt: 0.0,
                total_fhlen: header * fpackets,
                total_bhlen: if tcp { ACK_BYTES * bpackets } else { 0.0 },
            }
        })
        .collect()
}

/// Forward direction of a flow over `link`, if it crosses it.
pub fn flow_direction(sim: &Simulator, flow: usize, link: usize) -> Option<Dir> {
    sim.flow(flow)
        .path
        .iter()
        .find(|h| h.link == link)
        .map(|h| h.dir)
}
