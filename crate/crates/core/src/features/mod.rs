//! Per-interface feature rows and training datasets.
//!
//! A row is 86 aggregates over the interface's active flows, the 29 system
//! counters, and the current utilization `max_bitrate`, 116 inputs in all.

mod dataset;
mod io;

use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::telemetry::{FlowRecordView, SystemStats, SYSTEM_COLUMNS};

pub use dataset::{label_and_shift, make_folds, unshift, Dataset, Fold, Scaler};
pub use io::{
    build_from_telemetry, featurize_dir, read_dataset, read_dataset_dir, write_dataset, DatasetSidecar,
    TelemetryFeaturizeReport,
};

pub const AGG_WIDTH: usize = 86;
pub const SYS_WIDTH: usize = 29;
pub const INPUT_WIDTH: usize = AGG_WIDTH + SYS_WIDTH + 1;
pub const TARGET_COLUMN: &str = "future_bitrate";
pub const DEFAULT_OFFSET: usize = 5;

/// Flow fields that are aggregated, in column order.
pub const BASE_FIELDS: [&str; 21] = [
    "total_fpackets",
    "total_fvolume",
    "total_bpackets",
    "total_bvolume",
    "mean_fpktl",
    "std_fpktl",
    "mean_bpktl",
    "std_bpktl",
    "mean_fiat",
    "mean_biat",
    "duration",
    "mean_active",
    "mean_idle",
    "sflow_fpackets",
    "sflow_fbytes",
    "sflow_bpackets",
    "sflow_bbytes",
    "fpsh_cnt",
    "bpsh_cnt",
    "total_fhlen",
    "total_bhlen",
];

const AGG_FUNCS: [&str; 4] = ["min", "max", "mean", "sum"];

fn base_values(f: &FlowRecordView) -> [f64; 21] {
    [
        f.total_fpackets,
        f.total_fvolume,
        f.total_bpackets,
        f.total_bvolume,
        f.mean_fpktl,
        f.std_fpktl,
        f.mean_bpktl,
        f.std_bpktl,
        f.mean_fiat,
        f.mean_biat,
        f.duration,
        f.mean_active,
        f.mean_idle,
        f.sflow_fpackets,
        f.sflow_fbytes,
        f.sflow_bpackets,
        f.sflow_bbytes,
        f.fpsh_cnt,
        f.bpsh_cnt,
        f.total_fhlen,
        f.total_bhlen,
    ]
}

/// Names of the 86 aggregate columns: `<func>_<field>` grouped by field,
/// then the two protocol counts.
pub fn agg_columns() -> &'static [String] {
    static COLS: OnceLock<Vec<String>> = OnceLock::new();
    COLS.get_or_init(|| {
        let mut v: Vec<String> = BASE_FIELDS
            .iter()
            .flat_map(|f| AGG_FUNCS.iter().map(move |g| format!("{g}_{f}")))
            .collect();
        v.push("tcp_flow_count".into());
        v.push("udp_flow_count".into());
        v
    })
}

/// Names of the 116 model inputs.
pub fn input_columns() -> &'static [String] {
    static COLS: OnceLock<Vec<String>> = OnceLock::new();
    COLS.get_or_init(|| {
        let mut v = agg_columns().to_vec();
        v.extend(SYSTEM_COLUMNS.iter().map(|s| s.to_string()));
        v.push("max_bitrate".into());
        v
    })
}

/// Hex SHA-256 over the input column names and the target name.
pub fn schema_hash() -> &'static str {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| {
        let mut h = Sha256::new();
        for c in input_columns() {
            h.update(c.as_bytes());
            h.update(b"\n");
        }
        h.update(TARGET_COLUMN.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    })
}

/// Min, max, mean and sum of each base field plus TCP and UDP flow counts.
/// An empty flow list aggregates to zeros.
pub fn aggregate_flows(flows: &[FlowRecordView]) -> [f64; AGG_WIDTH] {
    let mut out = [0.0; AGG_WIDTH];
    if flows.is_empty() {
        return out;
    }
    let mut min = [f64::INFINITY; 21];
    let mut max = [f64::NEG_INFINITY; 21];
    let mut sum = [0.0; 21];
    let mut tcp = 0.0;
    let mut udp = 0.0;
    for f in flows {
        for (k, v) in base_values(f).into_iter().enumerate() {
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
            sum[k] += v;
        }
        match f.protocol {
            6 => tcp += 1.0,
            17 => udp += 1.0,
            _ => {}
        }
    }
    let n = flows.len() as f64;
    for k in 0..21 {
        out[4 * k] = min[k];
        out[4 * k + 1] = max[k];
        out[4 * k + 2] = (sum[k] / n).clamp(min[k], max[k]);
        out[4 * k + 3] = sum[k];
    }
    out[84] = tcp;
    out[85] = udp;
    out
}

/// One joined row for one interface at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSample {
    pub timestamp: i64,
    pub agg: [f64; AGG_WIDTH],
    pub sys: SystemStats,
    /// `max(download, upload) / capacity`
    pub max_bitrate: f64,
}

impl InterfaceSample {
    /// The 116 model inputs in [`input_columns`] order.
    pub fn inputs(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(INPUT_WIDTH);
        v.extend_from_slice(&self.agg);
        v.extend_from_slice(&self.sys.values());
        v.push(self.max_bitrate);
        v
    }
}

/// Rows kept and dropped while joining flow aggregates with system rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct JoinReport {
    pub joined: usize,
    pub dropped: usize,
}

/// Tolerated timestamp difference between a flow table and a system row.
pub const JOIN_TOLERANCE_SECS: i64 = 1;

/// Concatenates aggregates and system stats. Returns `None` (and counts a
/// drop) if the two timestamps differ by more than one second.
pub fn join_samples(
    agg: &[f64; AGG_WIDTH],
    agg_ts: i64,
    sys: &SystemStats,
    sys_ts: i64,
    capacity: f64,
    report: &mut JoinReport,
) -> Option<InterfaceSample> {
    if (agg_ts - sys_ts).abs() > JOIN_TOLERANCE_SECS {
        report.dropped += 1;
        return None;
    }
    report.joined += 1;
    Some(InterfaceSample {
        timestamp: sys_ts,
        agg: *agg,
        sys: *sys,
        max_bitrate: utilization(sys, capacity),
    })
}

/// Current utilization ratio of an interface from its bitrate counters.
pub fn utilization(sys: &SystemStats, capacity: f64) -> f64 {
    (sys.download_bitrate.max(sys.upload_bitrate) / capacity).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn flow(protocol: u8, fpackets: f64, fvolume: f64) -> FlowRecordView {
        FlowRecordView {
            protocol,
            total_fpackets: fpackets,
            total_fvolume: fvolume,
            ..Default::default()
        }
    }

    #[test]
    fn column_counts() {
        assert_eq!(agg_columns().len(), 86);
        assert_eq!(input_columns().len(), 116);
        assert_eq!(input_columns().last().unwrap(), "max_bitrate");
        let mut unique = input_columns().to_vec();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 116);
        assert_eq!(schema_hash().len(), 64);
    }

    #[test]
    fn empty_flows_aggregate_to_zero() {
        assert_eq!(aggregate_flows(&[]), [0.0; 86]);
    }

    #[test]
    fn singleton_tcp() {
        let a = aggregate_flows(&[flow(6, 100.0, 0.0)]);
        assert_eq!(&a[0..4], &[100.0; 4]);
        assert_eq!((a[84], a[85]), (1.0, 0.0));
    }

    #[test]
    fn two_volumes() {
        let a = aggregate_flows(&[flow(17, 0.0, 1e6), flow(17, 0.0, 3e6)]);
        assert_eq!(&a[4..8], &[1e6, 3e6, 2e6, 4e6]);
        assert_eq!((a[84], a[85]), (0.0, 2.0));
    }

    #[test]
    fn join_and_utilization() {
        let mut sys = SystemStats::from_values([0.0; 29]);
        sys.download_bitrate = 20e6;
        sys.upload_bitrate = 5e6;
        let mut rep = JoinReport::default();
        let s = join_samples(&[0.0; 86], 100, &sys, 100, 100e6, &mut rep).unwrap();
        assert!((s.max_bitrate - 0.2).abs() < 1e-15);
        assert_eq!(s.inputs().len(), 116);
        let idle = SystemStats::from_values([0.0; 29]);
        let s = join_samples(&[0.0; 86], 100, &idle, 101, 100e6, &mut rep).unwrap();
        assert_eq!(s.max_bitrate, 0.0);
        assert!(join_samples(&[0.0; 86], 100, &idle, 106, 100e6, &mut rep).is_none());
        assert_eq!(rep, JoinReport { joined: 2, dropped: 1 });
    }
}
