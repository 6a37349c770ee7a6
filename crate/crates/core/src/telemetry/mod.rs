//! Flow-meter and system-counter telemetry sampled from the simulator.
//!
//! Layout on disk, per interface:
//!
//! ```text
//! <out>/<interface-id>/flows_<ts>.csv   one row per active flow, 46 columns
//! <out>/<interface-id>/system.csv       one row per tick, timestamp + 29 columns
//! <out>/interfaces.json                 interface -> router, link, capacity
//! ```

mod flows;
mod system;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use flows::{
    flow_direction, host_ip, snapshot_flows, FlowRecordView, ACK_BYTES, FLOW_COLUMNS,
    PACKETS_PER_ACK, TCP_HEADER_BYTES, UDP_HEADER_BYTES,
};
pub use system::{SystemStats, SystemSynthesizer, SYSTEM_COLUMNS};

use crate::error::{Error, Result};
use crate::sim::Simulator;

pub const DEFAULT_EPOCH_BASE: i64 = 1_500_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelemetryConfig {
    /// timestamp of simulated time zero
    pub epoch_base: i64,
    /// multiplier on every system-counter noise sigma (0 disables noise)
    pub noise: f64,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        TelemetryConfig {
            epoch_base: DEFAULT_EPOCH_BASE,
            noise: 1.0,
        }
    }
}

/// One interface's telemetry at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTelemetry {
    pub interface: usize,
    pub timestamp: i64,
    pub flows: Vec<FlowRecordView>,
    pub system: SystemStats,
}

/// Produces telemetry for a set of interfaces at each tick.
pub struct TelemetrySampler {
    config: TelemetryConfig,
    system: SystemSynthesizer,
    interfaces: Vec<usize>,
}

impl TelemetrySampler {
    /// `interfaces` are indices into the topology's interface list.
    pub fn new(sim: &Simulator, interfaces: Vec<usize>, config: TelemetryConfig) -> Self {
        TelemetrySampler {
            system: SystemSynthesizer::new(sim.topology(), sim.config().seed, config.noise),
            config,
            interfaces,
        }
    }

    pub fn interfaces(&self) -> &[usize] {
        &self.interfaces
    }

    pub fn timestamp(&self, t: f64) -> i64 {
        self.config.epoch_base + t.round() as i64
    }

    /// Must be called exactly once per tick, in tick order.
    pub fn sample(&mut self, sim: &Simulator) -> Vec<InterfaceTelemetry> {
        self.system.observe(sim);
        let ts = self.timestamp(sim.now());
        let base = self.config.epoch_base as f64;
        self.interfaces
            .iter()
            .map(|&i| InterfaceTelemetry {
                interface: i,
                timestamp: ts,
                flows: flows::snapshot_link(sim, sim.topology().interfaces[i].link, base),
                system: self.system.stats(sim, i),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceMeta {
    pub id: String,
    pub router: String,
    pub link: String,
    /// bits per second
    pub capacity: f64,
}

/// Writes telemetry into the per-interface directory layout.
pub struct TelemetryWriter {
    root: PathBuf,
    system: Vec<csv::Writer<fs::File>>,
    dirs: Vec<PathBuf>,
}

impl TelemetryWriter {
    pub fn create(root: &Path, sim: &Simulator, interfaces: &[usize]) -> Result<Self> {
        let topo = sim.topology();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let meta: Vec<InterfaceMeta> = interfaces
            .iter()
            .map(|&i| {
                let iface = &topo.interfaces[i];
                let link = &topo.links[iface.link];
                InterfaceMeta {
                    id: iface.id.clone(),
                    router: topo.nodes[iface.router].id.clone(),
                    link: link.id.clone(),
                    capacity: link.capacity,
                }
            })
            .collect();
        let meta_path = root.join("interfaces.json");
        fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?)
            .map_err(|e| Error::io(&meta_path, e))?;

        let mut system = Vec::new();
        let mut dirs = Vec::new();
        for m in &meta {
            let dir = root.join(&m.id);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let path = dir.join("system.csv");
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = csv::Writer::from_writer(file);
            let mut header = vec!["timestamp"];
            header.extend_from_slice(&SYSTEM_COLUMNS);
            w.write_record(&header)?;
            system.push(w);
            dirs.push(dir);
        }
        Ok(TelemetryWriter {
            root: root.to_path_buf(),
            system,
            dirs,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `batch` must list interfaces in the order given to [`create`](Self::create).
    pub fn write(&mut self, batch: &[InterfaceTelemetry]) -> Result<()> {
        for (k, rec) in batch.iter().enumerate() {
            let path = self.dirs[k].join(format!("flows_{}.csv", rec.timestamp));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_flows(file, &rec.flows)?;
            let w = &mut self.system[k];
            let mut row = vec![rec.timestamp.to_string()];
            row.extend(rec.system.values().iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        for w in &mut self.system {
            w.flush().map_err(|e| Error::io(&self.root, e))?;
        }
        Ok(())
    }
}

/// Writes a flow table with its header row (also when empty).
pub fn write_flows<W: Write>(out: W, flows: &[FlowRecordView]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(FLOW_COLUMNS)?;
    for f in flows {
        w.serialize(f)?;
    }
    w.flush().map_err(|e| Error::io("<flow table>", e))?;
    Ok(())
}

pub fn read_flows(path: &Path) -> Result<Vec<FlowRecordView>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Reads `system.csv` into `(timestamp, stats)` rows.
pub fn read_system(path: &Path) -> Result<Vec<(i64, SystemStats)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Parse {
            context: format!("{} row {}", path.display(), line + 2),
            message: what.to_string(),
        };
        if row.len() != 1 + SYSTEM_COLUMNS.len() {
            return Err(bad("expected timestamp plus 29 columns"));
        }
        let ts: i64 = row[0].parse().map_err(|_| bad("bad timestamp"))?;
        let mut values = [0.0; 29];
        for (k, v) in values.iter_mut().enumerate() {
            *v = row[k + 1].parse().map_err(|_| bad(SYSTEM_COLUMNS[k]))?;
        }
        out.push((ts, SystemStats::from_values(values)));
    }
    Ok(out)
}

pub fn read_interface_meta(root: &Path) -> Result<Vec<InterfaceMeta>> {
    let path = root.join("interfaces.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Lists `(timestamp, path)` for every flow table of one interface, sorted.
pub fn list_flow_tables(dir: &Path) -> Result<Vec<(i64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(ts) = name
            .strip_prefix("flows_")
            .and_then(|s| s.strip_suffix(".csv"))
        {
            let ts: i64 = ts.parse().map_err(|_| Error::Parse {
                context: entry.path().display().to_string(),
                message: "flow table name is not flows_<timestamp>.csv".into(),
            })?;
            out.push((ts, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}
