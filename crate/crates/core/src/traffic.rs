//! Randomized flow generation.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NodeIdx, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    Tcp,
    Udp,
}

impl Protocol {
    /// IANA protocol number.
    pub fn number(self) -> u8 {
        match self {
            Protocol::Tcp => 6,
            Protocol::Udp => 17,
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi <= self.lo {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    fn sample_int<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let lo = self.lo.ceil() as u32;
        let hi = self.hi.floor() as u32;
        if hi <= lo {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }
}

/// The randomized flow parameters. Every field is drawn uniformly except the
/// bitrate, which is Normal and redrawn below `bitrate_floor_bps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficProfile {
    pub name: String,
    pub protocols: Vec<Protocol>,
    pub bitrate_mean_bps: f64,
    pub bitrate_std_bps: f64,
    #[serde(default = "default_floor")]
    pub bitrate_floor_bps: f64,
    pub duration_secs: Range,
    pub packet_length_bytes: Range,
    pub inter_arrival_secs: Range,
    /// `per-server`: every host runs its own arrival clock and is the server
    /// (destination) of the flows it starts, the client drawn uniformly from
    /// the other hosts. `uniform`: one network-wide clock, pair drawn
    /// uniformly over distinct hosts.
    #[serde(default = "default_endpoints")]
    pub endpoints: String,
    pub server_port: Range,
}

fn default_floor() -> f64 {
    100e3
}

pub const PER_SERVER: &str = "per-server";
pub const UNIFORM: &str = "uniform";

fn default_endpoints() -> String {
    PER_SERVER.to_string()
}

impl TrafficProfile {
    /// Table values verbatim: every server starts a flow every 20 to 2000
    /// seconds.
    pub fn sparse() -> Self {
        TrafficProfile {
            name: "sparse".into(),
            protocols: vec![Protocol::Tcp, Protocol::Udp],
            bitrate_mean_bps: 2e6,
            bitrate_std_bps: 500e3,
            bitrate_floor_bps: default_floor(),
            duration_secs: Range::new(30.0, 500.0),
            packet_length_bytes: Range::new(200.0, 1472.0),
            inter_arrival_secs: Range::new(20.0, 2000.0),
            endpoints: default_endpoints(),
            server_port: Range::new(5001.0, 5500.0),
        }
    }

    /// Same flow shape with arrivals dense enough to drive the busiest links
    /// of the bundled topology into saturation.
    pub fn congested() -> Self {
        TrafficProfile {
            name: "congested".into(),
            inter_arrival_secs: Range::new(2.0, 20.0),
            ..Self::sparse()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sparse" => Ok(Self::sparse()),
            "congested" => Ok(Self::congested()),
            other => Err(Error::invalid(
                "traffic profile",
                format!("unknown profile '{other}' (expected 'sparse' or 'congested')"),
            )),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: TrafficProfile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("traffic profile (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid("traffic profile", m));
        if self.protocols.is_empty() {
            return bad("protocols must not be empty".into());
        }
        if !(self.bitrate_mean_bps > 0.0) || !(self.bitrate_std_bps >= 0.0) {
            return bad("bitrate mean must be positive and std non-negative".into());
        }
        if !(self.bitrate_floor_bps > 0.0) || self.bitrate_floor_bps > self.bitrate_mean_bps {
            return bad("bitrate floor must lie in (0, mean]".into());
        }
        for (name, r, lo, hi) in [
            ("duration_secs", self.duration_secs, 30.0, 500.0),
            ("packet_length_bytes", self.packet_length_bytes, 200.0, 1472.0),
            ("server_port", self.server_port, 5001.0, 5500.0),
        ] {
            if r.lo > r.hi || r.lo < lo || r.hi > hi {
                return bad(format!("{name} [{}, {}] must lie within [{lo}, {hi}]", r.lo, r.hi));
            }
        }
        let ia = self.inter_arrival_secs;
        if !(ia.lo > 0.0) || ia.lo > ia.hi {
            return bad("inter_arrival_secs must be a positive interval".into());
        }
        if self.endpoints != PER_SERVER && self.endpoints != UNIFORM {
            return bad(format!("unsupported endpoint distribution '{}'", self.endpoints));
        }
        Ok(())
    }
}

/// One generated flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub protocol: Protocol,
    /// bits per second
    pub target_bitrate: f64,
    /// seconds
    pub duration: f64,
    /// bytes
    pub packet_length: u32,
    pub start_time: f64,
    pub src: NodeIdx,
    pub dst: NodeIdx,
    pub server_port: u16,
}

/// Draws the flow starting at `clock` and returns it with the start time of
/// the next flow.
pub fn generate_flow<R: Rng + ?Sized>(
    rng: &mut R,
    clock: f64,
    params: &TrafficProfile,
    topology: &Topology,
) -> (FlowSpec, f64) {
    generate_flow_to(rng, clock, params, topology, None)
}

/// As [`generate_flow`], with the destination fixed to host number `server`
/// (an index into `topology.hosts`) when given.
pub fn generate_flow_to<R: Rng + ?Sized>(
    rng: &mut R,
    clock: f64,
    params: &TrafficProfile,
    topology: &Topology,
    server: Option<usize>,
) -> (FlowSpec, f64) {
    let protocol = params.protocols[rng.random_range(0..params.protocols.len())];
    let normal = Normal::new(params.bitrate_mean_bps, params.bitrate_std_bps)
        .expect("validated profile");
    let target_bitrate = loop {
        let b = normal.sample(rng);
        if b >= params.bitrate_floor_bps {
            break b;
        }
    };
    let duration = params.duration_secs.sample(rng);
    let packet_length = params.packet_length_bytes.sample_int(rng);
    let hosts = &topology.hosts;
    let (si, di) = match server {
        Some(di) => {
            let mut si = rng.random_range(0..hosts.len() - 1);
            if si >= di {
                si += 1;
            }
            (si, di)
        }
        None => {
            let si = rng.random_range(0..hosts.len());
            let mut di = rng.random_range(0..hosts.len() - 1);
            if di >= si {
                di += 1;
            }
            (si, di)
        }
    };
    let server_port = params.server_port.sample_int(rng) as u16;
    let next = clock + params.inter_arrival_secs.sample(rng);
    (
        FlowSpec {
            protocol,
            target_bitrate,
            duration,
            packet_length,
            start_time: clock,
            src: hosts[si],
            dst: hosts[di],
            server_port,
        },
        next,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bitrate_mean_matches_table() {
        let topo = Topology::default_mesh();
        let p = TrafficProfile::sparse();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let (f, _) = generate_flow(&mut rng, 0.0, &p, &topo);
            assert!(f.target_bitrate >= 100e3);
            sum += f.target_bitrate;
        }
        let mean = sum / n as f64;
        assert!((mean - 2e6).abs() <= 50e3, "mean {mean}");
    }

    #[test]
    fn collapsed_duration_interval() {
        let topo = Topology::default_mesh();
        let mut p = TrafficProfile::sparse();
        p.duration_secs = Range::new(30.0, 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(generate_flow(&mut rng, 0.0, &p, &topo).0.duration, 30.0);
        }
    }

    #[test]
    fn same_seed_same_first_flow() {
        let topo = Topology::default_mesh();
        let p = TrafficProfile::sparse();
        let a = generate_flow(&mut ChaCha8Rng::seed_from_u64(42), 0.0, &p, &topo);
        let b = generate_flow(&mut ChaCha8Rng::seed_from_u64(42), 0.0, &p, &topo);
        assert_eq!(a, b);
    }

    #[test]
    fn draws_respect_ranges() {
        let topo = Topology::default_mesh();
        let p = TrafficProfile::sparse();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut clock = 0.0;
        for _ in 0..2000 {
            let (f, next) = generate_flow(&mut rng, clock, &p, &topo);
            assert!((200..=1472).contains(&f.packet_length));
            assert!((30.0..=500.0).contains(&f.duration));
            assert!((5001..=5500).contains(&f.server_port));
            assert_ne!(f.src, f.dst);
            assert!(topo.hosts.contains(&f.src) && topo.hosts.contains(&f.dst));
            assert!((20.0..=2000.0).contains(&(next - clock)));
            clock = next;
        }
    }

    #[test]
    fn fixed_server_is_destination() {
        let topo = Topology::default_mesh();
        let p = TrafficProfile::sparse();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (f, _) = generate_flow_to(&mut rng, 0.0, &p, &topo, Some(3));
            assert_eq!(f.dst, topo.hosts[3]);
            assert_ne!(f.src, f.dst);
        }
    }

    #[test]
    fn profile_json_roundtrip_and_validation() {
        let text = serde_json::to_string(&TrafficProfile::congested()).unwrap();
        assert_eq!(TrafficProfile::from_json(&text).unwrap(), TrafficProfile::congested());
        let mut bad = TrafficProfile::sparse();
        bad.packet_length_bytes = Range::new(100.0, 1472.0);
        assert!(bad.validate().is_err());
        assert!(TrafficProfile::by_name("bursty").is_err());
    }
}
