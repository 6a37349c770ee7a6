//! Router/host topology, routing tables and monitored interfaces.
//!
//! Topology files are JSON:
//!
//! ```json
//! {
//!   "nodes": [{"id": "r1", "kind": "router"}, {"id": "h1", "kind": "host"}],
//!   "links": [{"id": "h1-r1", "a": "h1", "b": "r1", "capacity_mbps": 100, "latency_ms": 2}],
//!   "paths": {"h1->h2": ["h1-r1", "h2-r1"]},
//!   "alternates": {"h1->h2": [["..."]]}
//! }
//! ```
//!
//! `paths` is optional; missing host pairs are routed by shortest hop count.
//! `alternates` is optional and may be either an explicit map or the string
//! `"derive"`, which enumerates loop-free detours at most one hop longer than
//! the primary route.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The bundled four-router mesh with ten hosts (22 router interfaces).
pub const DEFAULT_TOPOLOGY: &str = include_str!("../data/topology.json");

pub type NodeIdx = usize;
pub type LinkIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Router,
    Host,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Link {
    pub id: String,
    pub a: NodeIdx,
    pub b: NodeIdx,
    /// bits per second
    pub capacity: f64,
    /// seconds
    pub latency: f64,
}

/// Direction of travel over a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Dir {
    AtoB,
    BtoA,
}

impl Dir {
    pub fn index(self) -> usize {
        match self {
            Dir::AtoB => 0,
            Dir::BtoA => 1,
        }
    }

    pub fn reverse(self) -> Dir {
        match self {
            Dir::AtoB => Dir::BtoA,
            Dir::BtoA => Dir::AtoB,
        }
    }
}

/// One traversal of a link in a given direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Hop {
    pub link: LinkIdx,
    pub dir: Dir,
}

impl Hop {
    /// Flat index into per-direction arrays (`2 * link + dir`).
    pub fn slot(self) -> usize {
        2 * self.link + self.dir.index()
    }
}

pub type Path = Vec<Hop>;

/// A router port. Download is traffic arriving at the router over `link`,
/// upload is traffic the router sends out on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interface {
    pub id: String,
    pub router: NodeIdx,
    pub link: LinkIdx,
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub name: String,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub hosts: Vec<NodeIdx>,
    pub interfaces: Vec<Interface>,
    paths: BTreeMap<(NodeIdx, NodeIdx), Path>,
    alternates: BTreeMap<(NodeIdx, NodeIdx), Vec<Path>>,
    node_index: HashMap<String, NodeIdx>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    #[serde(default)]
    name: Option<String>,
    nodes: Vec<NodeFile>,
    links: Vec<LinkFile>,
    #[serde(default)]
    paths: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    alternates: Option<AlternatesFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: String,
    kind: NodeKind,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkFile {
    id: String,
    a: String,
    b: String,
    capacity_mbps: f64,
    latency_ms: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AlternatesFile {
    Derive(String),
    Explicit(BTreeMap<String, Vec<Vec<String>>>),
}

/// Parses and validates a topology file.
pub fn load_topology(text: &str) -> Result<Topology> {
    let file: TopologyFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: format!("topology (line {}, column {})", e.line(), e.column()),
        message: e.to_string(),
    })?;

    let mut nodes = Vec::with_capacity(file.nodes.len());
    let mut node_index = HashMap::new();
    for (i, n) in file.nodes.into_iter().enumerate() {
        if node_index.insert(n.id.clone(), i).is_some() {
            return Err(Error::invalid(
                "topology",
                format!("nodes[{i}]: duplicate node id '{}'", n.id),
            ));
        }
        nodes.push(Node {
            id: n.id,
            kind: n.kind,
        });
    }

    let mut links = Vec::with_capacity(file.links.len());
    let mut link_index = HashMap::new();
    for (i, l) in file.links.into_iter().enumerate() {
        let lookup = |field: &str, id: &str| {
            node_index.get(id).copied().ok_or_else(|| {
                Error::invalid(
                    "topology",
                    format!("links[{i}] ('{}') field '{field}': unknown node '{id}'", l.id),
                )
            })
        };
        let a = lookup("a", &l.a)?;
        let b = lookup("b", &l.b)?;
        if a == b {
            return Err(Error::invalid(
                "topology",
                format!("links[{i}] ('{}'): self-loop on '{}'", l.id, l.a),
            ));
        }
        if !(l.capacity_mbps > 0.0) || !l.capacity_mbps.is_finite() {
            return Err(Error::invalid(
                "topology",
                format!(
                    "links[{i}] ('{}') field 'capacity_mbps': must be positive, got {}",
                    l.id, l.capacity_mbps
                ),
            ));
        }
        if !(l.latency_ms >= 0.0) || !l.latency_ms.is_finite() {
            return Err(Error::invalid(
                "topology",
                format!(
                    "links[{i}] ('{}') field 'latency_ms': must be non-negative, got {}",
                    l.id, l.latency_ms
                ),
            ));
        }
        if link_index.insert(l.id.clone(), i).is_some() {
            return Err(Error::invalid(
                "topology",
                format!("links[{i}]: duplicate link id '{}'", l.id),
            ));
        }
        links.push(Link {
            id: l.id,
            a,
            b,
            capacity: l.capacity_mbps * 1e6,
            latency: l.latency_ms * 1e-3,
        });
    }

    let hosts: Vec<NodeIdx> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.kind == NodeKind::Host)
        .map(|(i, _)| i)
        .collect();

    let mut interfaces = Vec::new();
    for (r, node) in nodes.iter().enumerate() {
        if node.kind != NodeKind::Router {
            continue;
        }
        let mut port = 0;
        for (li, link) in links.iter().enumerate() {
            if link.a == r || link.b == r {
                interfaces.push(Interface {
                    id: format!("{}-eth{port}", node.id),
                    router: r,
                    link: li,
                });
                port += 1;
            }
        }
    }

    let mut topo = Topology {
        name: file.name.unwrap_or_else(|| "unnamed".to_string()),
        nodes,
        links,
        hosts,
        interfaces,
        paths: BTreeMap::new(),
        alternates: BTreeMap::new(),
        node_index,
    };

    for (key, ids) in &file.paths {
        let (s, d) = topo.parse_pair(key, "paths")?;
        let path = topo.resolve_path(s, d, ids, &format!("paths['{key}']"))?;
        topo.paths.insert((s, d), path);
    }
    for &s in &topo.hosts {
        for &d in &topo.hosts {
            if s == d || topo.paths.contains_key(&(s, d)) {
                continue;
            }
            let path = topo.shortest_path(s, d).ok_or_else(|| {
                Error::invalid(
                    "topology",
                    format!(
                        "no route from '{}' to '{}'",
                        topo.nodes[s].id, topo.nodes[d].id
                    ),
                )
            })?;
            topo.paths.insert((s, d), path);
        }
    }

    match file.alternates {
        None => {}
        Some(AlternatesFile::Derive(s)) if s == "derive" => topo.derive_alternates(1),
        Some(AlternatesFile::Derive(s)) => {
            return Err(Error::invalid(
                "topology",
                format!("field 'alternates': expected \"derive\" or a map, got \"{s}\""),
            ))
        }
        Some(AlternatesFile::Explicit(map)) => {
            for (key, routes) in &map {
                let (s, d) = topo.parse_pair(key, "alternates")?;
                let mut resolved = Vec::new();
                for (j, ids) in routes.iter().enumerate() {
                    resolved.push(topo.resolve_path(
                        s,
                        d,
                        ids,
                        &format!("alternates['{key}'][{j}]"),
                    )?);
                }
                topo.alternates.insert((s, d), resolved);
            }
        }
    }

    Ok(topo)
}

impl Topology {
    /// The bundled default topology.
    pub fn default_mesh() -> Topology {
        load_topology(DEFAULT_TOPOLOGY).expect("bundled topology is valid")
    }

    pub fn node(&self, id: &str) -> Option<NodeIdx> {
        self.node_index.get(id).copied()
    }

    pub fn link_by_id(&self, id: &str) -> Option<LinkIdx> {
        self.links.iter().position(|l| l.id == id)
    }

    pub fn interface(&self, id: &str) -> Result<usize> {
        self.interfaces
            .iter()
            .position(|i| i.id == id)
            .ok_or_else(|| Error::UnknownInterface(id.to_string()))
    }

    /// Primary route between two hosts.
    pub fn path(&self, src: NodeIdx, dst: NodeIdx) -> Option<&Path> {
        self.paths.get(&(src, dst))
    }

    pub fn alternates(&self, src: NodeIdx, dst: NodeIdx) -> &[Path] {
        self.alternates
            .get(&(src, dst))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn has_alternates(&self) -> bool {
        self.alternates.values().any(|v| !v.is_empty())
    }

    /// Number of host pairs with a routed primary path.
    pub fn route_count(&self) -> usize {
        self.paths.len()
    }

    /// Direction in which traffic enters `router` over `link`.
    pub fn inbound_dir(&self, link: LinkIdx, router: NodeIdx) -> Dir {
        if self.links[link].b == router {
            Dir::AtoB
        } else {
            Dir::BtoA
        }
    }

    /// The other endpoint of a link.
    pub fn peer(&self, link: LinkIdx, node: NodeIdx) -> NodeIdx {
        let l = &self.links[link];
        if l.a == node {
            l.b
        } else {
            l.a
        }
    }

    /// Interfaces on a given router.
    pub fn router_interfaces(&self, router: NodeIdx) -> impl Iterator<Item = usize> + '_ {
        self.interfaces
            .iter()
            .enumerate()
            .filter(move |(_, i)| i.router == router)
            .map(|(k, _)| k)
    }

    /// Routers in node order.
    pub fn routers(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Router)
            .map(|(i, _)| i)
    }

    /// Replaces alternates with all loop-free host-to-host routes at most
    /// `slack` hops longer than the primary, excluding the primary itself.
    pub fn derive_alternates(&mut self, slack: usize) {
        let mut alternates = BTreeMap::new();
        for (&(s, d), primary) in &self.paths {
            let limit = primary.len() + slack;
            let mut found = Vec::new();
            let mut visited = vec![false; self.nodes.len()];
            let mut stack = Vec::new();
            visited[s] = true;
            self.enumerate_paths(s, d, limit, &mut visited, &mut stack, &mut found);
            found.retain(|p| p != primary);
            found.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
            alternates.insert((s, d), found);
        }
        self.alternates = alternates;
    }

    fn enumerate_paths(
        &self,
        at: NodeIdx,
        dst: NodeIdx,
        limit: usize,
        visited: &mut [bool],
        stack: &mut Vec<Hop>,
        out: &mut Vec<Path>,
    ) {
        if at == dst {
            out.push(stack.clone());
            return;
        }
        if stack.len() >= limit {
            return;
        }
        // hosts only terminate routes
        if !stack.is_empty() && self.nodes[at].kind == NodeKind::Host {
            return;
        }
        for (li, link) in self.links.iter().enumerate() {
            let (next, dir) = if link.a == at {
                (link.b, Dir::AtoB)
            } else if link.b == at {
                (link.a, Dir::BtoA)
            } else {
                continue;
            };
            if visited[next] {
                continue;
            }
            visited[next] = true;
            stack.push(Hop { link: li, dir });
            self.enumerate_paths(next, dst, limit, visited, stack, out);
            stack.pop();
            visited[next] = false;
        }
    }

    fn shortest_path(&self, src: NodeIdx, dst: NodeIdx) -> Option<Path> {
        let mut prev: Vec<Option<(NodeIdx, Hop)>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        seen[src] = true;
        queue.push_back(src);
        while let Some(at) = queue.pop_front() {
            if at == dst {
                break;
            }
            if at != src && self.nodes[at].kind == NodeKind::Host {
                continue;
            }
            for (li, link) in self.links.iter().enumerate() {
                let (next, dir) = if link.a == at {
                    (link.b, Dir::AtoB)
                } else if link.b == at {
                    (link.a, Dir::BtoA)
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    prev[next] = Some((at, Hop { link: li, dir }));
                    queue.push_back(next);
                }
            }
        }
        if !seen[dst] {
            return None;
        }
        let mut path = Vec::new();
        let mut at = dst;
        while at != src {
            let (p, hop) = prev[at]?;
            path.push(hop);
            at = p;
        }
        path.reverse();
        Some(path)
    }

    fn parse_pair(&self, key: &str, field: &str) -> Result<(NodeIdx, NodeIdx)> {
        let (s, d) = key.split_once("->").ok_or_else(|| {
            Error::invalid(
                "topology",
                format!("field '{field}': key '{key}' is not of the form 'src->dst'"),
            )
        })?;
        let find = |id: &str| {
            self.node(id.trim()).ok_or_else(|| {
                Error::invalid(
                    "topology",
                    format!("field '{field}' key '{key}': unknown node '{}'", id.trim()),
                )
            })
        };
        Ok((find(s)?, find(d)?))
    }

    fn resolve_path(
        &self,
        src: NodeIdx,
        dst: NodeIdx,
        ids: &[String],
        context: &str,
    ) -> Result<Path> {
        let mut at = src;
        let mut path = Vec::with_capacity(ids.len());
        for id in ids {
            let li = self.link_by_id(id).ok_or_else(|| {
                Error::invalid("topology", format!("{context}: unknown link '{id}'"))
            })?;
            let link = &self.links[li];
            let dir = if link.a == at {
                Dir::AtoB
            } else if link.b == at {
                Dir::BtoA
            } else {
                return Err(Error::invalid(
                    "topology",
                    format!(
                        "{context}: link '{id}' does not touch node '{}'",
                        self.nodes[at].id
                    ),
                ));
            };
            path.push(Hop { link: li, dir });
            at = self.peer(li, at);
        }
        if at != dst || path.is_empty() {
            return Err(Error::invalid(
                "topology",
                format!("{context}: route does not end at '{}'", self.nodes[dst].id),
            ));
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "nodes": [
            {"id": "h1", "kind": "host"},
            {"id": "r1", "kind": "router"},
            {"id": "h2", "kind": "host"}
        ],
        "links": [
            {"id": "a", "a": "h1", "b": "r1", "capacity_mbps": 100, "latency_ms": 2},
            {"id": "b", "a": "r1", "b": "h2", "capacity_mbps": 100, "latency_ms": 2}
        ]
    }"#;

    #[test]
    fn smallest_connected_topology() {
        let t = load_topology(SMALL).unwrap();
        let h1 = t.node("h1").unwrap();
        let h2 = t.node("h2").unwrap();
        let p = t.path(h1, h2).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0], Hop { link: 0, dir: Dir::AtoB });
        assert_eq!(p[1], Hop { link: 1, dir: Dir::AtoB });
        assert_eq!(t.path(h2, h1).unwrap()[0].dir, Dir::BtoA);
        assert_eq!(t.interfaces.len(), 2);
        assert_eq!(t.links[0].capacity, 1e8);
        assert_eq!(t.links[0].latency, 2e-3);
    }

    #[test]
    fn default_topology_has_22_interfaces() {
        let t = Topology::default_mesh();
        assert_eq!(t.interfaces.len(), 22);
        assert_eq!(t.hosts.len(), 10);
        assert_eq!(t.route_count(), 90);
        assert!(t.links.iter().all(|l| l.capacity == 1e8 && l.latency == 2e-3));
        assert!(t.has_alternates());
        let h1 = t.node("h1").unwrap();
        let h5 = t.node("h5").unwrap();
        // direct r1-r2 plus detours through r3 and r4
        assert_eq!(t.path(h1, h5).unwrap().len(), 3);
        assert_eq!(t.alternates(h1, h5).len(), 2);
    }

    #[test]
    fn dangling_node_reference_is_named() {
        let text = SMALL.replace(r#""b": "h2""#, r#""b": "r9""#);
        let err = load_topology(&text).unwrap_err().to_string();
        assert!(err.contains("r9"), "{err}");
        assert!(err.contains("links[1]"), "{err}");
    }

    #[test]
    fn nonpositive_capacity_rejected() {
        let text = SMALL.replacen(r#""capacity_mbps": 100"#, r#""capacity_mbps": 0"#, 1);
        let err = load_topology(&text).unwrap_err().to_string();
        assert!(err.contains("capacity_mbps"), "{err}");
    }

    #[test]
    fn parse_error_carries_position() {
        let err = load_topology("{\n  \"nodes\": [,]\n}").unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn explicit_path_must_connect() {
        let text = SMALL.replace(
            r#""links": ["#,
            r#""paths": {"h1->h2": ["b"]}, "links": ["#,
        );
        let err = load_topology(&text).unwrap_err().to_string();
        assert!(err.contains("does not touch"), "{err}");
    }

    #[test]
    fn inbound_direction() {
        let t = load_topology(SMALL).unwrap();
        let r1 = t.node("r1").unwrap();
        assert_eq!(t.inbound_dir(0, r1), Dir::AtoB);
        assert_eq!(t.inbound_dir(1, r1), Dir::BtoA);
    }
}
