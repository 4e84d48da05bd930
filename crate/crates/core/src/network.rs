//! Network domain types: links with triangular fundamental diagrams, nodes with
//! junction priorities, paths, and O-D pairs.
//!
//! Raw records (as read from disk) are turned into an indexed [`Network`] by
//! [`validate_network`]. Internally every quantity is in meters, seconds and vehicles.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Source priority assumed for origin nodes that do not specify one.
pub const DEFAULT_SOURCE_PRIORITY: f64 = 0.5;

/// Ratio `v / w` used when a link has no explicit backward wave speed.
pub const DEFAULT_SPEED_RATIO: f64 = 3.0;

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(NodeId);
id_type!(LinkId);
id_type!(PathId);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("empty network: no links")]
    EmptyNetwork,
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u32 },
    #[error("nonpositive physical parameter: {field} = {value} on link {link}")]
    NonpositiveParameter {
        link: LinkId,
        field: &'static str,
        value: f64,
    },
    #[error("nonpositive physical parameter: {field} = {value}")]
    NonpositiveInput { field: &'static str, value: f64 },
    #[error("dangling link endpoint: link {link} references unknown node {node}")]
    DanglingEndpoint { link: LinkId, node: NodeId },
    #[error("link {0} is a self-loop")]
    SelfLoop(LinkId),
    #[error("node {node}: source priority {value} outside [0, 1]")]
    PriorityOutOfRange { node: NodeId, value: f64 },
    #[error("path {path} is empty")]
    EmptyPath { path: PathId },
    #[error("path {path} references unknown link {link}")]
    UnknownLink { path: PathId, link: LinkId },
    #[error("disconnected path {path}: link {next} does not start where link {prev} ends")]
    DisconnectedPath {
        path: PathId,
        prev: LinkId,
        next: LinkId,
    },
    #[error("path {path} repeats link {link}")]
    RepeatedLink { path: PathId, link: LinkId },
    #[error("path/O-D mismatch on path {path}: {reason}")]
    OdMismatch { path: PathId, reason: String },
    #[error("O-D ({origin}, {destination}): {reason}")]
    InvalidOd {
        origin: NodeId,
        destination: NodeId,
        reason: String,
    },
    #[error("density {density} outside [0, {jam}]")]
    DensityOutOfRange { density: f64, jam: f64 },
    #[error("invalid time grid: t0 = {t0_s}, tf = {tf_s}, dt = {dt_s}")]
    InvalidGrid { t0_s: f64, tf_s: f64, dt_s: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNode {
    pub id: NodeId,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub y: Option<f64>,
    #[serde(default)]
    pub origin: bool,
    #[serde(default)]
    pub destination: bool,
    #[serde(default)]
    pub source_priority: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLink {
    pub id: LinkId,
    pub tail: NodeId,
    pub head: NodeId,
    pub length_m: f64,
    pub free_speed_mps: f64,
    pub capacity_vps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward_speed_mps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPath {
    pub id: PathId,
    pub links: Vec<LinkId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOd {
    pub origin: NodeId,
    pub destination: NodeId,
    pub demand_veh: f64,
    pub target_arrival_s: f64,
}

/// Triangular fundamental-diagram parameters derived from the link inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdParams {
    pub backward_speed_mps: f64,
    pub critical_density_vpm: f64,
    pub jam_density_vpm: f64,
}

/// Derives `(w, ρc, ρjam)` from length, free speed, capacity and an optional backward speed.
///
/// Without an explicit backward speed, `w = v / 3`.
pub fn derive_fd(
    length_m: f64,
    free_speed_mps: f64,
    capacity_vps: f64,
    backward_speed_mps: Option<f64>,
) -> Result<FdParams, NetworkError> {
    let positive = |field: &'static str, value: f64| {
        if value > 0.0 && value.is_finite() {
            Ok(value)
        } else {
            Err(NetworkError::NonpositiveInput { field, value })
        }
    };
    positive("length_m", length_m)?;
    let v = positive("free_speed_mps", free_speed_mps)?;
    let c = positive("capacity_vps", capacity_vps)?;
    let w = positive(
        "backward_speed_mps",
        backward_speed_mps.unwrap_or(v / DEFAULT_SPEED_RATIO),
    )?;
    let critical = c / v;
    Ok(FdParams {
        backward_speed_mps: w,
        critical_density_vpm: critical,
        jam_density_vpm: critical * (1.0 + v / w),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub tail: NodeId,
    pub head: NodeId,
    pub length_m: f64,
    pub free_speed_mps: f64,
    pub backward_speed_mps: f64,
    pub capacity_vps: f64,
    pub critical_density_vpm: f64,
    pub jam_density_vpm: f64,
    pub(crate) tail_idx: usize,
    pub(crate) head_idx: usize,
}

impl Link {
    /// Builds a standalone link (endpoints unresolved). Mostly useful in tests.
    pub fn new(
        id: LinkId,
        length_m: f64,
        free_speed_mps: f64,
        capacity_vps: f64,
        backward_speed_mps: Option<f64>,
    ) -> Result<Self, NetworkError> {
        let fd = derive_fd(length_m, free_speed_mps, capacity_vps, backward_speed_mps)?;
        Ok(Link {
            id,
            tail: NodeId(0),
            head: NodeId(0),
            length_m,
            free_speed_mps,
            backward_speed_mps: fd.backward_speed_mps,
            capacity_vps,
            critical_density_vpm: fd.critical_density_vpm,
            jam_density_vpm: fd.jam_density_vpm,
            tail_idx: 0,
            head_idx: 0,
        })
    }

    pub fn free_flow_time(&self) -> f64 {
        self.length_m / self.free_speed_mps
    }

    /// Time for a backward wave to cross the link, `L / w`.
    pub fn wave_time(&self) -> f64 {
        self.length_m / self.backward_speed_mps
    }

    /// Vehicles the link holds at jam density.
    pub fn storage(&self) -> f64 {
        self.jam_density_vpm * self.length_m
    }

    pub fn tail_index(&self) -> usize {
        self.tail_idx
    }

    pub fn head_index(&self) -> usize {
        self.head_idx
    }

    /// Triangular fundamental diagram.
    pub fn fd_flow(&self, density: f64) -> Result<f64, NetworkError> {
        let jam = self.jam_density_vpm;
        // Accept a rounding sliver above jam density.
        if !(density >= 0.0 && density <= jam * (1.0 + 1e-12)) {
            return Err(NetworkError::DensityOutOfRange { density, jam });
        }
        Ok(if density <= self.critical_density_vpm {
            self.free_speed_mps * density
        } else {
            (self.backward_speed_mps * (jam - density)).max(0.0)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub coord: Option<(f64, f64)>,
    /// Indices into [`Network::links`].
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
    pub origin: bool,
    pub destination: bool,
    /// User-supplied source priority (meaningful only for origins).
    pub source_priority: f64,
    /// Materialized merge priority of each incoming link, aligned with `incoming`.
    pub incoming_priority: Vec<f64>,
    /// Merge priority of the origin source, when the node is an origin.
    pub source_share: Option<f64>,
}

impl Node {
    /// Priorities in junction order: incoming links, then the source if any.
    pub fn junction_priorities(&self) -> Vec<f64> {
        let mut p = self.incoming_priority.clone();
        if let Some(s) = self.source_share {
            p.push(s);
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub id: PathId,
    pub od: usize,
    /// Indices into [`Network::links`], in travel order.
    pub links: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdPair {
    pub origin: NodeId,
    pub destination: NodeId,
    pub demand_veh: f64,
    pub target_arrival_s: f64,
    /// Indices into [`Network::paths`].
    pub paths: Vec<usize>,
}

/// Validated, cross-referenced network. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub paths: Vec<Path>,
    pub ods: Vec<OdPair>,
    node_index: HashMap<NodeId, usize>,
    link_index: HashMap<LinkId, usize>,
    path_index: HashMap<PathId, usize>,
}

impl Network {
    pub fn node_idx(&self, id: NodeId) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn link_idx(&self, id: LinkId) -> Option<usize> {
        self.link_index.get(&id).copied()
    }

    pub fn path_idx(&self, id: PathId) -> Option<usize> {
        self.path_index.get(&id).copied()
    }

    pub fn path_link_ids(&self, path: usize) -> Vec<LinkId> {
        self.paths[path].links.iter().map(|&l| self.links[l].id).collect()
    }

    /// Free-flow traversal time of a path, `Σ L / v`.
    pub fn path_free_flow_time(&self, path: usize) -> f64 {
        self.paths[path]
            .links
            .iter()
            .map(|&l| self.links[l].free_flow_time())
            .sum()
    }

    pub fn min_free_flow_time(&self) -> f64 {
        self.links
            .iter()
            .map(Link::free_flow_time)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn od_of_path(&self, path: usize) -> &OdPair {
        &self.ods[self.paths[path].od]
    }

    /// Returns the raw records this network was built from, with every default made explicit.
    pub fn to_raw(&self) -> (Vec<RawNode>, Vec<RawLink>, Vec<RawPath>, Vec<RawOd>) {
        let nodes = self
            .nodes
            .iter()
            .map(|n| RawNode {
                id: n.id,
                x: n.coord.map(|c| c.0),
                y: n.coord.map(|c| c.1),
                origin: n.origin,
                destination: n.destination,
                source_priority: Some(n.source_priority),
            })
            .collect();
        let links = self
            .links
            .iter()
            .map(|l| RawLink {
                id: l.id,
                tail: l.tail,
                head: l.head,
                length_m: l.length_m,
                free_speed_mps: l.free_speed_mps,
                capacity_vps: l.capacity_vps,
                backward_speed_mps: Some(l.backward_speed_mps),
            })
            .collect();
        let paths = self
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| RawPath {
                id: p.id,
                links: self.path_link_ids(i),
            })
            .collect();
        let ods = self
            .ods
            .iter()
            .map(|o| RawOd {
                origin: o.origin,
                destination: o.destination,
                demand_veh: o.demand_veh,
                target_arrival_s: o.target_arrival_s,
            })
            .collect();
        (nodes, links, paths, ods)
    }
}

/// Builds an indexed network from raw records and checks every structural invariant.
///
/// O-D pairs are keyed by `(origin, destination)`. Paths whose endpoints match no
/// supplied O-D record get an implicit zero-demand pair (the loading-only case).
pub fn validate_network(
    raw_nodes: &[RawNode],
    raw_links: &[RawLink],
    raw_paths: &[RawPath],
    raw_ods: &[RawOd],
) -> Result<Network, NetworkError> {
    if raw_links.is_empty() {
        return Err(NetworkError::EmptyNetwork);
    }

    let mut node_index = HashMap::with_capacity(raw_nodes.len());
    let mut nodes = Vec::with_capacity(raw_nodes.len());
    for rn in raw_nodes {
        if node_index.insert(rn.id, nodes.len()).is_some() {
            return Err(NetworkError::DuplicateId {
                kind: "node",
                id: rn.id.0,
            });
        }
        let source_priority = rn.source_priority.unwrap_or(DEFAULT_SOURCE_PRIORITY);
        if !(0.0..=1.0).contains(&source_priority) {
            return Err(NetworkError::PriorityOutOfRange {
                node: rn.id,
                value: source_priority,
            });
        }
        nodes.push(Node {
            id: rn.id,
            coord: rn.x.zip(rn.y),
            incoming: Vec::new(),
            outgoing: Vec::new(),
            origin: rn.origin,
            destination: rn.destination,
            source_priority,
            incoming_priority: Vec::new(),
            source_share: None,
        });
    }

    let mut link_index = HashMap::with_capacity(raw_links.len());
    let mut links = Vec::with_capacity(raw_links.len());
    for rl in raw_links {
        if link_index.insert(rl.id, links.len()).is_some() {
            return Err(NetworkError::DuplicateId {
                kind: "link",
                id: rl.id.0,
            });
        }
        let check = |field: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(NetworkError::NonpositiveParameter {
                    link: rl.id,
                    field,
                    value,
                })
            }
        };
        check("length_m", rl.length_m)?;
        check("free_speed_mps", rl.free_speed_mps)?;
        check("capacity_vps", rl.capacity_vps)?;
        if let Some(w) = rl.backward_speed_mps {
            check("backward_speed_mps", w)?;
        }
        let fd = derive_fd(
            rl.length_m,
            rl.free_speed_mps,
            rl.capacity_vps,
            rl.backward_speed_mps,
        )
        .map_err(|e| match e {
            NetworkError::NonpositiveInput { field, value } => NetworkError::NonpositiveParameter {
                link: rl.id,
                field,
                value,
            },
            other => other,
        })?;
        let tail_idx = *node_index
            .get(&rl.tail)
            .ok_or(NetworkError::DanglingEndpoint {
                link: rl.id,
                node: rl.tail,
            })?;
        let head_idx = *node_index
            .get(&rl.head)
            .ok_or(NetworkError::DanglingEndpoint {
                link: rl.id,
                node: rl.head,
            })?;
        if tail_idx == head_idx {
            return Err(NetworkError::SelfLoop(rl.id));
        }
        let idx = links.len();
        nodes[tail_idx].outgoing.push(idx);
        nodes[head_idx].incoming.push(idx);
        links.push(Link {
            id: rl.id,
            tail: rl.tail,
            head: rl.head,
            length_m: rl.length_m,
            free_speed_mps: rl.free_speed_mps,
            backward_speed_mps: fd.backward_speed_mps,
            capacity_vps: rl.capacity_vps,
            critical_density_vpm: fd.critical_density_vpm,
            jam_density_vpm: fd.jam_density_vpm,
            tail_idx,
            head_idx,
        });
    }

    for node in &mut nodes {
        let cap_total: f64 = node
            .incoming
            .iter()
            .map(|&l| links[l].capacity_vps)
            .sum();
        let (share_links, source_share) = match (node.origin, node.incoming.is_empty()) {
            (true, true) => (0.0, Some(1.0)),
            (true, false) => (1.0 - node.source_priority, Some(node.source_priority)),
            (false, _) => (1.0, None),
        };
        node.incoming_priority = node
            .incoming
            .iter()
            .map(|&l| share_links * links[l].capacity_vps / cap_total)
            .collect();
        node.source_share = source_share;
    }

    let mut od_index: HashMap<(NodeId, NodeId), usize> = HashMap::new();
    let mut ods = Vec::with_capacity(raw_ods.len());
    for ro in raw_ods {
        let key = (ro.origin, ro.destination);
        let bad = |reason: String| NetworkError::InvalidOd {
            origin: ro.origin,
            destination: ro.destination,
            reason,
        };
        if od_index.contains_key(&key) {
            return Err(bad("duplicate O-D record".into()));
        }
        if !(ro.demand_veh >= 0.0 && ro.demand_veh.is_finite()) {
            return Err(bad(format!("demand {} is not a nonnegative number", ro.demand_veh)));
        }
        if !ro.target_arrival_s.is_finite() {
            return Err(bad("target arrival is not finite".into()));
        }
        for (id, flag, role) in [
            (ro.origin, true, "origin"),
            (ro.destination, false, "destination"),
        ] {
            let Some(&n) = node_index.get(&id) else {
                return Err(bad(format!("unknown node {id}")));
            };
            let marked = if flag {
                nodes[n].origin
            } else {
                nodes[n].destination
            };
            if !marked {
                return Err(bad(format!("node {id} is not marked as {role}")));
            }
        }
        od_index.insert(key, ods.len());
        ods.push(OdPair {
            origin: ro.origin,
            destination: ro.destination,
            demand_veh: ro.demand_veh,
            target_arrival_s: ro.target_arrival_s,
            paths: Vec::new(),
        });
    }

    let mut path_index = HashMap::with_capacity(raw_paths.len());
    let mut paths = Vec::with_capacity(raw_paths.len());
    for rp in raw_paths {
        if path_index.insert(rp.id, paths.len()).is_some() {
            return Err(NetworkError::DuplicateId {
                kind: "path",
                id: rp.id.0,
            });
        }
        if rp.links.is_empty() {
            return Err(NetworkError::EmptyPath { path: rp.id });
        }
        let mut seen = HashSet::with_capacity(rp.links.len());
        let mut idxs: Vec<usize> = Vec::with_capacity(rp.links.len());
        for (pos, &lid) in rp.links.iter().enumerate() {
            let l = *link_index.get(&lid).ok_or(NetworkError::UnknownLink {
                path: rp.id,
                link: lid,
            })?;
            if !seen.insert(l) {
                return Err(NetworkError::RepeatedLink {
                    path: rp.id,
                    link: lid,
                });
            }
            if pos > 0 {
                let prev = idxs[pos - 1];
                if links[prev].head_idx != links[l].tail_idx {
                    return Err(NetworkError::DisconnectedPath {
                        path: rp.id,
                        prev: links[prev].id,
                        next: lid,
                    });
                }
            }
            idxs.push(l);
        }
        let o = &nodes[links[idxs[0]].tail_idx];
        let d = &nodes[links[*idxs.last().unwrap()].head_idx];
        if !o.origin {
            return Err(NetworkError::OdMismatch {
                path: rp.id,
                reason: format!("first link starts at node {} which is not an origin", o.id),
            });
        }
        if !d.destination {
            return Err(NetworkError::OdMismatch {
                path: rp.id,
                reason: format!("last link ends at node {} which is not a destination", d.id),
            });
        }
        let key = (o.id, d.id);
        let od = *od_index.entry(key).or_insert_with(|| {
            ods.push(OdPair {
                origin: key.0,
                destination: key.1,
                demand_veh: 0.0,
                target_arrival_s: 0.0,
                paths: Vec::new(),
            });
            ods.len() - 1
        });
        ods[od].paths.push(paths.len());
        paths.push(Path {
            id: rp.id,
            od,
            links: idxs,
        });
    }

    for od in &ods {
        if od.demand_veh > 0.0 && od.paths.is_empty() {
            return Err(NetworkError::InvalidOd {
                origin: od.origin,
                destination: od.destination,
                reason: "positive demand but no paths".into(),
            });
        }
    }

    Ok(Network {
        nodes,
        links,
        paths,
        ods,
        node_index,
        link_index,
        path_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn link(v: f64, c: f64, w: Option<f64>) -> Link {
        Link::new(LinkId(1), 300.0, v, c, w).unwrap()
    }

    #[test]
    fn derive_fd_default_backward_speed() {
        let fd = derive_fd(300.0, 15.0, 0.5, None).unwrap();
        assert!((fd.backward_speed_mps - 5.0).abs() < 1e-15);
        assert!((fd.critical_density_vpm - 1.0 / 30.0).abs() < 1e-15);
        assert!((fd.jam_density_vpm - 4.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn derive_fd_symmetric_speeds_doubles_jam() {
        let fd = derive_fd(300.0, 15.0, 0.5, Some(15.0)).unwrap();
        assert!((fd.jam_density_vpm - 2.0 * fd.critical_density_vpm).abs() < 1e-15);
    }

    #[test]
    fn derive_fd_rejects_zero_capacity() {
        assert!(matches!(
            derive_fd(300.0, 15.0, 0.0, None),
            Err(NetworkError::NonpositiveInput { field: "capacity_vps", .. })
        ));
    }

    #[test]
    fn fd_flow_endpoints_and_peak() {
        let l = link(15.0, 0.5, None);
        assert_eq!(l.fd_flow(0.0).unwrap(), 0.0);
        assert!(l.fd_flow(l.jam_density_vpm).unwrap().abs() < 1e-15);
        let rc = l.critical_density_vpm;
        let free = l.free_speed_mps * rc;
        let congested = l.backward_speed_mps * (l.jam_density_vpm - rc);
        assert!((free - 0.5).abs() < 1e-12 * 0.5);
        assert!((congested - 0.5).abs() < 1e-12 * 0.5);
        assert!((l.fd_flow(rc).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fd_flow_rejects_out_of_domain() {
        let l = link(15.0, 0.5, None);
        assert!(l.fd_flow(-1e-3).is_err());
        assert!(l.fd_flow(l.jam_density_vpm * 1.01).is_err());
    }

    proptest! {
        #[test]
        fn fd_is_concave_and_peaks_at_capacity(
            v in 1.0f64..40.0, c in 0.05f64..2.0, ratio in 0.5f64..6.0,
            a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let l = Link::new(LinkId(1), 100.0, v, c, Some(v / ratio)).unwrap();
            let rc = l.critical_density_vpm;
            let free = v * rc;
            let congested = l.backward_speed_mps * (l.jam_density_vpm - rc);
            prop_assert!((free - congested).abs() <= 1e-12 * c);
            prop_assert!((l.fd_flow(rc).unwrap() - c).abs() <= 1e-12 * c);
            let (x, y) = (a * l.jam_density_vpm, b * l.jam_density_vpm);
            let mid = l.fd_flow(0.5 * (x + y)).unwrap();
            let chord = 0.5 * (l.fd_flow(x).unwrap() + l.fd_flow(y).unwrap());
            prop_assert!(mid >= chord - 1e-12);
            prop_assert!(l.fd_flow(x).unwrap() <= c * (1.0 + 1e-12));
        }
    }

    #[test]
    fn braess_is_accepted() {
        let (nodes, links, paths, ods) = fixtures::braess_raw();
        let net = validate_network(&nodes, &links, &paths, &ods).unwrap();
        assert_eq!(net.nodes.len(), 4);
        assert_eq!(net.links.len(), 5);
        assert_eq!(net.paths.len(), 8);
        assert_eq!(net.ods.len(), 4);
        let p1 = net.path_idx(PathId(1)).unwrap();
        assert_eq!(net.path_link_ids(p1), vec![LinkId(1), LinkId(3)]);
    }

    #[test]
    fn disconnected_path_is_rejected() {
        let (nodes, links, mut paths, ods) = fixtures::braess_raw();
        // Link 4 starts at node 2, link 2 ends at node 3.
        paths[0].links = vec![LinkId(2), LinkId(4)];
        let err = validate_network(&nodes, &links, &paths, &ods).unwrap_err();
        assert!(matches!(err, NetworkError::DisconnectedPath { .. }));
        assert!(err.to_string().contains("disconnected path"));
    }

    #[test]
    fn zero_length_link_is_rejected() {
        let (nodes, mut links, paths, ods) = fixtures::braess_raw();
        links[2].length_m = 0.0;
        let err = validate_network(&nodes, &links, &paths, &ods).unwrap_err();
        assert_eq!(
            err,
            NetworkError::NonpositiveParameter {
                link: LinkId(3),
                field: "length_m",
                value: 0.0
            }
        );
        assert!(err.to_string().contains("nonpositive physical parameter"));
    }

    #[test]
    fn dangling_endpoint_is_rejected() {
        let (nodes, mut links, paths, ods) = fixtures::braess_raw();
        links[0].head = NodeId(99);
        assert!(matches!(
            validate_network(&nodes, &links, &paths, &ods),
            Err(NetworkError::DanglingEndpoint { node: NodeId(99), .. })
        ));
    }

    #[test]
    fn path_must_end_at_destination() {
        let (nodes, links, mut paths, ods) = fixtures::braess_raw();
        paths[0].links = vec![LinkId(1)];
        assert!(matches!(
            validate_network(&nodes, &links, &paths, &ods),
            Err(NetworkError::OdMismatch { .. })
        ));
    }

    #[test]
    fn repeated_link_is_rejected() {
        let nodes = vec![
            RawNode { id: NodeId(1), x: None, y: None, origin: true, destination: true, source_priority: None },
            RawNode { id: NodeId(2), x: None, y: None, origin: false, destination: false, source_priority: None },
        ];
        let links = vec![
            RawLink { id: LinkId(1), tail: NodeId(1), head: NodeId(2), length_m: 100.0, free_speed_mps: 10.0, capacity_vps: 1.0, backward_speed_mps: None },
            RawLink { id: LinkId(2), tail: NodeId(2), head: NodeId(1), length_m: 100.0, free_speed_mps: 10.0, capacity_vps: 1.0, backward_speed_mps: None },
        ];
        let paths = vec![RawPath { id: PathId(1), links: vec![LinkId(1), LinkId(2), LinkId(1)] }];
        assert!(matches!(
            validate_network(&nodes, &links, &paths, &[]),
            Err(NetworkError::RepeatedLink { .. })
        ));
    }

    #[test]
    fn positive_demand_needs_paths() {
        let (nodes, links, paths, mut ods) = fixtures::braess_raw();
        let paths: Vec<_> = paths.into_iter().filter(|p| p.links != vec![LinkId(3)]).collect();
        ods.retain(|o| o.origin == NodeId(2) && o.destination == NodeId(3));
        ods[0].demand_veh = 10.0;
        assert!(matches!(
            validate_network(&nodes, &links, &paths, &ods),
            Err(NetworkError::InvalidOd { .. })
        ));
    }

    #[test]
    fn priorities_sum_to_one() {
        let net = fixtures::braess();
        for node in &net.nodes {
            if node.incoming.is_empty() && node.source_share.is_none() {
                continue;
            }
            let total: f64 = node.junction_priorities().iter().sum();
            assert!((total - 1.0).abs() <= 1e-12, "node {}: {total}", node.id);
        }
        // Node 2 is an origin fed by link 1 only.
        let n2 = &net.nodes[net.node_idx(NodeId(2)).unwrap()];
        assert_eq!(n2.source_share, Some(n2.source_priority));
        assert!((n2.incoming_priority[0] - (1.0 - n2.source_priority)).abs() < 1e-15);
    }

    #[test]
    fn capacity_proportional_priorities() {
        let net = fixtures::braess();
        // Node 4 merges links 4 and 5.
        let n4 = &net.nodes[net.node_idx(NodeId(4)).unwrap()];
        let caps: Vec<f64> = n4.incoming.iter().map(|&l| net.links[l].capacity_vps).collect();
        let total: f64 = caps.iter().sum();
        for (p, c) in n4.incoming_priority.iter().zip(&caps) {
            assert!((p - c / total).abs() < 1e-15);
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let net = fixtures::braess();
        let (n, l, p, o) = net.to_raw();
        let again = validate_network(&n, &l, &p, &o).unwrap();
        assert_eq!(net, again);
        let net = fixtures::random_network(7, 30, 40);
        let (n, l, p, o) = net.to_raw();
        assert_eq!(net, validate_network(&n, &l, &p, &o).unwrap());
    }
}
