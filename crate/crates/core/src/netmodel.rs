//! Core domain types shared by every pipeline phase: nodes with sectored
//! radio units, undirected candidate links, directed scheduling links, and
//! the topology container with its validity checks.
//!
//! The model is 2.5D: nodes carry three coordinates but sector arcs are
//! evaluated in the xy-plane only. Every node's sectors partition the
//! azimuth circle into `sector_count` equal half-open arcs `[start, end)`
//! starting at `sector_offset` degrees, so each azimuth maps to exactly one
//! sector and boundary azimuths go to the higher-index arc.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Stable node identifier, unique within one topology.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Canonical undirected link key: endpoints ordered by node id.
pub type LinkKey = (NodeId, NodeId);

/// Returns the canonical `(min, max)` key for a node pair.
pub fn link_key(a: NodeId, b: NodeId) -> LinkKey {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Node layer in the urban deployment model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Street,
    #[serde(rename = "rooftop")]
    RoofTop,
    Gateway,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Street => write!(f, "street"),
            Layer::RoofTop => write!(f, "rooftop"),
            Layer::Gateway => write!(f, "gateway"),
        }
    }
}

/// A mesh node: position in meters (z is height), layer, and the sectored
/// radio unit layout. Gateway nodes are the only roots for routing trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub layer: Layer,
    pub sector_count: u32,
    pub sector_offset: f64,
}

impl Node {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_gateway(&self) -> bool {
        self.layer == Layer::Gateway
    }
}

/// One radio-unit sector of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SectorId {
    pub node: NodeId,
    pub index: u32,
}

/// Undirected candidate link in canonical order (`a < b`). Sectors are the
/// arcs at each endpoint that contain the azimuth toward the other endpoint.
/// Length is stored explicitly so imported topologies without coordinates
/// stay usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub sector_a: u32,
    pub sector_b: u32,
    pub length: f64,
}

impl Link {
    /// Canonical form: endpoints ordered by node id, sectors swapped along.
    /// Idempotent.
    pub fn canonical(mut self) -> Link {
        if self.a > self.b {
            std::mem::swap(&mut self.a, &mut self.b);
            std::mem::swap(&mut self.sector_a, &mut self.sector_b);
        }
        self
    }

    pub fn key(&self) -> LinkKey {
        link_key(self.a, self.b)
    }

    /// Endpoint opposite to `node`, if `node` is an endpoint.
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        if node == self.a {
            Some(self.b)
        } else if node == self.b {
            Some(self.a)
        } else {
            None
        }
    }

    /// Sector index at `node`'s end of this link.
    pub fn sector_at(&self, node: NodeId) -> Option<SectorId> {
        if node == self.a {
            Some(SectorId {
                node,
                index: self.sector_a,
            })
        } else if node == self.b {
            Some(SectorId {
                node,
                index: self.sector_b,
            })
        } else {
            None
        }
    }
}

/// A link with transmit and receive endpoints fixed, as scheduled in a slot.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct DirectedLink {
    pub tx: NodeId,
    pub rx: NodeId,
}

impl DirectedLink {
    pub fn new(tx: NodeId, rx: NodeId) -> DirectedLink {
        DirectedLink { tx, rx }
    }

    pub fn reversed(&self) -> DirectedLink {
        DirectedLink {
            tx: self.rx,
            rx: self.tx,
        }
    }

    pub fn key(&self) -> LinkKey {
        link_key(self.tx, self.rx)
    }
}

impl fmt::Display for DirectedLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.tx, self.rx)
    }
}

/// Azimuth of `(dx, dy)` in degrees, normalized to `[0, 360)`.
pub fn azimuth_deg(dx: f64, dy: f64) -> f64 {
    let az = dy.atan2(dx).to_degrees().rem_euclid(360.0);
    if az >= 360.0 {
        0.0
    } else {
        az
    }
}

/// 3D Euclidean distance between two nodes.
pub fn distance(a: &Node, b: &Node) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Maps a target position to the sector of `node` whose arc contains the
/// azimuth toward it. Errors if the target has no xy displacement from the
/// node (vertical-only separation).
pub fn sector_of(node: &Node, toward: [f64; 3]) -> Result<SectorId, Error> {
    let dx = toward[0] - node.x;
    let dy = toward[1] - node.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateAzimuth { node: node.id });
    }
    let rel = (azimuth_deg(dx, dy) - node.sector_offset).rem_euclid(360.0);
    let width = 360.0 / node.sector_count as f64;
    let mut index = (rel / width).floor() as u32;
    if index >= node.sector_count {
        index = 0; // rel rounded up to a full turn
    }
    Ok(SectorId {
        node: node.id,
        index,
    })
}

/// One invariant violation found by [`Topology::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateNodeId(NodeId),
    ZeroSectorCount(NodeId),
    UnknownEndpoint { a: NodeId, b: NodeId, missing: NodeId },
    SelfLoop(NodeId),
    NonCanonical { a: NodeId, b: NodeId },
    DuplicateLink { a: NodeId, b: NodeId },
    SectorOutOfRange { node: NodeId, index: u32 },
    SectorMismatch { node: NodeId, toward: NodeId, stored: u32, expected: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId(id) => write!(f, "duplicate node id {id}"),
            Violation::ZeroSectorCount(id) => write!(f, "node {id} has sector_count 0"),
            Violation::UnknownEndpoint { a, b, missing } => {
                write!(f, "link {a}-{b} references unknown node {missing}")
            }
            Violation::SelfLoop(id) => write!(f, "self-loop at node {id}"),
            Violation::NonCanonical { a, b } => {
                write!(f, "link {a}-{b} is not in canonical order")
            }
            Violation::DuplicateLink { a, b } => write!(f, "duplicate link {a}-{b}"),
            Violation::SectorOutOfRange { node, index } => {
                write!(f, "sector index {index} out of range at node {node}")
            }
            Violation::SectorMismatch {
                node,
                toward,
                stored,
                expected,
            } => write!(
                f,
                "link sector at node {node} toward {toward} is {stored}, geometry says {expected}"
            ),
        }
    }
}

/// Candidate topology: all nodes plus every link the radio layer considers
/// feasible. Immutable value data after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyFile", into = "TopologyFile")]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    node_index: HashMap<NodeId, usize>,
    adjacency: HashMap<NodeId, Vec<usize>>,
}

impl Topology {
    /// Builds a topology from parts. Links are canonicalized and both
    /// collections sorted; invariants are *reported* by [`Self::validate`],
    /// not enforced here.
    pub fn new(mut nodes: Vec<Node>, links: Vec<Link>) -> Topology {
        nodes.sort_by_key(|n| n.id);
        let mut links: Vec<Link> = links.into_iter().map(Link::canonical).collect();
        links.sort_by_key(Link::key);
        let node_index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut adjacency: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (i, link) in links.iter().enumerate() {
            if node_index.contains_key(&link.a) && node_index.contains_key(&link.b) {
                adjacency.entry(link.a).or_default().push(i);
                adjacency.entry(link.b).or_default().push(i);
            }
        }
        Topology {
            nodes,
            links,
            node_index,
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.node_index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn require_node(&self, id: NodeId) -> Result<&Node, Error> {
        self.node(id).ok_or(Error::UnknownNode(id))
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<&Link> {
        let key = link_key(a, b);
        self.adjacency
            .get(&key.0)?
            .iter()
            .map(|&i| &self.links[i])
            .find(|l| l.key() == key)
    }

    /// Links incident to `id`, in canonical link order.
    pub fn incident(&self, id: NodeId) -> impl Iterator<Item = &Link> {
        self.adjacency
            .get(&id)
            .into_iter()
            .flatten()
            .map(|&i| &self.links[i])
    }

    pub fn gateways(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.is_gateway())
            .map(|n| n.id)
            .collect()
    }

    /// Builds the canonical link record for a node pair from geometry:
    /// sectors via [`sector_of`], length as 3D distance.
    pub fn make_link(&self, a: NodeId, b: NodeId) -> Result<Link, Error> {
        let na = self.require_node(a)?;
        let nb = self.require_node(b)?;
        let link = Link {
            a,
            b,
            sector_a: sector_of(na, nb.position())?.index,
            sector_b: sector_of(nb, na.position())?.index,
            length: distance(na, nb),
        };
        Ok(link.canonical())
    }

    /// Checks every type invariant; returns one entry per violation.
    /// Violations are data, not errors.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen_ids = BTreeSet::new();
        for node in &self.nodes {
            if !seen_ids.insert(node.id) {
                out.push(Violation::DuplicateNodeId(node.id));
            }
            if node.sector_count == 0 {
                out.push(Violation::ZeroSectorCount(node.id));
            }
        }
        let mut seen_links = BTreeSet::new();
        for link in &self.links {
            if link.a == link.b {
                out.push(Violation::SelfLoop(link.a));
                continue;
            }
            if link.a > link.b {
                out.push(Violation::NonCanonical { a: link.a, b: link.b });
            }
            if !seen_links.insert(link.key()) {
                out.push(Violation::DuplicateLink { a: link.a, b: link.b });
            }
            let mut endpoints_ok = true;
            for end in [link.a, link.b] {
                if self.node(end).is_none() {
                    out.push(Violation::UnknownEndpoint {
                        a: link.a,
                        b: link.b,
                        missing: end,
                    });
                    endpoints_ok = false;
                }
            }
            if !endpoints_ok {
                continue;
            }
            for (end, other, stored) in [
                (link.a, link.b, link.sector_a),
                (link.b, link.a, link.sector_b),
            ] {
                let node = self.node(end).unwrap();
                if stored >= node.sector_count {
                    out.push(Violation::SectorOutOfRange {
                        node: end,
                        index: stored,
                    });
                    continue;
                }
                let target = self.node(other).unwrap();
                if let Ok(expected) = sector_of(node, target.position()) {
                    if expected.index != stored {
                        out.push(Violation::SectorMismatch {
                            node: end,
                            toward: other,
                            stored,
                            expected: expected.index,
                        });
                    }
                }
            }
        }
        out
    }
}

/// JSON interchange form of [`Topology`]. Link sectors and length are
/// optional on input and recomputed from geometry when absent; output always
/// carries them.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFile {
    nodes: Vec<Node>,
    links: Vec<LinkRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LinkRecord {
    a: NodeId,
    b: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sector_a: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sector_b: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
}

impl From<Topology> for TopologyFile {
    fn from(t: Topology) -> TopologyFile {
        TopologyFile {
            links: t
                .links
                .iter()
                .map(|l| LinkRecord {
                    a: l.a,
                    b: l.b,
                    sector_a: Some(l.sector_a),
                    sector_b: Some(l.sector_b),
                    length: Some(l.length),
                })
                .collect(),
            nodes: t.nodes,
        }
    }
}

impl TryFrom<TopologyFile> for Topology {
    type Error = Error;

    fn try_from(file: TopologyFile) -> Result<Topology, Error> {
        let base = Topology::new(file.nodes, Vec::new());
        let mut links = Vec::with_capacity(file.links.len());
        for rec in file.links {
            let link = match (rec.sector_a, rec.sector_b) {
                (Some(sa), Some(sb)) => {
                    let length = match rec.length {
                        Some(len) => len,
                        None => {
                            distance(base.require_node(rec.a)?, base.require_node(rec.b)?)
                        }
                    };
                    Link {
                        a: rec.a,
                        b: rec.b,
                        sector_a: sa,
                        sector_b: sb,
                        length,
                    }
                    .canonical()
                }
                _ => base.make_link(rec.a, rec.b)?,
            };
            links.push(link);
        }
        Ok(Topology::new(base.nodes, links))
    }
}
