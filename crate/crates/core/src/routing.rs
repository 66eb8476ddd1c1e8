//! Phase 2 — multipath routing over the active topology: grow one stem per
//! gateway-incident link (all stems simultaneously, globally greedy by
//! weight), expand each stem to a full spanning tree, and allocate every
//! node a primary path to a gateway.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::netmodel::{link_key, Link, LinkKey, NodeId};
use crate::selection::{demand_weights, ActiveTopology, LinkWeights};

/// One routing tree rooted at a gateway; edges are active links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub id: usize,
    pub root: NodeId,
    /// Child to parent, for every tree node except the root.
    pub parent: BTreeMap<NodeId, NodeId>,
}

impl SpanningTree {
    /// Node list from `node` up to the root, inclusive; `None` if the node
    /// is not in the tree.
    pub fn path_to_root(&self, node: NodeId) -> Option<Vec<NodeId>> {
        if node == self.root {
            return Some(vec![node]);
        }
        self.parent.get(&node)?;
        let mut path = vec![node];
        let mut at = node;
        while at != self.root {
            at = *self.parent.get(&at)?;
            path.push(at);
        }
        Some(path)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node == self.root || self.parent.contains_key(&node)
    }
}

/// A node's designated path to a gateway: tree id plus the node list from
/// the node to the tree root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimaryPath {
    pub node: NodeId,
    pub tree: usize,
    pub path: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedLink {
    pub a: NodeId,
    pub b: NodeId,
    pub weight: f64,
}

/// Spanning trees, primary paths, and the re-computed link weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingConfig {
    pub trees: Vec<SpanningTree>,
    pub primary: Vec<PrimaryPath>,
    pub link_weights: Vec<WeightedLink>,
}

impl RoutingConfig {
    pub fn primary_for(&self, node: NodeId) -> Option<&PrimaryPath> {
        self.primary.iter().find(|p| p.node == node)
    }

    /// All distinct non-primary tree paths per node, deduplicated by node
    /// list. These are the fallback routes evaluated for reporting only.
    pub fn alternative_paths(&self) -> Vec<(NodeId, Vec<NodeId>)> {
        let mut out = Vec::new();
        for primary in &self.primary {
            let mut seen = BTreeSet::from([primary.path.clone()]);
            for tree in &self.trees {
                if let Some(path) = tree.path_to_root(primary.node) {
                    if seen.insert(path.clone()) {
                        out.push((primary.node, path));
                    }
                }
            }
        }
        out
    }
}

/// Count of mutually node-disjoint gateway paths per node, plus the nodes
/// lacking redundancy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjointnessReport {
    pub per_node: BTreeMap<NodeId, u32>,
    pub below_two: BTreeSet<NodeId>,
}

impl DisjointnessReport {
    pub fn average(&self) -> f64 {
        if self.per_node.is_empty() {
            return 0.0;
        }
        self.per_node.values().map(|&c| c as f64).sum::<f64>() / self.per_node.len() as f64
    }
}

/// Max-heap entry ordered by weight, then canonical link key (ascending),
/// then source node (ascending), then owner id — fully deterministic.
#[derive(PartialEq, Eq)]
struct Extension {
    weight_bits: u64,
    key: LinkKey,
    from: NodeId,
    owner: usize,
    to: NodeId,
}

impl Extension {
    fn new(weight: f64, from: NodeId, to: NodeId, owner: usize) -> Extension {
        // finite non-negative weights map monotonically to their bit pattern
        Extension {
            weight_bits: weight.to_bits(),
            key: link_key(from, to),
            from,
            owner,
            to,
        }
    }
}

impl Ord for Extension {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.weight_bits, Reverse(self.key), Reverse(self.from), Reverse(self.owner)).cmp(&(
            other.weight_bits,
            Reverse(other.key),
            Reverse(other.from),
            Reverse(other.owner),
        ))
    }
}

impl PartialOrd for Extension {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Stem {
    root: NodeId,
    parent: BTreeMap<NodeId, NodeId>,
    nodes: BTreeSet<NodeId>,
}

/// Seeds one stem per gateway-incident active link (highest weight first;
/// links whose far end is already claimed, or that join two gateways, do
/// not seed), then grows all stems at once: repeatedly claim the globally
/// highest-weight link extending some stem to an unclaimed non-gateway node.
fn build_stems(
    active: &ActiveTopology,
    weights: &LinkWeights,
    max_trees: Option<usize>,
) -> Result<Vec<Stem>, Error> {
    let gws: BTreeSet<NodeId> = active.base.gateways().into_iter().collect();
    let adjacency = active.adjacency();

    let mut seeds: Vec<&Link> = active
        .active_links
        .iter()
        .filter(|l| gws.contains(&l.a) != gws.contains(&l.b))
        .collect();
    seeds.sort_by(|x, y| {
        weights
            .get(y.key())
            .total_cmp(&weights.get(x.key()))
            .then(x.key().cmp(&y.key()))
    });

    let mut stems: Vec<Stem> = Vec::new();
    let mut claimed: HashMap<NodeId, usize> = HashMap::new();
    for link in seeds {
        if let Some(cap) = max_trees {
            if stems.len() >= cap {
                break;
            }
        }
        let (gw, wn) = if gws.contains(&link.a) {
            (link.a, link.b)
        } else {
            (link.b, link.a)
        };
        if claimed.contains_key(&wn) {
            continue;
        }
        claimed.insert(wn, stems.len());
        stems.push(Stem {
            root: gw,
            parent: BTreeMap::from([(wn, gw)]),
            nodes: BTreeSet::from([wn]),
        });
    }
    if stems.is_empty() {
        return Err(Error::NoStems);
    }

    let mut heap = BinaryHeap::new();
    let push_from = |heap: &mut BinaryHeap<Extension>,
                     claimed: &HashMap<NodeId, usize>,
                     from: NodeId,
                     owner: usize| {
        for link in adjacency.get(&from).into_iter().flatten() {
            let to = link.other(from).unwrap();
            if !claimed.contains_key(&to) && !gws.contains(&to) {
                heap.push(Extension::new(weights.get(link.key()), from, to, owner));
            }
        }
    };
    for (idx, stem) in stems.iter().enumerate() {
        for &wn in &stem.nodes {
            push_from(&mut heap, &claimed, wn, idx);
        }
    }
    while let Some(ext) = heap.pop() {
        if claimed.contains_key(&ext.to) {
            continue;
        }
        claimed.insert(ext.to, ext.owner);
        let stem = &mut stems[ext.owner];
        stem.parent.insert(ext.to, ext.from);
        stem.nodes.insert(ext.to);
        push_from(&mut heap, &claimed, ext.to, ext.owner);
    }
    Ok(stems)
}

/// Expands a stem to a spanning tree over every connected node (other
/// gateways included), adding the highest-weight link from a tree node to a
/// non-tree node until no frontier remains.
fn expand_to_tree(
    id: usize,
    stem: &Stem,
    active: &ActiveTopology,
    weights: &LinkWeights,
) -> SpanningTree {
    let adjacency = active.adjacency();
    let mut parent = stem.parent.clone();
    let mut in_tree: BTreeSet<NodeId> = stem.nodes.clone();
    in_tree.insert(stem.root);

    let mut heap = BinaryHeap::new();
    let push_from = |heap: &mut BinaryHeap<Extension>, in_tree: &BTreeSet<NodeId>, from: NodeId| {
        for link in adjacency.get(&from).into_iter().flatten() {
            let to = link.other(from).unwrap();
            if !in_tree.contains(&to) {
                heap.push(Extension::new(weights.get(link.key()), from, to, id));
            }
        }
    };
    for &node in &in_tree {
        push_from(&mut heap, &in_tree, node);
    }
    while let Some(ext) = heap.pop() {
        if in_tree.contains(&ext.to) {
            continue;
        }
        in_tree.insert(ext.to);
        parent.insert(ext.to, ext.from);
        push_from(&mut heap, &in_tree, ext.to);
    }
    SpanningTree {
        id,
        root: stem.root,
        parent,
    }
}

/// Builds the multiple-disjoint-spanning-tree routing configuration.
pub fn compute_mdst(
    active: &ActiveTopology,
    demands: Option<&BTreeMap<NodeId, f64>>,
) -> Result<RoutingConfig, Error> {
    compute_mdst_with(active, demands, None)
}

/// [`compute_mdst`] with an optional cap on the number of trees (the
/// highest-weight stems are kept).
pub fn compute_mdst_with(
    active: &ActiveTopology,
    demands: Option<&BTreeMap<NodeId, f64>>,
    max_trees: Option<usize>,
) -> Result<RoutingConfig, Error> {
    let weights = demand_weights(&active.base, &active.active_links, demands)?;
    let stems = build_stems(active, &weights, max_trees)?;
    let trees: Vec<SpanningTree> = stems
        .iter()
        .enumerate()
        .map(|(id, stem)| expand_to_tree(id, stem, active, &weights))
        .collect();

    // depth maps per tree
    let depths: Vec<HashMap<NodeId, u32>> = trees.iter().map(tree_depths).collect();

    let gws: BTreeSet<NodeId> = active.base.gateways().into_iter().collect();
    let mut primary = Vec::new();
    let mut load: HashMap<usize, usize> = HashMap::new();
    for node in active.base.nodes() {
        if gws.contains(&node.id) || active.unconnected.contains(&node.id) {
            continue;
        }
        let min_depth = depths
            .iter()
            .filter_map(|d| d.get(&node.id))
            .copied()
            .min()
            .ok_or(Error::NoPrimaryPath(node.id))?;
        let tree = trees
            .iter()
            .filter(|t| depths[t.id].get(&node.id) == Some(&min_depth))
            .min_by_key(|t| (load.get(&t.id).copied().unwrap_or(0), t.id))
            .expect("at least one tree at min depth");
        *load.entry(tree.id).or_default() += 1;
        primary.push(PrimaryPath {
            node: node.id,
            tree: tree.id,
            path: tree.path_to_root(node.id).expect("tree spans node"),
        });
    }

    let link_weights = weights
        .weights
        .iter()
        .map(|(&(a, b), &weight)| WeightedLink { a, b, weight })
        .collect();
    Ok(RoutingConfig {
        trees,
        primary,
        link_weights,
    })
}

fn tree_depths(tree: &SpanningTree) -> HashMap<NodeId, u32> {
    let mut depths: HashMap<NodeId, u32> = HashMap::from([(tree.root, 0)]);
    let nodes: Vec<NodeId> = tree.parent.keys().copied().collect();
    for node in nodes {
        let mut chain = Vec::new();
        let mut at = node;
        while !depths.contains_key(&at) {
            chain.push(at);
            at = tree.parent[&at];
        }
        let mut depth = depths[&at];
        for n in chain.into_iter().rev() {
            depth += 1;
            depths.insert(n, depth);
        }
    }
    depths
}

/// Maximum number of the node's tree paths that are pairwise node-disjoint
/// in their interior nodes (endpoints excluded; distinct gateway roots count
/// as disjoint endpoints). Exact over the deduplicated tree-path set.
pub fn count_disjoint_paths(config: &RoutingConfig, node: NodeId) -> Result<u32, Error> {
    let mut paths: Vec<Vec<NodeId>> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut known = false;
    for tree in &config.trees {
        if let Some(path) = tree.path_to_root(node) {
            known = true;
            if path.len() >= 2 && seen.insert(path.clone()) {
                paths.push(path);
            }
        }
    }
    if !known {
        return Err(Error::UnknownNode(node));
    }
    let interiors: Vec<BTreeSet<NodeId>> = paths
        .iter()
        .map(|p| p[1..p.len() - 1].iter().copied().collect())
        .collect();

    // paths with empty interiors conflict with nothing
    let free = interiors.iter().filter(|i| i.is_empty()).count() as u32;
    let rest: Vec<&BTreeSet<NodeId>> = interiors.iter().filter(|i| !i.is_empty()).collect();
    assert!(rest.len() <= 128, "too many distinct tree paths");
    let mut conflict = vec![0u128; rest.len()];
    for i in 0..rest.len() {
        for j in (i + 1)..rest.len() {
            if rest[i].intersection(rest[j]).next().is_some() {
                conflict[i] |= 1 << j;
                conflict[j] |= 1 << i;
            }
        }
    }
    let all = if rest.is_empty() {
        0
    } else {
        (!0u128) >> (128 - rest.len())
    };
    Ok(free + max_independent_set(all, &conflict))
}

/// Exact maximum independent set by branch and bound on a bitmask graph.
fn max_independent_set(avail: u128, conflict: &[u128]) -> u32 {
    if avail == 0 {
        return 0;
    }
    let v = avail.trailing_zeros() as usize;
    let without = max_independent_set(avail & !(1 << v), conflict);
    let with = 1 + max_independent_set(avail & !(1 << v) & !conflict[v], conflict);
    with.max(without)
}

/// Disjoint-path counts for every node with a primary path.
pub fn disjointness_report(config: &RoutingConfig) -> Result<DisjointnessReport, Error> {
    let mut per_node = BTreeMap::new();
    let mut below_two = BTreeSet::new();
    for primary in &config.primary {
        let count = count_disjoint_paths(config, primary.node)?;
        per_node.insert(primary.node, count);
        if count < 2 {
            below_two.insert(primary.node);
        }
    }
    Ok(DisjointnessReport {
        per_node,
        below_two,
    })
}
