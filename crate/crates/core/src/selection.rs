//! Phase 1 — active link selection: greedy breadth-first expansion from the
//! gateways with a per-sector fan-out cap, an optional bipartite
//! vertex-coloring constraint, and an avoid-list fed back from transmission
//! set generation.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::netmodel::{link_key, Link, LinkKey, NodeId, SectorId, Topology};

/// Fan-out and constraint knobs for link selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Maximum active links per sector.
    pub k: u32,
    /// Restrict the active topology to a bipartite graph.
    pub bipartite: bool,
    /// How many times `k` may be incremented to connect stragglers.
    pub max_k_escalation: u32,
}

impl Default for SelectionConfig {
    fn default() -> SelectionConfig {
        // k = 3 minimizes the fan-out delay bound around n = 70
        SelectionConfig {
            k: 3,
            bipartite: false,
            max_k_escalation: 2,
        }
    }
}

/// Links excluded from selection, in canonical key form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AvoidList(pub BTreeSet<LinkKey>);

impl AvoidList {
    pub fn new() -> AvoidList {
        AvoidList::default()
    }

    pub fn contains(&self, key: &LinkKey) -> bool {
        self.0.contains(key)
    }

    pub fn insert(&mut self, a: NodeId, b: NodeId) -> bool {
        self.0.insert(link_key(a, b))
    }

    pub fn remove(&mut self, key: &LinkKey) -> bool {
        self.0.remove(key)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LinkKey> {
        self.0.iter()
    }
}

/// Per-link demand weights plus nodes that could not reach any gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkWeights {
    pub weights: BTreeMap<LinkKey, f64>,
    pub unreachable: BTreeSet<NodeId>,
}

impl LinkWeights {
    pub fn get(&self, key: LinkKey) -> f64 {
        self.weights.get(&key).copied().unwrap_or(0.0)
    }
}

/// The selected link subset plus the coloring and connectivity report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveTopology {
    pub base: Topology,
    pub active_links: Vec<Link>,
    /// Two-coloring emitted in bipartite mode; `None` in free-form mode.
    pub colors: Option<BTreeMap<NodeId, u8>>,
    /// Nodes unreachable from every gateway through the active links.
    pub unconnected: BTreeSet<NodeId>,
    /// Final per-sector cap after escalation.
    pub k_used: u32,
}

impl ActiveTopology {
    pub fn contains(&self, key: &LinkKey) -> bool {
        self.active_links.iter().any(|l| l.key() == *key)
    }

    /// Adjacency over active links only.
    pub fn adjacency(&self) -> HashMap<NodeId, Vec<&Link>> {
        let mut adj: HashMap<NodeId, Vec<&Link>> = HashMap::new();
        for link in &self.active_links {
            adj.entry(link.a).or_default().push(link);
            adj.entry(link.b).or_default().push(link);
        }
        adj
    }

    pub fn connected_nodes(&self) -> Vec<NodeId> {
        self.base
            .nodes()
            .iter()
            .map(|n| n.id)
            .filter(|id| !self.unconnected.contains(id))
            .collect()
    }

    /// Treats every candidate link as active. Used by tools and tests that
    /// exercise later phases without running selection.
    pub fn from_all_links(topology: &Topology) -> ActiveTopology {
        let links = topology.links().to_vec();
        let mut sector_load: HashMap<SectorId, u32> = HashMap::new();
        for link in &links {
            for end in [link.a, link.b] {
                *sector_load.entry(link.sector_at(end).unwrap()).or_default() += 1;
            }
        }
        let keys: BTreeSet<LinkKey> = links.iter().map(Link::key).collect();
        let reachable = reachable_from_gateways(topology, &keys);
        ActiveTopology {
            base: topology.clone(),
            active_links: links,
            colors: None,
            unconnected: topology
                .nodes()
                .iter()
                .map(|n| n.id)
                .filter(|id| !reachable.contains(id))
                .collect(),
            k_used: sector_load.values().copied().max().unwrap_or(0),
        }
    }
}

/// Weighs every link by the total demand of the nodes whose shortest
/// hop-count path to the nearest gateway traverses it. Each non-gateway node
/// contributes its demand (default 1.0) along a single deterministic
/// shortest path: the parent at each step is the smallest-id neighbor one
/// BFS level closer to the gateways.
pub fn weight_links(
    topology: &Topology,
    demands: Option<&BTreeMap<NodeId, f64>>,
) -> Result<LinkWeights, Error> {
    demand_weights(topology, topology.links(), demands)
}

/// [`weight_links`] restricted to an explicit link subset; routing re-weighs
/// the active links with the same rule.
pub(crate) fn demand_weights(
    topology: &Topology,
    links: &[Link],
    demands: Option<&BTreeMap<NodeId, f64>>,
) -> Result<LinkWeights, Error> {
    if let Some(demands) = demands {
        for (&node, &demand) in demands {
            if demand < 0.0 {
                return Err(Error::NegativeDemand { node, demand });
            }
        }
    }
    let gws = topology.gateways();
    if gws.is_empty() {
        return Err(Error::NoGateway);
    }

    let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for link in links {
        adjacency.entry(link.a).or_default().push(link.b);
        adjacency.entry(link.b).or_default().push(link.a);
    }
    for neighbors in adjacency.values_mut() {
        neighbors.sort();
        neighbors.dedup();
    }

    // multi-source BFS levels from all gateways
    let mut dist: HashMap<NodeId, u32> = gws.iter().map(|&g| (g, 0)).collect();
    let mut queue: VecDeque<NodeId> = gws.iter().copied().collect();
    while let Some(u) = queue.pop_front() {
        let du = dist[&u];
        for &v in adjacency.get(&u).into_iter().flatten() {
            if !dist.contains_key(&v) {
                dist.insert(v, du + 1);
                queue.push_back(v);
            }
        }
    }

    let mut weights: BTreeMap<LinkKey, f64> = links.iter().map(|l| (l.key(), 0.0)).collect();
    let mut unreachable = BTreeSet::new();
    for node in topology.nodes() {
        if node.is_gateway() {
            continue;
        }
        let demand = demands
            .and_then(|d| d.get(&node.id).copied())
            .unwrap_or(1.0);
        let Some(&d0) = dist.get(&node.id) else {
            unreachable.insert(node.id);
            continue;
        };
        // walk the deterministic shortest path, adding demand per hop
        let mut at = node.id;
        let mut d = d0;
        while d > 0 {
            let parent = adjacency[&at]
                .iter()
                .copied()
                .find(|v| dist.get(v) == Some(&(d - 1)))
                .expect("BFS level predecessor exists");
            *weights.get_mut(&link_key(at, parent)).unwrap() += demand;
            at = parent;
            d -= 1;
        }
    }
    Ok(LinkWeights {
        weights,
        unreachable,
    })
}

/// Planning heuristic bound on worst-case delay for fan-out `k` over `n`
/// nodes: `k * ln(n) / ln(k)`.
pub fn fanout_delay_bound(k: u32, n: usize) -> Result<f64, Error> {
    if k < 2 || n < 2 {
        return Err(Error::DegenerateFanout { k, n });
    }
    Ok(k as f64 * (n as f64).ln() / (k as f64).ln())
}

/// Fan-out minimizing [`fanout_delay_bound`] over small candidate values.
pub fn recommended_k(n: usize) -> u32 {
    (2..=4u32)
        .min_by(|&k1, &k2| {
            let b1 = fanout_delay_bound(k1, n.max(2)).unwrap();
            let b2 = fanout_delay_bound(k2, n.max(2)).unwrap();
            b1.partial_cmp(&b2).unwrap().then(k1.cmp(&k2))
        })
        .unwrap()
}

struct PassState {
    active: BTreeSet<LinkKey>,
    sector_load: HashMap<SectorId, u32>,
    colors: Option<BTreeMap<NodeId, u8>>,
}

impl PassState {
    fn load(&self, sector: SectorId) -> u32 {
        self.sector_load.get(&sector).copied().unwrap_or(0)
    }
}

fn selection_pass(
    topology: &Topology,
    weights: &LinkWeights,
    k: u32,
    bipartite: bool,
    avoid: &AvoidList,
) -> PassState {
    let mut state = PassState {
        active: BTreeSet::new(),
        sector_load: HashMap::new(),
        colors: bipartite.then(BTreeMap::new),
    };
    let gateways = topology.gateways();
    let mut attached: BTreeSet<NodeId> = gateways.iter().copied().collect();
    let mut current = gateways;
    while !current.is_empty() {
        let mut next = BTreeSet::new();
        for &u in &current {
            let node = topology.node(u).expect("current node exists");
            for index in 0..node.sector_count {
                let sector = SectorId { node: u, index };
                let mut candidates: Vec<&Link> = topology
                    .incident(u)
                    .filter(|l| l.sector_at(u).unwrap().index == index)
                    .filter(|l| !state.active.contains(&l.key()))
                    .filter(|l| !avoid.contains(&l.key()))
                    .collect();
                candidates.sort_by(|x, y| {
                    weights
                        .get(y.key())
                        .total_cmp(&weights.get(x.key()))
                        .then(x.key().cmp(&y.key()))
                });
                for link in candidates {
                    if state.load(sector) >= k {
                        break;
                    }
                    let far = link.other(u).unwrap();
                    let far_sector = link.sector_at(far).unwrap();
                    if state.load(far_sector) >= k {
                        continue;
                    }
                    if let Some(colors) = &mut state.colors {
                        match (colors.get(&u).copied(), colors.get(&far).copied()) {
                            (Some(cu), Some(cf)) if cu == cf => continue,
                            (Some(cu), None) => {
                                colors.insert(far, 1 - cu);
                            }
                            (None, Some(cf)) => {
                                colors.insert(u, 1 - cf);
                            }
                            (None, None) => {
                                // initiating end takes color 0
                                colors.insert(u, 0);
                                colors.insert(far, 1);
                            }
                            _ => {}
                        }
                    }
                    state.active.insert(link.key());
                    *state.sector_load.entry(sector).or_default() += 1;
                    *state.sector_load.entry(far_sector).or_default() += 1;
                    if attached.insert(far) {
                        next.insert(far);
                    }
                }
            }
        }
        current = next.into_iter().collect();
    }
    state
}

fn reachable_from_gateways(topology: &Topology, links: &BTreeSet<LinkKey>) -> BTreeSet<NodeId> {
    let mut adjacency: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &(a, b) in links {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    let mut reached: BTreeSet<NodeId> = topology.gateways().into_iter().collect();
    let mut queue: VecDeque<NodeId> = reached.iter().copied().collect();
    while let Some(u) = queue.pop_front() {
        for &v in adjacency.get(&u).into_iter().flatten() {
            if reached.insert(v) {
                queue.push_back(v);
            }
        }
    }
    reached
}

/// Greedy breadth-first link selection from the gateways.
///
/// Processes the current-nodes list (initialized with all gateways, sorted
/// by id); for each node and sector, adds the highest-weight eligible
/// candidates until the sector holds `k` active links. A candidate is
/// eligible iff it is not avoided, its far-end sector has spare capacity,
/// and (bipartite mode) its endpoints are differently colored or the far
/// end is colorless, which colors it opposite on selection. Newly attached
/// nodes form the next round. If reachable nodes remain unconnected, the
/// whole pass reruns with `k + 1`, up to `max_k_escalation` times.
pub fn select_active_links(
    topology: &Topology,
    weights: &LinkWeights,
    config: &SelectionConfig,
    avoid: &AvoidList,
) -> Result<ActiveTopology, Error> {
    if topology.gateways().is_empty() {
        return Err(Error::NoGateway);
    }
    let candidate_keys: BTreeSet<LinkKey> = topology
        .links()
        .iter()
        .map(Link::key)
        .filter(|key| !avoid.contains(key))
        .collect();
    let attainable = reachable_from_gateways(topology, &candidate_keys);

    let mut chosen: Option<(PassState, u32)> = None;
    for attempt in 0..=config.max_k_escalation {
        let k = config.k + attempt;
        let state = selection_pass(topology, weights, k, config.bipartite, avoid);
        let reached = reachable_from_gateways(topology, &state.active);
        let done = attainable.iter().all(|id| reached.contains(id));
        chosen = Some((state, k));
        if done {
            break;
        }
    }
    let (state, k_used) = chosen.expect("at least one selection pass runs");

    let reached = reachable_from_gateways(topology, &state.active);
    let active_links: Vec<Link> = topology
        .links()
        .iter()
        .filter(|l| state.active.contains(&l.key()))
        .cloned()
        .collect();
    Ok(ActiveTopology {
        base: topology.clone(),
        active_links,
        colors: state.colors,
        unconnected: topology
            .nodes()
            .iter()
            .map(|n| n.id)
            .filter(|id| !reached.contains(id))
            .collect(),
        k_used,
    })
}
