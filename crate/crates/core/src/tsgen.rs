//! Phase 3 — maximal conflict-free transmission sets over directed active
//! links (two-pass greedy), plus identification of the troublesome links
//! that feed the avoid-list.
//!
//! Each round clears all node modes and builds one set: pass 1 scans the
//! not-yet-covered directed links in weight-descending order, pass 2 scans
//! all directed links in the same order. A scanned link `(u, v)` is added
//! iff both endpoint sectors are free in this set and the mode rule passes
//! (`u` not RX, `v` not TX); adding it pins undefined modes (`u` to TX, `v`
//! to RX). Pass 2's monotonicity (modes and sector usage only ever grow)
//! makes every emitted set maximal. Rounds repeat until both directions of
//! every active link are covered.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::netmodel::{DirectedLink, Link, LinkKey, NodeId, SectorId};
use crate::routing::RoutingConfig;
use crate::selection::ActiveTopology;

/// TX/RX mode of a node within one time slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "TX")]
    Tx,
    #[serde(rename = "RX")]
    Rx,
}

/// Links that can be active together in one time slot, with the TX/RX mode
/// of every node they touch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionSet {
    pub links: Vec<DirectedLink>,
    pub mode: BTreeMap<NodeId, Mode>,
}

impl TransmissionSet {
    pub fn contains(&self, link: &DirectedLink) -> bool {
        self.links.binary_search(link).is_ok()
    }
}

/// First set index covering each direction of an undirected link
/// (`a < b` canonical).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub a: NodeId,
    pub b: NodeId,
    pub first_ab: usize,
    pub first_ba: usize,
}

/// Ordered transmission sets covering both directions of every active link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionSetCollection {
    pub sets: Vec<TransmissionSet>,
    pub coverage: Vec<CoverageEntry>,
    /// Links whose coverage (either direction) first occurred in the final
    /// round. Candidates for the avoid-list; only meaningful when the
    /// collection is longer than the feedback threshold.
    pub troublesome: BTreeSet<LinkKey>,
}

impl TransmissionSetCollection {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Troublesome links gated by the feedback threshold: empty unless
    /// `|TSS| > threshold`.
    pub fn troublesome_when_exceeding(&self, threshold: usize) -> BTreeSet<LinkKey> {
        if self.sets.len() > threshold {
            self.troublesome.clone()
        } else {
            BTreeSet::new()
        }
    }

    /// Average number of active links per slot.
    pub fn avg_links_per_slot(&self) -> f64 {
        if self.sets.is_empty() {
            return 0.0;
        }
        self.sets.iter().map(|s| s.links.len()).sum::<usize>() as f64 / self.sets.len() as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TsgenOptions {
    /// After an add pins a node's mode, immediately fill that node's free
    /// sectors with one compatible link each (strategies BA/FA).
    pub per_node_sector_fill: bool,
}

/// Directed link weights: the number of primary paths traversing each
/// direction. Every direction of every active link gets an entry (0 when
/// unused).
pub fn schedule_weights(
    active: &ActiveTopology,
    routing: &RoutingConfig,
) -> BTreeMap<DirectedLink, f64> {
    let mut weights: BTreeMap<DirectedLink, f64> = BTreeMap::new();
    for link in &active.active_links {
        weights.insert(DirectedLink::new(link.a, link.b), 0.0);
        weights.insert(DirectedLink::new(link.b, link.a), 0.0);
    }
    for primary in &routing.primary {
        for pair in primary.path.windows(2) {
            // upstream hop toward the gateway, and its downstream mirror
            for hop in [
                DirectedLink::new(pair[0], pair[1]),
                DirectedLink::new(pair[1], pair[0]),
            ] {
                if let Some(w) = weights.get_mut(&hop) {
                    *w += 1.0;
                }
            }
        }
    }
    weights
}

struct SetState<'a> {
    links: BTreeSet<DirectedLink>,
    mode: BTreeMap<NodeId, Mode>,
    used_sectors: BTreeSet<SectorId>,
    link_table: &'a HashMap<LinkKey, &'a Link>,
}

impl<'a> SetState<'a> {
    fn sector_pair(&self, dl: &DirectedLink) -> (SectorId, SectorId) {
        let link = self.link_table[&dl.key()];
        (
            link.sector_at(dl.tx).unwrap(),
            link.sector_at(dl.rx).unwrap(),
        )
    }

    fn can_add(&self, dl: &DirectedLink) -> bool {
        if self.links.contains(dl) {
            return false;
        }
        let (tx_sector, rx_sector) = self.sector_pair(dl);
        if self.used_sectors.contains(&tx_sector) || self.used_sectors.contains(&rx_sector) {
            return false;
        }
        // "If u is in RX mode or v is in TX mode, link is rejected"
        if self.mode.get(&dl.tx) == Some(&Mode::Rx) || self.mode.get(&dl.rx) == Some(&Mode::Tx) {
            return false;
        }
        true
    }

    /// Adds without re-checking; returns the endpoints whose mode was newly
    /// pinned by this add (tx first).
    fn add(&mut self, dl: DirectedLink) -> Vec<NodeId> {
        let (tx_sector, rx_sector) = self.sector_pair(&dl);
        self.used_sectors.insert(tx_sector);
        self.used_sectors.insert(rx_sector);
        let mut pinned = Vec::new();
        if self.mode.insert(dl.tx, Mode::Tx).is_none() {
            pinned.push(dl.tx);
        }
        if self.mode.insert(dl.rx, Mode::Rx).is_none() {
            pinned.push(dl.rx);
        }
        self.links.insert(dl);
        pinned
    }
}

/// Builds the transmission set collection with the two-pass greedy scheme.
pub fn build_transmission_sets(
    active: &ActiveTopology,
    weights: &BTreeMap<DirectedLink, f64>,
    options: TsgenOptions,
) -> Result<TransmissionSetCollection, Error> {
    let link_table: HashMap<LinkKey, &Link> =
        active.active_links.iter().map(|l| (l.key(), l)).collect();

    // directed universe in scan order: weight descending, then canonical
    let mut universe: Vec<DirectedLink> = active
        .active_links
        .iter()
        .flat_map(|l| [DirectedLink::new(l.a, l.b), DirectedLink::new(l.b, l.a)])
        .collect();
    let weight_of = |dl: &DirectedLink| weights.get(dl).copied().unwrap_or(0.0);
    universe.sort_by(|x, y| weight_of(y).total_cmp(&weight_of(x)).then(x.cmp(y)));

    // directed links per (node, sector index), in the same scan order
    let mut by_sector: HashMap<SectorId, Vec<DirectedLink>> = HashMap::new();
    for dl in &universe {
        let link = link_table[&dl.key()];
        by_sector
            .entry(link.sector_at(dl.tx).unwrap())
            .or_default()
            .push(*dl);
        by_sector
            .entry(link.sector_at(dl.rx).unwrap())
            .or_default()
            .push(*dl);
    }

    let mut covered: BTreeSet<DirectedLink> = BTreeSet::new();
    let mut first_covered: BTreeMap<DirectedLink, usize> = BTreeMap::new();
    let mut sets: Vec<TransmissionSet> = Vec::new();

    while covered.len() < universe.len() {
        let round = sets.len();
        let mut state = SetState {
            links: BTreeSet::new(),
            mode: BTreeMap::new(),
            used_sectors: BTreeSet::new(),
            link_table: &link_table,
        };
        // pass 1: favor links not yet covered; pass 2: fill from all links
        for pass in 0..2 {
            for dl in &universe {
                if pass == 0 && covered.contains(dl) {
                    continue;
                }
                if state.can_add(dl) {
                    let pinned = state.add(*dl);
                    if options.per_node_sector_fill {
                        fill_sectors(&mut state, pinned, &by_sector, active);
                    }
                }
            }
        }
        let mut progressed = false;
        for dl in &state.links {
            if covered.insert(*dl) {
                first_covered.insert(*dl, round);
                progressed = true;
            }
        }
        if !progressed {
            // cannot happen: pass 1 always seats the first uncovered link
            // into an empty set
            let stuck = universe.iter().find(|dl| !covered.contains(dl)).unwrap();
            return Err(Error::CoverageStalled {
                a: stuck.key().0,
                b: stuck.key().1,
            });
        }
        sets.push(TransmissionSet {
            links: state.links.into_iter().collect(),
            mode: state.mode,
        });
    }

    let keys: BTreeSet<LinkKey> = active.active_links.iter().map(Link::key).collect();
    let coverage: Vec<CoverageEntry> = keys
        .iter()
        .map(|&(a, b)| CoverageEntry {
            a,
            b,
            first_ab: first_covered[&DirectedLink::new(a, b)],
            first_ba: first_covered[&DirectedLink::new(b, a)],
        })
        .collect();
    let last = sets.len() - 1;
    let troublesome = coverage
        .iter()
        .filter(|c| c.first_ab == last || c.first_ba == last)
        .map(|c| (c.a, c.b))
        .collect();
    Ok(TransmissionSetCollection {
        sets,
        coverage,
        troublesome,
    })
}

/// Sector-fill cascade: for each node whose mode was just pinned, add the
/// best compatible link for every still-free sector; mode pins from those
/// adds queue further nodes.
fn fill_sectors(
    state: &mut SetState,
    pinned: Vec<NodeId>,
    by_sector: &HashMap<SectorId, Vec<DirectedLink>>,
    active: &ActiveTopology,
) {
    let mut queue: VecDeque<NodeId> = pinned.into();
    while let Some(node) = queue.pop_front() {
        let mode = state.mode[&node];
        let sector_count = active.base.node(node).map(|n| n.sector_count).unwrap_or(0);
        for index in 0..sector_count {
            let sector = SectorId { node, index };
            if state.used_sectors.contains(&sector) {
                continue;
            }
            let candidate = by_sector
                .get(&sector)
                .into_iter()
                .flatten()
                .find(|dl| {
                    let outgoing = dl.tx == node;
                    // direction must match the node's pinned mode
                    if (mode == Mode::Tx) != outgoing {
                        return false;
                    }
                    state.can_add(dl)
                })
                .copied();
            if let Some(dl) = candidate {
                for n in state.add(dl) {
                    queue.push_back(n);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::netmodel::{Layer, Node, Topology};
    use crate::routing::compute_mdst;
    use crate::selection::ActiveTopology;

    fn dl(tx: u32, rx: u32) -> DirectedLink {
        DirectedLink::new(NodeId(tx), NodeId(rx))
    }

    fn uniform_weights(active: &ActiveTopology) -> BTreeMap<DirectedLink, f64> {
        active
            .active_links
            .iter()
            .flat_map(|l| [DirectedLink::new(l.a, l.b), DirectedLink::new(l.b, l.a)])
            .map(|d| (d, 1.0))
            .collect()
    }

    #[test]
    fn diamond_schedule_weights() {
        // primaries: a->g, b->g, c->a->g
        let topo = fixtures::diamond();
        let active = ActiveTopology::from_all_links(&topo);
        let routing = compute_mdst(&active, None).unwrap();
        let weights = schedule_weights(&active, &routing);
        assert_eq!(weights[&dl(3, 1)], 1.0); // (c,a) carries c's primary
        assert_eq!(weights[&dl(1, 0)], 2.0); // (a,g) carries a's and c's
        assert_eq!(weights[&dl(2, 0)], 1.0);
        assert_eq!(weights[&dl(0, 1)], 2.0); // downstream mirror
        assert_eq!(weights[&dl(3, 2)], 0.0); // unused direction
        assert_eq!(weights[&dl(2, 3)], 0.0);
    }

    fn two_node_link() -> Topology {
        let nodes = vec![
            Node {
                id: NodeId(0),
                x: 0.0,
                y: 0.0,
                z: 20.0,
                layer: Layer::Gateway,
                sector_count: 4,
                sector_offset: 0.0,
            },
            Node {
                id: NodeId(1),
                x: 100.0,
                y: 0.0,
                z: 5.0,
                layer: Layer::Street,
                sector_count: 4,
                sector_offset: 0.0,
            },
        ];
        let base = Topology::new(nodes, Vec::new());
        let links = vec![base.make_link(NodeId(0), NodeId(1)).unwrap()];
        Topology::new(base.nodes().to_vec(), links)
    }

    #[test]
    fn single_link_two_sets() {
        let topo = two_node_link();
        let active = ActiveTopology::from_all_links(&topo);
        let tss =
            build_transmission_sets(&active, &uniform_weights(&active), TsgenOptions::default())
                .unwrap();
        assert_eq!(tss.len(), 2);
        assert_eq!(tss.sets[0].links, vec![dl(0, 1)]);
        assert_eq!(tss.sets[1].links, vec![dl(1, 0)]);
        assert_eq!(tss.sets[0].mode[&NodeId(0)], Mode::Tx);
        assert_eq!(tss.sets[0].mode[&NodeId(1)], Mode::Rx);
        // the reverse direction lands in the final round; the gated view is
        // empty when the threshold is not exceeded
        assert_eq!(tss.troublesome, BTreeSet::from([(NodeId(0), NodeId(1))]));
        assert!(tss.troublesome_when_exceeding(3).is_empty());
    }

    #[test]
    fn path_covers_in_two_sets() {
        // u(0) - v(1) - w(2) with the two links in distinct sectors of v:
        // both inward directions share one slot, both outward the other
        let topo = fixtures::chain();
        let active = ActiveTopology::from_all_links(&topo);
        let tss =
            build_transmission_sets(&active, &uniform_weights(&active), TsgenOptions::default())
                .unwrap();
        assert_eq!(tss.len(), 2);
        assert_eq!(tss.sets[0].links, vec![dl(0, 1), dl(2, 1)]);
        assert_eq!(tss.sets[0].mode[&NodeId(1)], Mode::Rx);
        assert_eq!(tss.sets[1].links, vec![dl(1, 0), dl(1, 2)]);
        assert_eq!(tss.sets[1].mode[&NodeId(1)], Mode::Tx);
    }

    /// Brute-force addability oracle: a set is maximal iff no remaining
    /// directed link passes the sector and mode rules.
    fn assert_maximal(active: &ActiveTopology, set: &TransmissionSet) {
        let link_table: HashMap<LinkKey, &Link> =
            active.active_links.iter().map(|l| (l.key(), l)).collect();
        let mut used = BTreeSet::new();
        for dl in &set.links {
            let l = link_table[&dl.key()];
            used.insert(l.sector_at(dl.tx).unwrap());
            used.insert(l.sector_at(dl.rx).unwrap());
        }
        for l in &active.active_links {
            for cand in [DirectedLink::new(l.a, l.b), DirectedLink::new(l.b, l.a)] {
                if set.contains(&cand) {
                    continue;
                }
                let tx_sector = l.sector_at(cand.tx).unwrap();
                let rx_sector = l.sector_at(cand.rx).unwrap();
                let sector_free = !used.contains(&tx_sector) && !used.contains(&rx_sector);
                let mode_ok = set.mode.get(&cand.tx) != Some(&Mode::Rx)
                    && set.mode.get(&cand.rx) != Some(&Mode::Tx);
                assert!(
                    !(sector_free && mode_ok),
                    "set is not maximal: {cand} could be added"
                );
            }
        }
    }

    fn assert_conflict_free(active: &ActiveTopology, set: &TransmissionSet) {
        let link_table: HashMap<LinkKey, &Link> =
            active.active_links.iter().map(|l| (l.key(), l)).collect();
        let mut used = BTreeSet::new();
        for dl in &set.links {
            let l = link_table[&dl.key()];
            assert!(used.insert(l.sector_at(dl.tx).unwrap()), "sector reused");
            assert!(used.insert(l.sector_at(dl.rx).unwrap()), "sector reused");
            assert_eq!(set.mode[&dl.tx], Mode::Tx);
            assert_eq!(set.mode[&dl.rx], Mode::Rx);
        }
    }

    #[test]
    fn diamond_sets_are_maximal_and_cover_everything() {
        let topo = fixtures::diamond();
        let active = ActiveTopology::from_all_links(&topo);
        let routing = compute_mdst(&active, None).unwrap();
        let weights = schedule_weights(&active, &routing);
        for fill in [false, true] {
            let tss = build_transmission_sets(
                &active,
                &weights,
                TsgenOptions {
                    per_node_sector_fill: fill,
                },
            )
            .unwrap();
            for set in &tss.sets {
                assert_conflict_free(&active, set);
                assert_maximal(&active, set);
            }
            // both directions of every active link covered
            let mut covered: BTreeSet<DirectedLink> = BTreeSet::new();
            for set in &tss.sets {
                covered.extend(set.links.iter().copied());
            }
            for l in &active.active_links {
                assert!(covered.contains(&DirectedLink::new(l.a, l.b)));
                assert!(covered.contains(&DirectedLink::new(l.b, l.a)));
            }
            // first-coverage bookkeeping matches the sets
            for entry in &tss.coverage {
                let ab = DirectedLink::new(entry.a, entry.b);
                assert!(tss.sets[entry.first_ab].contains(&ab));
                assert!(!tss.sets[..entry.first_ab].iter().any(|s| s.contains(&ab)));
            }
        }
    }

    #[test]
    fn determinism_under_fixed_tie_break() {
        let topo = fixtures::diamond();
        let active = ActiveTopology::from_all_links(&topo);
        let weights = uniform_weights(&active);
        let t1 = build_transmission_sets(&active, &weights, TsgenOptions::default()).unwrap();
        let t2 = build_transmission_sets(&active, &weights, TsgenOptions::default()).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn sector_fill_extends_slots() {
        // with fill on, the star gateway transmits on all its used sectors
        // in the very first slot
        let topo = fixtures::star();
        let active = ActiveTopology::from_all_links(&topo);
        let weights = uniform_weights(&active);
        let filled = build_transmission_sets(
            &active,
            &weights,
            TsgenOptions {
                per_node_sector_fill: true,
            },
        )
        .unwrap();
        assert_eq!(filled.sets[0].links.len(), 3);
        for set in &filled.sets {
            assert_conflict_free(&active, set);
            assert_maximal(&active, set);
        }
    }
}
