//! Small canonical topologies used by tests, docs, and the CLI `fixture`
//! command.

use crate::netmodel::{Layer, Node, NodeId, Topology};

fn node(id: u32, x: f64, y: f64, z: f64, layer: Layer) -> Node {
    Node {
        id: NodeId(id),
        x,
        y,
        z,
        layer,
        sector_count: 4,
        sector_offset: 0.0,
    }
}

/// The diamond fixture: gateway `g` (id 0), relays `a` (1) and `b` (2),
/// leaf `c` (3), links g-a, g-b, a-c, b-c.
///
/// Geometry is chosen so that g's two links land in different sectors of g
/// and c's two links land in different sectors of c (4 sectors, offset 0).
pub fn diamond() -> Topology {
    let nodes = vec![
        node(0, 0.0, 0.0, 30.0, Layer::Gateway),
        node(1, 100.0, 100.0, 10.0, Layer::RoofTop),
        node(2, 100.0, -100.0, 10.0, Layer::RoofTop),
        node(3, 200.0, 0.0, 5.0, Layer::Street),
    ];
    let base = Topology::new(nodes, Vec::new());
    let links = [(0, 1), (0, 2), (1, 3), (2, 3)]
        .iter()
        .map(|&(a, b)| base.make_link(NodeId(a), NodeId(b)).unwrap())
        .collect();
    Topology::new(base.nodes().to_vec(), links)
}

/// Gateway 0 with three street-level leaves, each in a different sector.
pub fn star() -> Topology {
    let nodes = vec![
        node(0, 0.0, 0.0, 30.0, Layer::Gateway),
        node(1, 100.0, 10.0, 5.0, Layer::Street),
        node(2, -10.0, 100.0, 5.0, Layer::Street),
        node(3, -100.0, -10.0, 5.0, Layer::Street),
    ];
    let base = Topology::new(nodes, Vec::new());
    let links = [(0, 1), (0, 2), (0, 3)]
        .iter()
        .map(|&(a, b)| base.make_link(NodeId(a), NodeId(b)).unwrap())
        .collect();
    Topology::new(base.nodes().to_vec(), links)
}

/// Chain g(0) - a(1) - b(2); links in distinct sectors of the middle node.
pub fn chain() -> Topology {
    let nodes = vec![
        node(0, 0.0, 0.0, 30.0, Layer::Gateway),
        node(1, 100.0, 50.0, 10.0, Layer::RoofTop),
        node(2, 200.0, 0.0, 5.0, Layer::Street),
    ];
    let base = Topology::new(nodes, Vec::new());
    let links = [(0, 1), (1, 2)]
        .iter()
        .map(|&(a, b)| base.make_link(NodeId(a), NodeId(b)).unwrap())
        .collect();
    Topology::new(base.nodes().to_vec(), links)
}

/// Fixture registry for the CLI.
pub fn by_name(name: &str) -> Option<Topology> {
    match name {
        "diamond" => Some(diamond()),
        "star" => Some(star()),
        "chain" => Some(chain()),
        _ => None,
    }
}

pub const NAMES: &[&str] = &["diamond", "star", "chain"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::sector_of;

    #[test]
    fn fixtures_are_valid() {
        for name in NAMES {
            let topo = by_name(name).unwrap();
            assert!(topo.validate().is_empty(), "{name}: {:?}", topo.validate());
        }
    }

    #[test]
    fn diamond_sector_geometry() {
        let topo = diamond();
        let g = topo.node(NodeId(0)).unwrap();
        let a = topo.node(NodeId(1)).unwrap();
        let b = topo.node(NodeId(2)).unwrap();
        let c = topo.node(NodeId(3)).unwrap();
        // g's links to a and b use different sectors of g
        let ga = sector_of(g, a.position()).unwrap().index;
        let gb = sector_of(g, b.position()).unwrap().index;
        assert_ne!(ga, gb);
        // c's links to a and b use different sectors of c
        let ca = sector_of(c, a.position()).unwrap().index;
        let cb = sector_of(c, b.position()).unwrap().index;
        assert_ne!(ca, cb);
    }
}
