//! Random dense-urban test topologies: a three-layer perturbed grid with a
//! distance- and height-dependent line-of-sight link probability.
//!
//! All randomness comes from a single ChaCha8 stream seeded from
//! `GeneratorConfig::seed`, consumed in a fixed order so outputs are
//! reproducible: layers in config order, grid cells row-major (y outer,
//! x inner), three uniform draws per node (x jitter, y jitter, height), then
//! one uniform draw per node pair in canonical order for the link coin-flip.
//! The coin-flip is drawn even when the probability is 0 or 1, so the draw
//! sequence does not depend on geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::netmodel::{distance, Layer, Node, NodeId, Topology};

/// Perturbed-grid parameters for one node layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub layer: Layer,
    /// Grid cell size in meters; one node per cell.
    pub grid_cell: f64,
    /// Maximum per-axis perturbation from the cell center, meters.
    pub jitter: f64,
    /// `[min, max]` node height in meters.
    pub height_range: [f64; 2],
    /// `[width, height]` of the deployment area in meters; the grid covers
    /// `[0, width] x [0, height]`.
    pub area: [f64; 2],
}

/// Line-of-sight probability model. The returned probability is
/// non-increasing in distance and non-decreasing in each endpoint height:
///
/// `p = clamp((1 - (d / max_range)^range_decay) * (1 + height_bonus * (z_a + z_b) / max_range), 0, 1)`
///
/// with `p = 0` for `d >= max_range`. The functional form is a model choice;
/// only the monotonicity directions are constrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosModel {
    pub max_range: f64,
    pub range_decay: f64,
    pub height_bonus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub layers: Vec<LayerSpec>,
    pub los: LosModel,
    pub seed: u64,
    pub sector_count: u32,
}

/// Paper-scale preset: three layers over an 800x800 m area producing 72
/// nodes per seed (64 street, 4 rooftop, 4 gateway). Preset values live in
/// `presets/paper_scale.json`.
pub fn paper_scale() -> GeneratorConfig {
    serde_json::from_str(include_str!("../presets/paper_scale.json"))
        .expect("bundled preset parses")
}

impl GeneratorConfig {
    /// Hard validation errors plus soft warnings (layer ordering hints).
    pub fn validate(&self) -> Result<Vec<String>, Error> {
        let mut warnings = Vec::new();
        for kind in [Layer::Street, Layer::RoofTop, Layer::Gateway] {
            let count = self.layers.iter().filter(|l| l.layer == kind).count();
            if count != 1 {
                return Err(Error::InvalidConfig(format!(
                    "expected exactly one {kind} layer spec, found {count}"
                )));
            }
        }
        for spec in &self.layers {
            if !(spec.grid_cell > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "layer {}: grid_cell must be positive",
                    spec.layer
                )));
            }
            if spec.jitter < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "layer {}: jitter must be non-negative",
                    spec.layer
                )));
            }
            if spec.height_range[0] > spec.height_range[1] {
                return Err(Error::InvalidConfig(format!(
                    "layer {}: height_range min exceeds max",
                    spec.layer
                )));
            }
            if !(spec.area[0] > 0.0 && spec.area[1] > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "layer {}: empty area",
                    spec.layer
                )));
            }
        }
        if self.sector_count == 0 {
            return Err(Error::InvalidConfig("sector_count must be >= 1".into()));
        }
        if self.los.max_range < 0.0 || self.los.range_decay <= 0.0 || self.los.height_bonus < 0.0 {
            return Err(Error::InvalidConfig(
                "los model needs max_range >= 0, range_decay > 0, height_bonus >= 0".into(),
            ));
        }
        let cell = |kind: Layer| {
            self.layers
                .iter()
                .find(|l| l.layer == kind)
                .map(|l| l.grid_cell)
                .unwrap()
        };
        if cell(Layer::Street) > cell(Layer::RoofTop) || cell(Layer::RoofTop) > cell(Layer::Gateway)
        {
            warnings.push(
                "grid cells usually grow street < rooftop < gateway; check layer specs".into(),
            );
        }
        Ok(warnings)
    }
}

fn layer_name(layer: Layer) -> &'static str {
    match layer {
        Layer::Street => "street",
        Layer::RoofTop => "rooftop",
        Layer::Gateway => "gateway",
    }
}

/// Places one node per grid cell for each layer: cell center plus uniform
/// jitter in `[-jitter, +jitter]` per axis, height uniform in the layer's
/// range. Node ids are assigned sequentially in draw order.
pub fn generate_nodes(config: &GeneratorConfig) -> Result<Vec<Node>, Error> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    generate_nodes_with(config, &mut rng)
}

fn generate_nodes_with(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Node>, Error> {
    let mut nodes = Vec::new();
    for spec in &config.layers {
        let nx = (spec.area[0] / spec.grid_cell).floor() as usize;
        let ny = (spec.area[1] / spec.grid_cell).floor() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::GridCellTooLarge {
                layer: layer_name(spec.layer),
                cell: spec.grid_cell,
                width: spec.area[0],
                height: spec.area[1],
            });
        }
        let [zmin, zmax] = spec.height_range;
        for cy in 0..ny {
            for cx in 0..nx {
                let ux: f64 = rng.gen();
                let uy: f64 = rng.gen();
                let uz: f64 = rng.gen();
                nodes.push(Node {
                    id: NodeId(nodes.len() as u32),
                    x: (cx as f64 + 0.5) * spec.grid_cell + (2.0 * ux - 1.0) * spec.jitter,
                    y: (cy as f64 + 0.5) * spec.grid_cell + (2.0 * uy - 1.0) * spec.jitter,
                    z: zmin + uz * (zmax - zmin),
                    layer: spec.layer,
                    sector_count: config.sector_count,
                    sector_offset: 0.0,
                });
            }
        }
    }
    Ok(nodes)
}

/// Line-of-sight probability between two nodes under `model`.
pub fn los_probability(model: &LosModel, a: &Node, b: &Node) -> f64 {
    let d = distance(a, b);
    if d >= model.max_range {
        return 0.0;
    }
    let range_term = 1.0 - (d / model.max_range).powf(model.range_decay);
    let height_term = 1.0 + model.height_bonus * (a.z + b.z) / model.max_range;
    (range_term * height_term).clamp(0.0, 1.0)
}

/// Generates nodes, then flips one coin per unordered node pair (canonical
/// id order) against [`los_probability`]. Node and pair draws share one
/// stream, node draws first.
pub fn generate_topology(config: &GeneratorConfig) -> Result<Topology, Error> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let nodes = generate_nodes_with(config, &mut rng)?;
    let base = Topology::new(nodes, Vec::new());
    let mut links = Vec::new();
    for i in 0..base.n() {
        for j in (i + 1)..base.n() {
            let a = &base.nodes()[i];
            let b = &base.nodes()[j];
            let p = los_probability(&config.los, a, b);
            let u: f64 = rng.gen();
            if u < p {
                links.push(base.make_link(a.id, b.id)?);
            }
        }
    }
    Ok(Topology::new(base.nodes().to_vec(), links))
}
