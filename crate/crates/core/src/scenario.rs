//! Seeded generation of simulation scenarios: jittered-grid base stations, a
//! distance-threshold mesh backhaul and geometric CBS draws with an optional
//! hotspot.
//!
//! All randomness comes from one ChaCha stream per scenario, consumed in a
//! fixed order: per-vertex jitter (x then y, ascending vertex id), the hotspot
//! center (x then y), then the CBS centers (hotspot CBSs first, each redraw in
//! place).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{BackhaulGraph, Rate, Vertex, VertexId};

pub type ScenarioRng = ChaCha8Rng;

/// Upper bound on center redraws for a single CBS before giving up.
const MAX_REDRAWS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Base stations per grid dimension.
    pub grid_side: usize,
    /// Mean inter-BS distance, meters.
    pub mean_spacing: f64,
    /// Position jitter std-dev, meters. Defaults to `mean_spacing / 8`.
    pub jitter_sigma: Option<f64>,
    pub mesh_factor: f64,
    #[serde(rename = "K", alias = "k")]
    pub wavelength_count: usize,
    /// Gb/s per wavelength.
    pub wavelength_capacity: f64,
    pub cbs_count: usize,
    pub hotspot_fraction: f64,
    /// Defaults to `mean_spacing / 4`.
    pub hotspot_sigma: Option<f64>,
    pub cbs_radius_factor: f64,
    /// Gb/s per CBS member.
    pub demand: f64,
    /// Round-trip budget, seconds.
    pub rtt_budget: f64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            grid_side: 10,
            mean_spacing: 1000.0,
            jitter_sigma: None,
            mesh_factor: 1.5,
            wavelength_count: 4,
            wavelength_capacity: 2.5,
            cbs_count: 50,
            hotspot_fraction: 0.0,
            hotspot_sigma: None,
            cbs_radius_factor: 1.5,
            demand: 1.25,
            rtt_budget: 5e-4,
            seed: 0,
        }
    }
}

impl ScenarioParams {
    pub fn jitter_sigma(&self) -> f64 {
        self.jitter_sigma.unwrap_or(self.mean_spacing / 8.0)
    }

    pub fn hotspot_sigma(&self) -> f64 {
        self.hotspot_sigma.unwrap_or(self.mean_spacing / 4.0)
    }

    pub fn cbs_radius(&self) -> f64 {
        self.cbs_radius_factor * self.mean_spacing
    }

    pub fn demand_rate(&self) -> Result<Rate> {
        Rate::from_gbps(self.demand)
    }

    pub fn capacity_rate(&self) -> Result<Rate> {
        Rate::from_gbps(self.wavelength_capacity)
    }

    pub fn hotspot_cbs_count(&self) -> usize {
        (self.hotspot_fraction * self.cbs_count as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        if self.grid_side == 0 {
            return Err(Error::Config("grid_side must be >= 1".into()));
        }
        if self.wavelength_count == 0 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if self.cbs_count == 0 {
            return Err(Error::Config("cbs_count must be >= 1".into()));
        }
        positive("mean_spacing", self.mean_spacing)?;
        positive("mesh_factor", self.mesh_factor)?;
        positive("cbs_radius_factor", self.cbs_radius_factor)?;
        positive("rtt_budget", self.rtt_budget)?;
        positive("demand", self.demand)?;
        positive("wavelength_capacity", self.wavelength_capacity)?;
        for (name, sigma) in [("jitter_sigma", self.jitter_sigma()), ("hotspot_sigma", self.hotspot_sigma())] {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {sigma}")));
            }
        }
        if !(0.0..=1.0).contains(&self.hotspot_fraction) {
            return Err(Error::Config(format!(
                "hotspot_fraction must lie in [0, 1], got {}",
                self.hotspot_fraction
            )));
        }
        self.demand_rate().map_err(|e| Error::Config(e.to_string()))?;
        self.capacity_rate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Parses flat `key = value` text. Unset keys keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }
}

/// A desired coordinated base-station set.
#[derive(Clone, Debug, PartialEq)]
pub struct CbsSpec {
    pub id: usize,
    /// Sorted, duplicate-free vertex ids.
    pub members: Vec<VertexId>,
    pub demand: Rate,
    /// Round-trip seconds.
    pub rtt_budget: f64,
    /// Provenance only; the placement algorithm ignores it.
    pub hotspot_generated: bool,
}

impl CbsSpec {
    pub fn new(id: usize, mut members: Vec<VertexId>, demand: Rate, rtt_budget: f64) -> Self {
        members.sort_unstable();
        members.dedup();
        Self {
            id,
            members,
            demand,
            rtt_budget,
            hotspot_generated: false,
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn check_against(&self, graph: &BackhaulGraph) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::invalid(format!("CBS {} has no members", self.id)));
        }
        if let Some(&v) = self.members.iter().find(|&&v| v >= graph.vertex_count()) {
            return Err(Error::invalid(format!("CBS {} names unknown vertex {v}", self.id)));
        }
        if self.demand.is_zero() || self.rtt_budget.is_nan() || self.rtt_budget <= 0.0 {
            return Err(Error::invalid(format!(
                "CBS {} needs positive demand and RTT budget",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub graph: BackhaulGraph,
    pub cbs: Vec<CbsSpec>,
}

pub fn scenario_rng(seed: u64) -> ScenarioRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative")
}

/// Grid cell `(i, j)` becomes vertex `i * grid_side + j` at `(i·s̄, j·s̄)` plus
/// independent Gaussian jitter per axis.
pub fn place_base_stations(params: &ScenarioParams, rng: &mut ScenarioRng) -> Vec<Vertex> {
    let jitter = normal(params.jitter_sigma());
    let side = params.grid_side;
    (0..side * side)
        .map(|id| {
            let (i, j) = (id / side, id % side);
            let x = i as f64 * params.mean_spacing + jitter.sample(rng);
            let y = j as f64 * params.mean_spacing + jitter.sample(rng);
            Vertex { id, x, y }
        })
        .collect()
}

/// Links every pair of vertices at most `mesh_factor · mean_spacing` apart.
pub fn generate_mesh(vertices: &[Vertex], params: &ScenarioParams) -> Result<BackhaulGraph> {
    let mut graph = BackhaulGraph::new(params.wavelength_count, params.capacity_rate()?)?;
    for v in vertices {
        graph.add_vertex(v.x, v.y);
    }
    let reach = params.mesh_factor * params.mean_spacing;
    for (a, va) in vertices.iter().enumerate() {
        for (b, vb) in vertices.iter().enumerate().skip(a + 1) {
            let d = va.distance(vb);
            if d <= reach {
                graph.add_link(a, b, d, None)?;
            }
        }
    }
    Ok(graph)
}

struct BoundingBox {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl BoundingBox {
    fn of(vertices: &[Vertex]) -> Self {
        let mut bb = BoundingBox {
            min_x: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            min_y: f64::INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for v in vertices {
            bb.min_x = bb.min_x.min(v.x);
            bb.max_x = bb.max_x.max(v.x);
            bb.min_y = bb.min_y.min(v.y);
            bb.max_y = bb.max_y.max(v.y);
        }
        bb
    }

    fn sample(&self, rng: &mut ScenarioRng) -> (f64, f64) {
        let x = self.min_x + (self.max_x - self.min_x) * rng.random::<f64>();
        let y = self.min_y + (self.max_y - self.min_y) * rng.random::<f64>();
        (x, y)
    }
}

fn members_within(graph: &BackhaulGraph, (cx, cy): (f64, f64), radius: f64) -> Vec<VertexId> {
    graph
        .vertices()
        .iter()
        .filter(|v| (v.x - cx).hypot(v.y - cy) <= radius)
        .map(|v| v.id)
        .collect()
}

/// Draws `cbs_count` CBSs. The first `round(h · cbs_count)` are centered
/// around a common hotspot, the rest uniformly over the BS bounding box.
pub fn generate_cbs_set(
    graph: &BackhaulGraph,
    params: &ScenarioParams,
    rng: &mut ScenarioRng,
) -> Result<Vec<CbsSpec>> {
    if graph.vertex_count() == 0 {
        return Err(Error::invalid("cannot draw CBSs on an empty graph"));
    }
    let demand = params.demand_rate()?;
    let bbox = BoundingBox::of(graph.vertices());
    let hotspot_center = bbox.sample(rng);
    let spread = normal(params.hotspot_sigma());
    let hotspot_count = params.hotspot_cbs_count().min(params.cbs_count);
    let radius = params.cbs_radius();

    let mut out = Vec::with_capacity(params.cbs_count);
    for id in 0..params.cbs_count {
        let hotspot = id < hotspot_count;
        let mut attempts = 0;
        let members = loop {
            let center = if hotspot {
                (
                    hotspot_center.0 + spread.sample(rng),
                    hotspot_center.1 + spread.sample(rng),
                )
            } else {
                bbox.sample(rng)
            };
            let members = members_within(graph, center, radius);
            if !members.is_empty() {
                break members;
            }
            attempts += 1;
            if attempts >= MAX_REDRAWS {
                return Err(Error::invalid(format!(
                    "CBS {id}: no base station within {radius} m after {MAX_REDRAWS} draws"
                )));
            }
        };
        let mut spec = CbsSpec::new(id, members, demand, params.rtt_budget);
        spec.hotspot_generated = hotspot;
        out.push(spec);
    }
    Ok(out)
}

/// Builds the full scenario from `params.seed`.
pub fn generate(params: &ScenarioParams) -> Result<Scenario> {
    params.validate()?;
    let mut rng = scenario_rng(params.seed);
    let vertices = place_base_stations(params, &mut rng);
    let graph = generate_mesh(&vertices, params)?;
    let cbs = generate_cbs_set(&graph, params, &mut rng)?;
    Ok(Scenario { graph, cbs })
}
