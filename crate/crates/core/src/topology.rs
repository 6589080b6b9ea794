//! Annotated backhaul graph: base-station vertices, fiber links and the
//! per-link wavelength capacity bookkeeping.
//!
//! Rates are held as exact multiples of 1/16 Gb/s so admission checks never
//! accumulate rounding error. Latencies stay in floating-point seconds.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Propagation slow-down of light in fiber relative to vacuum.
pub const FIBER_LATENCY_FACTOR: f64 = 1.45;

/// One-way propagation latency in seconds of a fiber of `length` meters.
pub fn link_latency(length: f64) -> Result<f64> {
    if !length.is_finite() || length < 0.0 {
        return Err(Error::invalid(format!("link length must be >= 0, got {length}")));
    }
    Ok(length * FIBER_LATENCY_FACTOR / SPEED_OF_LIGHT)
}

/// A data rate in exact units of 1/16 Gb/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(u64);

impl Rate {
    pub const UNITS_PER_GBPS: u64 = 16;
    pub const ZERO: Rate = Rate(0);

    pub const fn from_units(units: u64) -> Self {
        Rate(units)
    }

    /// Converts a Gb/s value; it must be a non-negative multiple of 1/16 Gb/s.
    pub fn from_gbps(gbps: f64) -> Result<Self> {
        let scaled = gbps * Self::UNITS_PER_GBPS as f64;
        let rounded = scaled.round();
        if !scaled.is_finite() || gbps < 0.0 || (scaled - rounded).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "rate {gbps} Gb/s is not a non-negative multiple of 1/16 Gb/s"
            )));
        }
        Ok(Rate(rounded as u64))
    }

    pub const fn units(self) -> u64 {
        self.0
    }

    pub fn gbps(self) -> f64 {
        self.0 as f64 / Self::UNITS_PER_GBPS as f64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_sub(self, rhs: Rate) -> Option<Rate> {
        self.0.checked_sub(rhs.0).map(Rate)
    }

    pub fn saturating_sub(self, rhs: Rate) -> Rate {
        Rate(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Rate {
    type Output = Rate;
    fn add(self, rhs: Rate) -> Rate {
        Rate(self.0 + rhs.0)
    }
}

impl AddAssign for Rate {
    fn add_assign(&mut self, rhs: Rate) {
        self.0 += rhs.0;
    }
}

impl Sub for Rate {
    type Output = Rate;
    fn sub(self, rhs: Rate) -> Rate {
        Rate(self.0 - rhs.0)
    }
}

impl SubAssign for Rate {
    fn sub_assign(&mut self, rhs: Rate) {
        self.0 -= rhs.0;
    }
}

impl std::iter::Sum for Rate {
    fn sum<I: Iterator<Item = Rate>>(iter: I) -> Rate {
        iter.fold(Rate::ZERO, Add::add)
    }
}

/// Formats as Gb/s. Every rate is a dyadic rational, so this is exact.
impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.gbps())
    }
}

pub type VertexId = usize;
pub type LinkId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    /// Position in meters.
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn distance(&self, other: &Vertex) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WavelengthState {
    pub capacity: Rate,
    pub allocated: Rate,
}

impl WavelengthState {
    pub fn residual(&self) -> Rate {
        self.capacity - self.allocated
    }

    pub fn active(&self) -> bool {
        !self.allocated.is_zero()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    /// Endpoints with `u < v`.
    pub u: VertexId,
    pub v: VertexId,
    /// Meters.
    pub length: f64,
    /// One-way seconds.
    pub latency: f64,
    pub wavelengths: Vec<WavelengthState>,
}

impl Link {
    pub fn residual(&self, wavelength: usize) -> Result<Rate> {
        self.wavelengths
            .get(wavelength)
            .map(WavelengthState::residual)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "wavelength {wavelength} out of range (K = {})",
                    self.wavelengths.len()
                ))
            })
    }

    /// The endpoint opposite to `x`.
    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn active_count(&self) -> usize {
        self.wavelengths.iter().filter(|w| w.active()).count()
    }
}

/// Undirected backhaul graph. Capacity is shared by both directions of a link.
#[derive(Clone, Debug, PartialEq)]
pub struct BackhaulGraph {
    vertices: Vec<Vertex>,
    links: Vec<Link>,
    /// Incident links per vertex, sorted by neighbor id.
    adjacency: Vec<Vec<LinkId>>,
    wavelength_count: usize,
    wavelength_capacity: Rate,
}

impl BackhaulGraph {
    pub fn new(wavelength_count: usize, wavelength_capacity: Rate) -> Result<Self> {
        if wavelength_count == 0 {
            return Err(Error::invalid("wavelength count K must be positive"));
        }
        if wavelength_capacity.is_zero() {
            return Err(Error::invalid("wavelength capacity must be positive"));
        }
        Ok(Self {
            vertices: Vec::new(),
            links: Vec::new(),
            adjacency: Vec::new(),
            wavelength_count,
            wavelength_capacity,
        })
    }

    pub fn add_vertex(&mut self, x: f64, y: f64) -> VertexId {
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, x, y });
        self.adjacency.push(Vec::new());
        id
    }

    /// Adds an undirected link. The latency defaults to the fiber model.
    pub fn add_link(
        &mut self,
        a: VertexId,
        b: VertexId,
        length: f64,
        latency: Option<f64>,
    ) -> Result<LinkId> {
        if a == b {
            return Err(Error::invalid(format!("self-loop on vertex {a}")));
        }
        let n = self.vertices.len();
        if a >= n || b >= n {
            return Err(Error::invalid(format!("link {a}-{b} names an unknown vertex")));
        }
        if self.link_between(a, b).is_some() {
            return Err(Error::invalid(format!("duplicate link {a}-{b}")));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::invalid(format!("link {a}-{b} length must be > 0")));
        }
        let latency = match latency {
            Some(l) if l >= 0.0 && l.is_finite() => l,
            Some(l) => return Err(Error::invalid(format!("link {a}-{b} latency {l} must be >= 0"))),
            None => link_latency(length)?,
        };
        let id = self.links.len();
        self.links.push(Link {
            u: a.min(b),
            v: a.max(b),
            length,
            latency,
            wavelengths: vec![
                WavelengthState {
                    capacity: self.wavelength_capacity,
                    allocated: Rate::ZERO,
                };
                self.wavelength_count
            ],
        });
        for (x, y) in [(a, b), (b, a)] {
            let pos = self.adjacency[x].partition_point(|&l| self.links[l].other(x) < y);
            self.adjacency[x].insert(pos, id);
        }
        Ok(id)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn wavelength_count(&self) -> usize {
        self.wavelength_count
    }

    pub fn wavelength_capacity(&self) -> Rate {
        self.wavelength_capacity
    }

    pub fn incident_links(&self, v: VertexId) -> &[LinkId] {
        &self.adjacency[v]
    }

    /// Neighbors of `v` in ascending vertex id, with the connecting link.
    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = (VertexId, LinkId)> + '_ {
        self.adjacency[v].iter().map(move |&l| (self.links[l].other(v), l))
    }

    pub fn link_between(&self, a: VertexId, b: VertexId) -> Option<LinkId> {
        let adj = self.adjacency.get(a)?;
        let pos = adj.partition_point(|&l| self.links[l].other(a) < b);
        adj.get(pos).copied().filter(|&l| self.links[l].other(a) == b)
    }

    pub fn residual(&self, link: LinkId, wavelength: usize) -> Result<Rate> {
        self.links
            .get(link)
            .ok_or_else(|| Error::invalid(format!("unknown link {link}")))?
            .residual(wavelength)
    }

    /// Links traversed by a vertex path.
    pub fn path_links(&self, path: &[VertexId]) -> Result<Vec<LinkId>> {
        path.windows(2)
            .map(|hop| {
                self.link_between(hop[0], hop[1])
                    .ok_or_else(|| Error::invalid(format!("no link between {} and {}", hop[0], hop[1])))
            })
            .collect()
    }

    /// Sum of one-way link latencies along a vertex path.
    pub fn path_latency(&self, path: &[VertexId]) -> Result<f64> {
        Ok(self
            .path_links(path)?
            .into_iter()
            .map(|l| self.links[l].latency)
            .sum())
    }

    fn resolve_hops(
        &self,
        path: &[VertexId],
        assignment: &[usize],
    ) -> Result<Vec<(LinkId, usize)>> {
        if path.is_empty() {
            return Err(Error::invalid("empty path"));
        }
        if assignment.len() + 1 != path.len() {
            return Err(Error::invalid(format!(
                "path of {} vertices needs {} wavelength labels, got {}",
                path.len(),
                path.len() - 1,
                assignment.len()
            )));
        }
        let links = self.path_links(path)?;
        let k = self.wavelength_count;
        links
            .into_iter()
            .zip(assignment)
            .map(|(l, &w)| {
                if w >= k {
                    Err(Error::invalid(format!("wavelength {w} out of range (K = {k})")))
                } else {
                    Ok((l, w))
                }
            })
            .collect()
    }

    /// Adds `demand` on every hop of `path` at the given per-hop wavelength.
    /// Either every hop is allocated or the graph is left untouched.
    pub fn allocate_path(&mut self, path: &[VertexId], assignment: &[usize], demand: Rate) -> Result<()> {
        let hops = self.resolve_hops(path, assignment)?;
        let mut needed: BTreeMap<(LinkId, usize), Rate> = BTreeMap::new();
        for &hop in &hops {
            *needed.entry(hop).or_default() += demand;
        }
        // Report the first violating hop in path order.
        for &(l, w) in &hops {
            let residual = self.links[l].wavelengths[w].residual();
            if residual < needed[&(l, w)] {
                let link = &self.links[l];
                return Err(Error::Capacity {
                    u: link.u,
                    v: link.v,
                    wavelength: w,
                    residual: residual.gbps(),
                    demand: demand.gbps(),
                });
            }
        }
        for (l, w) in hops {
            self.links[l].wavelengths[w].allocated += demand;
        }
        Ok(())
    }

    /// Inverse of [`allocate_path`](Self::allocate_path).
    pub fn release_path(&mut self, path: &[VertexId], assignment: &[usize], demand: Rate) -> Result<()> {
        let hops = self.resolve_hops(path, assignment)?;
        let mut freed: BTreeMap<(LinkId, usize), Rate> = BTreeMap::new();
        for &hop in &hops {
            *freed.entry(hop).or_default() += demand;
        }
        for (&(l, w), &amount) in &freed {
            if self.links[l].wavelengths[w].allocated < amount {
                return Err(Error::invalid(format!(
                    "releasing {amount} Gb/s from link {l} wavelength {w} exceeds its allocation"
                )));
            }
        }
        for (l, w) in hops {
            self.links[l].wavelengths[w].allocated -= demand;
        }
        Ok(())
    }

    pub fn release_all(&mut self) {
        for link in &mut self.links {
            for w in &mut link.wavelengths {
                w.allocated = Rate::ZERO;
            }
        }
    }

    /// Number of (link, wavelength) pairs currently carrying traffic.
    pub fn active_wavelengths(&self) -> usize {
        self.links.iter().map(Link::active_count).sum()
    }

    /// Rebuilds the adjacency from the link list and compares.
    pub fn adjacency_consistent(&self) -> bool {
        let mut rebuilt = vec![Vec::new(); self.vertices.len()];
        for (id, link) in self.links.iter().enumerate() {
            rebuilt[link.u].push((link.v, id));
            rebuilt[link.v].push((link.u, id));
        }
        rebuilt.iter_mut().enumerate().all(|(x, adj)| {
            adj.sort_unstable();
            let ours: Vec<_> = self.neighbors(x).collect();
            *adj == ours
        })
    }

    /// Allocation state of every (link, wavelength) pair, link-major.
    pub fn allocation_snapshot(&self) -> Vec<Rate> {
        self.links
            .iter()
            .flat_map(|l| l.wavelengths.iter().map(|w| w.allocated))
            .collect()
    }
}
