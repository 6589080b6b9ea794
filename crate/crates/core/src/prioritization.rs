//! Splits the desired CBSs into hotspot and normal classes so that CBSs in
//! densely requested areas are placed first.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scenario::CbsSpec;
use crate::topology::VertexId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrioritizationThresholds {
    /// Vertex threshold: a vertex is a hotspot vertex when it appears in more
    /// than `t_v · |W|` CBSs.
    pub t_v: f64,
    /// CBS threshold: a CBS is a hotspot CBS when at least this fraction of
    /// its members are hotspot vertices.
    pub t_h: f64,
}

impl Default for PrioritizationThresholds {
    fn default() -> Self {
        Self { t_v: 0.1, t_h: 0.9 }
    }
}

impl PrioritizationThresholds {
    pub fn new(t_v: f64, t_h: f64) -> Result<Self> {
        if !(t_v >= 0.0 && t_v.is_finite()) {
            return Err(Error::invalid(format!("t_v must be >= 0, got {t_v}")));
        }
        if !(0.0..=1.0).contains(&t_h) {
            return Err(Error::invalid(format!("t_h must lie in [0, 1], got {t_h}")));
        }
        Ok(Self { t_v, t_h })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrioritizedWork {
    pub hotspot: Vec<CbsSpec>,
    pub normal: Vec<CbsSpec>,
}

impl PrioritizedWork {
    /// Processing order: every hotspot CBS, then every normal CBS.
    pub fn iter(&self) -> impl Iterator<Item = &CbsSpec> {
        self.hotspot.iter().chain(&self.normal)
    }
}

/// Number of CBSs each vertex belongs to.
pub fn vertex_presence_counts(cbs: &[CbsSpec], vertex_count: usize) -> Vec<usize> {
    let mut counts = vec![0; vertex_count];
    for c in cbs {
        for &v in &c.members {
            counts[v] += 1;
        }
    }
    counts
}

pub fn hotspot_vertices(counts: &[usize], cbs_total: usize, t_v: f64) -> BTreeSet<VertexId> {
    let bar = cbs_total as f64 * t_v;
    counts
        .iter()
        .enumerate()
        .filter(|&(_, &h)| h as f64 > bar)
        .map(|(v, _)| v)
        .collect()
}

pub fn prioritize(cbs: &[CbsSpec], hotspots: &BTreeSet<VertexId>, t_h: f64) -> PrioritizedWork {
    let mut work = PrioritizedWork::default();
    for c in cbs {
        let inside = c.members.iter().filter(|v| hotspots.contains(v)).count();
        let fraction = inside as f64 / c.members.len() as f64;
        if fraction >= t_h {
            work.hotspot.push(c.clone());
        } else {
            work.normal.push(c.clone());
        }
    }
    work
}

/// Full classification of `cbs` over a graph with `vertex_count` vertices.
pub fn classify(cbs: &[CbsSpec], vertex_count: usize, thresholds: &PrioritizationThresholds) -> PrioritizedWork {
    let counts = vertex_presence_counts(cbs, vertex_count);
    let hot = hotspot_vertices(&counts, cbs.len(), thresholds.t_v);
    prioritize(cbs, &hot, thresholds.t_h)
}
