//! Comparison variants with reduced flexibility, and the capacity
//! oversubscription analysis used to compare them.
//!
//! * static reconfiguration: the full per-CBS pipeline, but every controller
//!   sits on one fixed vertex.
//! * static backhaul: fixed controller, one static wavelength and
//!   latency-shortest routes, without any admission control. Its outcome is
//!   judged after the fact by how much offered load exceeds capacity.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::placement::{place_in_order, CandidateRoots, CostWeights, HeuristicOutcome, Placement};
use crate::prioritization::{classify, PrioritizationThresholds};
use crate::scenario::CbsSpec;
use crate::topology::{BackhaulGraph, LinkId, Rate, VertexId};

/// Vertex nearest to the centroid of all positions; lowest id on ties.
pub fn default_fixed_root(graph: &BackhaulGraph) -> Option<VertexId> {
    let n = graph.vertex_count();
    if n == 0 {
        return None;
    }
    let cx = graph.vertices().iter().map(|v| v.x).sum::<f64>() / n as f64;
    let cy = graph.vertices().iter().map(|v| v.y).sum::<f64>() / n as f64;
    graph
        .vertices()
        .iter()
        .map(|v| ((v.x - cx).hypot(v.y - cy), v.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

fn check_root(graph: &BackhaulGraph, root: VertexId) -> Result<()> {
    if root >= graph.vertex_count() {
        return Err(Error::invalid(format!(
            "fixed root {root} is not a vertex (|V| = {})",
            graph.vertex_count()
        )));
    }
    Ok(())
}

/// The prioritized heuristic with every controller pinned to `fixed_root`.
pub fn static_reconfiguration(
    graph: &mut BackhaulGraph,
    cbs: &[CbsSpec],
    fixed_root: VertexId,
    thresholds: &PrioritizationThresholds,
    weights: &CostWeights,
) -> Result<HeuristicOutcome> {
    check_root(graph, fixed_root)?;
    let work = classify(cbs, graph.vertex_count(), thresholds);
    Ok(place_in_order(graph, work.iter(), weights, CandidateRoots::Fixed(fixed_root)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairLoad {
    pub link: LinkId,
    pub u: VertexId,
    pub v: VertexId,
    pub wavelength: usize,
    pub offered: Rate,
    pub capacity: Rate,
}

impl PairLoad {
    pub fn excess(&self) -> Rate {
        self.offered.saturating_sub(self.capacity)
    }

    /// Share of each flow's rate that gets through under proportional sharing.
    pub fn share(&self) -> f64 {
        if self.offered <= self.capacity {
            1.0
        } else {
            self.capacity.units() as f64 / self.offered.units() as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbsDelivery {
    pub cbs_id: usize,
    /// Worst share over every hop of every member route; 0 when some member
    /// cannot reach its controller at all.
    pub delivered_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OversubscriptionReport {
    /// Loaded (link, wavelength) pairs, ordered by link then wavelength.
    pub pairs: Vec<PairLoad>,
    pub cbs: Vec<CbsDelivery>,
    /// Fraction of CBSs the variant claims to serve before any traffic flows.
    pub a_priori_feasibility: f64,
}

impl OversubscriptionReport {
    pub fn aggregate_excess(&self) -> Rate {
        self.pairs.iter().map(PairLoad::excess).sum()
    }

    pub fn oversubscribed_pairs(&self) -> usize {
        self.pairs.iter().filter(|p| !p.excess().is_zero()).count()
    }

    pub fn offered_total(&self) -> Rate {
        self.pairs.iter().map(|p| p.offered).sum()
    }

    /// Load carried per pair, `min(offered, capacity)`, summed.
    pub fn delivered_total(&self) -> Rate {
        self.pairs.iter().map(|p| p.offered.min(p.capacity)).sum()
    }

    pub fn write_pairs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::invalid(format!("csv: {e}"));
        w.write_record(["link_u", "link_v", "wavelength", "offered_gbps", "capacity_gbps", "excess_gbps"])
            .map_err(wrap)?;
        for p in &self.pairs {
            w.write_record([
                p.u.to_string(),
                p.v.to_string(),
                p.wavelength.to_string(),
                format!("{:.4}", p.offered.gbps()),
                format!("{:.4}", p.capacity.gbps()),
                format!("{:.4}", p.excess().gbps()),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))
    }

    pub fn write_cbs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::invalid(format!("csv: {e}"));
        w.write_record(["cbs_id", "delivered_fraction"]).map_err(wrap)?;
        for c in &self.cbs {
            w.write_record([c.cbs_id.to_string(), format!("{:.4}", c.delivered_fraction)])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))
    }
}

/// Offered-load ledger without admission control.
struct LoadLedger<'g> {
    graph: &'g BackhaulGraph,
    load: BTreeMap<(LinkId, usize), Rate>,
    /// Per CBS: the pairs its routes cross, or `None` once a member is unroutable.
    usage: Vec<(usize, Option<Vec<(LinkId, usize)>>)>,
}

impl<'g> LoadLedger<'g> {
    fn new(graph: &'g BackhaulGraph) -> Self {
        Self {
            graph,
            load: BTreeMap::new(),
            usage: Vec::new(),
        }
    }

    fn open_cbs(&mut self, cbs_id: usize) {
        self.usage.push((cbs_id, Some(Vec::new())));
    }

    fn add_route(&mut self, links: &[LinkId], wavelengths: &[usize], demand: Rate) {
        let (_, usage) = self.usage.last_mut().expect("route outside a CBS");
        for (&l, &w) in links.iter().zip(wavelengths) {
            *self.load.entry((l, w)).or_default() += demand;
            if let Some(u) = usage.as_mut() {
                u.push((l, w));
            }
        }
    }

    fn mark_unroutable(&mut self) {
        self.usage.last_mut().expect("route outside a CBS").1 = None;
    }

    fn finish(self, a_priori_feasibility: f64) -> OversubscriptionReport {
        let graph = self.graph;
        let pairs: Vec<PairLoad> = self
            .load
            .iter()
            .map(|(&(l, w), &offered)| {
                let link = graph.link(l);
                PairLoad {
                    link: l,
                    u: link.u,
                    v: link.v,
                    wavelength: w,
                    offered,
                    capacity: link.wavelengths[w].capacity,
                }
            })
            .collect();
        let index: HashMap<(LinkId, usize), usize> =
            pairs.iter().enumerate().map(|(i, p)| ((p.link, p.wavelength), i)).collect();
        let cbs = self
            .usage
            .into_iter()
            .map(|(cbs_id, usage)| CbsDelivery {
                cbs_id,
                delivered_fraction: match usage {
                    None => 0.0,
                    Some(u) => u.iter().map(|k| pairs[index[k]].share()).fold(1.0, f64::min),
                },
            })
            .collect();
        OversubscriptionReport {
            pairs,
            cbs,
            a_priori_feasibility,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    hops: usize,
    vertex: VertexId,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, hops, vertex).
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.hops.cmp(&self.hops))
            .then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Latency-shortest routes towards one vertex.
pub struct ShortestPaths<'g> {
    graph: &'g BackhaulGraph,
    root: VertexId,
    best: Vec<Option<(f64, usize)>>,
}

impl<'g> ShortestPaths<'g> {
    pub fn towards(graph: &'g BackhaulGraph, root: VertexId) -> Self {
        let mut best = vec![None; graph.vertex_count()];
        let mut done = vec![false; graph.vertex_count()];
        let mut heap = BinaryHeap::from([Frontier {
            dist: 0.0,
            hops: 0,
            vertex: root,
        }]);
        best[root] = Some((0.0, 0));
        while let Some(Frontier { dist, hops, vertex }) = heap.pop() {
            if std::mem::replace(&mut done[vertex], true) {
                continue;
            }
            for (w, l) in graph.neighbors(vertex) {
                let cand = (dist + graph.link(l).latency, hops + 1);
                let better = match best[w] {
                    None => true,
                    Some(cur) => cand.0 < cur.0 || (cand.0 == cur.0 && cand.1 < cur.1),
                };
                if better && !done[w] {
                    best[w] = Some(cand);
                    heap.push(Frontier {
                        dist: cand.0,
                        hops: cand.1,
                        vertex: w,
                    });
                }
            }
        }
        Self { graph, root, best }
    }

    /// Route from the root to `member`. Among equal-latency routes the one
    /// with fewest hops wins, then the lexicographically smallest vertex
    /// sequence read from the member towards the root.
    pub fn route(&self, member: VertexId) -> Option<Vec<VertexId>> {
        let (mut dist, mut hops) = self.best.get(member).copied().flatten()?;
        let mut seq = vec![member];
        let mut cur = member;
        while cur != self.root {
            let (next, _) = self
                .graph
                .neighbors(cur)
                .find(|&(w, l)| {
                    self.best[w].is_some_and(|(d, h)| h + 1 == hops && d + self.graph.link(l).latency == dist)
                })
                .expect("shortest-path predecessor exists");
            (dist, hops) = self.best[next].expect("predecessor is reached");
            seq.push(next);
            cur = next;
        }
        seq.reverse();
        Some(seq)
    }
}

/// Routes every member of every CBS to `fixed_root` on `static_wavelength`
/// along latency-shortest paths, admitting everything.
pub fn static_backhaul(
    graph: &BackhaulGraph,
    cbs: &[CbsSpec],
    fixed_root: VertexId,
    static_wavelength: usize,
) -> Result<OversubscriptionReport> {
    check_root(graph, fixed_root)?;
    if static_wavelength >= graph.wavelength_count() {
        return Err(Error::invalid(format!(
            "static wavelength {static_wavelength} out of range (K = {})",
            graph.wavelength_count()
        )));
    }
    let routes = ShortestPaths::towards(graph, fixed_root);
    let mut ledger = LoadLedger::new(graph);
    for c in cbs {
        ledger.open_cbs(c.id);
        for &m in &c.members {
            match routes.route(m) {
                Some(path) => {
                    let links = graph.path_links(&path)?;
                    let wl = vec![static_wavelength; links.len()];
                    ledger.add_route(&links, &wl, c.demand);
                }
                None => ledger.mark_unroutable(),
            }
        }
    }
    Ok(ledger.finish(1.0))
}

/// Offered load implied by accepted placements. Admission-controlled
/// variants should never show excess here.
pub fn placement_oversubscription(
    graph: &BackhaulGraph,
    cbs: &[CbsSpec],
    placements: &[Placement],
) -> Result<OversubscriptionReport> {
    let demand: HashMap<usize, Rate> = cbs.iter().map(|c| (c.id, c.demand)).collect();
    let mut ledger = LoadLedger::new(graph);
    for p in placements {
        let d = *demand
            .get(&p.cbs_id)
            .ok_or_else(|| Error::invalid(format!("placement for unknown CBS {}", p.cbs_id)))?;
        ledger.open_cbs(p.cbs_id);
        for r in &p.assignment.routes {
            let links = graph.path_links(&r.path)?;
            ledger.add_route(&links, &r.wavelengths, d);
        }
    }
    let feasibility = if cbs.is_empty() {
        1.0
    } else {
        placements.len() as f64 / cbs.len() as f64
    };
    Ok(ledger.finish(feasibility))
}
