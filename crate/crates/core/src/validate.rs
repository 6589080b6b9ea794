//! Independent re-check of a recorded run.
//!
//! The run is replayed from the starting graph state with its own load
//! ledger; nothing here calls into the placement pipeline.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::placement::CostWeights;
use crate::records::RunEvent;
use crate::scenario::CbsSpec;
use crate::topology::{BackhaulGraph, LinkId, Rate, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// CBS ids missing, duplicated or unknown.
    Coverage,
    /// Malformed route: wrong endpoints, missing link, repeated vertex, bad wavelength.
    Route,
    /// Routes of one placement do not form a tree at the controller.
    TreePath,
    Rtt,
    Capacity,
    Cost,
    /// Final graph state differs from the replay of the committed placements.
    Atomicity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub cbs_id: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cbs_id {
            Some(id) => write!(f, "{:?} (CBS {id}): {}", self.kind, self.detail),
            None => write!(f, "{:?}: {}", self.kind, self.detail),
        }
    }
}

struct Checker<'a> {
    graph: &'a BackhaulGraph,
    load: HashMap<(LinkId, usize), Rate>,
    found: Vec<Violation>,
}

impl Checker<'_> {
    fn flag(&mut self, kind: ViolationKind, cbs_id: Option<usize>, detail: String) {
        self.found.push(Violation { kind, cbs_id, detail });
    }

    fn pair_load(&self, l: LinkId, w: usize) -> Rate {
        self.load
            .get(&(l, w))
            .copied()
            .unwrap_or(self.graph.link(l).wavelengths[w].allocated)
    }

    /// Links of a route if it is well formed.
    fn route_links(&mut self, id: usize, controller: VertexId, member: VertexId, path: &[VertexId], wl: &[usize]) -> Option<Vec<LinkId>> {
        let bad = |this: &mut Self, msg: String| {
            this.flag(ViolationKind::Route, Some(id), format!("member {member}: {msg}"));
            None
        };
        if path.first() != Some(&controller) || path.last() != Some(&member) {
            return bad(self, format!("path {path:?} must run from {controller} to {member}"));
        }
        if wl.len() + 1 != path.len() {
            return bad(self, "one wavelength per hop required".into());
        }
        if path.iter().collect::<BTreeSet<_>>().len() != path.len() {
            return bad(self, format!("path {path:?} repeats a vertex"));
        }
        let mut links = Vec::with_capacity(wl.len());
        for (hop, &w) in path.windows(2).zip(wl) {
            let (a, b) = (hop[0], hop[1]);
            if a >= self.graph.vertex_count() || b >= self.graph.vertex_count() {
                return bad(self, format!("unknown vertex in {a}-{b}"));
            }
            let Some(l) = self.graph.neighbors(a).find(|&(v, _)| v == b).map(|(_, l)| l) else {
                return bad(self, format!("no link {a}-{b}"));
            };
            if w >= self.graph.link(l).wavelengths.len() {
                return bad(self, format!("wavelength {w} out of range on {a}-{b}"));
            }
            links.push(l);
        }
        Some(links)
    }
}

/// Checks a recorded run against the graph state it started from.
///
/// Pass `final_graph` to also verify that the graph left behind by the run
/// holds exactly the committed allocations.
pub fn validate_run(
    start: &BackhaulGraph,
    cbs: &[CbsSpec],
    events: &[RunEvent],
    weights: &CostWeights,
    final_graph: Option<&BackhaulGraph>,
) -> Vec<Violation> {
    let mut c = Checker {
        graph: start,
        load: HashMap::new(),
        found: Vec::new(),
    };
    let specs: HashMap<usize, &CbsSpec> = cbs.iter().map(|s| (s.id, s)).collect();

    let mut seen = BTreeSet::new();
    for e in events {
        let id = e.cbs_id();
        if !specs.contains_key(&id) {
            c.flag(ViolationKind::Coverage, Some(id), "unknown CBS".into());
        }
        if !seen.insert(id) {
            c.flag(ViolationKind::Coverage, Some(id), "attempted twice".into());
        }
    }
    for s in cbs {
        if !seen.contains(&s.id) {
            c.flag(ViolationKind::Coverage, Some(s.id), "never attempted".into());
        }
    }

    for e in events {
        let RunEvent::Placed(p) = e else { continue };
        let Some(spec) = specs.get(&p.cbs_id) else { continue };
        let id = p.cbs_id;

        let members: Vec<_> = p.assignment.routes.iter().map(|r| r.member).collect();
        if members != spec.members {
            c.flag(ViolationKind::Coverage, Some(id), format!("routes serve {members:?}, CBS wants {:?}", spec.members));
        }

        let mut parent: HashMap<VertexId, VertexId> = HashMap::new();
        let mut pairs: BTreeSet<(LinkId, usize)> = BTreeSet::new();
        let mut added: HashMap<(LinkId, usize), Rate> = HashMap::new();
        let mut well_formed = true;
        for r in &p.assignment.routes {
            let Some(links) = c.route_links(id, p.controller, r.member, &r.path, &r.wavelengths) else {
                well_formed = false;
                continue;
            };
            let one_way: f64 = links.iter().map(|&l| start.link(l).latency).sum();
            if 2.0 * one_way > spec.rtt_budget {
                c.flag(ViolationKind::Rtt, Some(id), format!("member {}: round trip {:e} s > budget {:e} s", r.member, 2.0 * one_way, spec.rtt_budget));
            }
            for (hop, (&l, &w)) in r.path.windows(2).zip(links.iter().zip(&r.wavelengths)) {
                if *parent.entry(hop[1]).or_insert(hop[0]) != hop[0] {
                    c.flag(ViolationKind::TreePath, Some(id), format!("vertex {} reached from two parents", hop[1]));
                }
                pairs.insert((l, w));
                *added.entry((l, w)).or_default() += spec.demand;
            }
        }
        if parent.contains_key(&p.controller) {
            c.flag(ViolationKind::TreePath, Some(id), "controller has a parent".into());
        }
        if !well_formed {
            continue;
        }

        let n_g = pairs.len();
        let n_a = pairs.iter().filter(|&&(l, w)| c.pair_load(l, w).is_zero()).count();
        let n_l = pairs.iter().map(|&(l, _)| l).collect::<BTreeSet<_>>().len();
        let n = weights.w_g * n_g as f64 + weights.w_a * n_a as f64 + weights.w_l * n_l as f64;
        let reported = p.cost;
        if (reported.n_g, reported.n_a, reported.n_l) != (n_g, n_a, n_l) || reported.n != n {
            c.flag(
                ViolationKind::Cost,
                Some(id),
                format!(
                    "reported n={} ng={} na={} nl={}, recomputed n={n} ng={n_g} na={n_a} nl={n_l}",
                    reported.n, reported.n_g, reported.n_a, reported.n_l
                ),
            );
        }

        for ((l, w), extra) in added {
            let total = c.pair_load(l, w) + extra;
            let cap = start.link(l).wavelengths[w].capacity;
            if total > cap {
                let link = start.link(l);
                c.flag(
                    ViolationKind::Capacity,
                    Some(id),
                    format!("link {}-{} wavelength {w}: load {total} Gb/s > capacity {cap} Gb/s", link.u, link.v),
                );
            }
            c.load.insert((l, w), total);
        }
    }

    if let Some(end) = final_graph {
        for (l, link) in end.links().iter().enumerate() {
            for (w, state) in link.wavelengths.iter().enumerate() {
                let expected = c.pair_load(l, w);
                if state.allocated != expected {
                    c.flag(
                        ViolationKind::Atomicity,
                        None,
                        format!("link {}-{} wavelength {w}: graph holds {} Gb/s, replay gives {expected} Gb/s", link.u, link.v, state.allocated),
                    );
                }
            }
        }
    }
    c.found
}
