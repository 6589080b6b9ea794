//! Exhaustive search for the cheapest feasible placement of one CBS on a
//! small graph: every controller, every combination of bounded simple paths
//! to the members and every per-hop wavelength labeling.
//!
//! Shares no code with the placement pipeline beyond the graph and result
//! types.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::placement::{CostWeights, Placement, Route, TreeCost, WavelengthAssignment};
use crate::scenario::CbsSpec;
use crate::topology::{BackhaulGraph, LinkId, Rate, VertexId};

pub const MAX_VERTICES: usize = 10;
pub const MAX_WAVELENGTHS: usize = 3;
pub const MAX_MEMBERS: usize = 4;

/// Simple paths `root → target` of at most `max_hops` hops whose round trip
/// fits in `rtt_budget`.
fn simple_paths(
    graph: &BackhaulGraph,
    root: VertexId,
    target: VertexId,
    max_hops: usize,
    rtt_budget: f64,
) -> Vec<(Vec<VertexId>, Vec<LinkId>)> {
    if root == target {
        return vec![(vec![root], vec![])];
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; graph.vertex_count()];
    let mut path = vec![root];
    let mut links = Vec::new();
    on_path[root] = true;

    fn walk(
        graph: &BackhaulGraph,
        target: VertexId,
        max_hops: usize,
        rtt_budget: f64,
        latency: f64,
        on_path: &mut [bool],
        path: &mut Vec<VertexId>,
        links: &mut Vec<LinkId>,
        out: &mut Vec<(Vec<VertexId>, Vec<LinkId>)>,
    ) {
        if links.len() == max_hops {
            return;
        }
        let here = *path.last().unwrap();
        for (next, l) in graph.neighbors(here) {
            if on_path[next] {
                continue;
            }
            let lat = latency + graph.link(l).latency;
            if 2.0 * lat > rtt_budget {
                continue;
            }
            path.push(next);
            links.push(l);
            if next == target {
                out.push((path.clone(), links.clone()));
            } else {
                on_path[next] = true;
                walk(graph, target, max_hops, rtt_budget, lat, on_path, path, links, out);
                on_path[next] = false;
            }
            path.pop();
            links.pop();
        }
    }

    walk(graph, target, max_hops, rtt_budget, 0.0, &mut on_path, &mut path, &mut links, &mut out);
    // Fewer hops first so a good bound is found early; ties are settled on
    // the lexicographic key at comparison time.
    out.sort_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Clone)]
struct Candidate {
    n: f64,
    n_g: usize,
    n_a: usize,
    n_l: usize,
    root: VertexId,
    paths: Vec<Vec<VertexId>>,
    wavelengths: Vec<Vec<usize>>,
}

impl Candidate {
    /// `true` if `self` beats `other` under (cost, root, lexicographic paths).
    fn beats(&self, other: &Candidate) -> bool {
        self.n
            .total_cmp(&other.n)
            .then(self.root.cmp(&other.root))
            .then_with(|| self.paths.cmp(&other.paths))
            .then_with(|| self.wavelengths.cmp(&other.wavelengths))
            .is_lt()
    }
}

struct Search<'a> {
    graph: &'a BackhaulGraph,
    demand: Rate,
    weights: &'a CostWeights,
    root: VertexId,
    options: Vec<Vec<(Vec<VertexId>, Vec<LinkId>)>>,
    /// Demand this search placed per (link, wavelength).
    load: HashMap<(LinkId, usize), Rate>,
    /// Pairs in use per link.
    link_use: HashMap<LinkId, usize>,
    n_a: usize,
    chosen_paths: Vec<Vec<VertexId>>,
    chosen_wavelengths: Vec<Vec<usize>>,
    best: Option<Candidate>,
}

impl Search<'_> {
    fn partial_cost(&self) -> f64 {
        self.weights.total(self.load.len(), self.n_a, self.link_use.len())
    }

    fn bounded_out(&self) -> bool {
        self.best.as_ref().is_some_and(|b| self.partial_cost() > b.n)
    }

    fn member(&mut self, i: usize) {
        if self.bounded_out() {
            return;
        }
        if i == self.options.len() {
            let cand = Candidate {
                n: self.partial_cost(),
                n_g: self.load.len(),
                n_a: self.n_a,
                n_l: self.link_use.len(),
                root: self.root,
                paths: self.chosen_paths.clone(),
                wavelengths: self.chosen_wavelengths.clone(),
            };
            if self.best.as_ref().is_none_or(|b| cand.beats(b)) {
                self.best = Some(cand);
            }
            return;
        }
        for p in 0..self.options[i].len() {
            let (path, links) = self.options[i][p].clone();
            self.chosen_paths.push(path);
            self.chosen_wavelengths.push(Vec::with_capacity(links.len()));
            self.hop(i, &links, 0);
            self.chosen_wavelengths.pop();
            self.chosen_paths.pop();
        }
    }

    fn hop(&mut self, i: usize, links: &[LinkId], h: usize) {
        if h == links.len() {
            self.member(i + 1);
            return;
        }
        let l = links[h];
        let link = self.graph.link(l);
        for w in 0..link.wavelengths.len() {
            let state = &link.wavelengths[w];
            let mine = self.load.get(&(l, w)).copied().unwrap_or_default();
            if state.allocated + mine + self.demand > state.capacity {
                continue;
            }
            let fresh_pair = mine.is_zero();
            *self.load.entry((l, w)).or_default() += self.demand;
            if fresh_pair {
                *self.link_use.entry(l).or_default() += 1;
                if !state.active() {
                    self.n_a += 1;
                }
            }
            self.chosen_wavelengths.last_mut().unwrap().push(w);

            if !self.bounded_out() {
                self.hop(i, links, h + 1);
            }

            self.chosen_wavelengths.last_mut().unwrap().pop();
            if fresh_pair {
                self.load.remove(&(l, w));
                let uses = self.link_use.get_mut(&l).unwrap();
                *uses -= 1;
                if *uses == 0 {
                    self.link_use.remove(&l);
                }
                if !state.active() {
                    self.n_a -= 1;
                }
            } else {
                *self.load.get_mut(&(l, w)).unwrap() -= self.demand;
            }
        }
    }
}

/// Cheapest feasible placement of `cbs` on the current graph state, or
/// `None`. Paths are simple and at most `max_path_hops` long. Nothing is
/// committed.
pub fn brute_force_feasible(
    graph: &BackhaulGraph,
    cbs: &CbsSpec,
    max_path_hops: usize,
    weights: &CostWeights,
) -> Result<Option<Placement>> {
    if graph.vertex_count() > MAX_VERTICES {
        return Err(Error::Size(format!("{} vertices > {MAX_VERTICES}", graph.vertex_count())));
    }
    if graph.wavelength_count() > MAX_WAVELENGTHS {
        return Err(Error::Size(format!("K = {} > {MAX_WAVELENGTHS}", graph.wavelength_count())));
    }
    if cbs.members.len() > MAX_MEMBERS {
        return Err(Error::Size(format!("{} members > {MAX_MEMBERS}", cbs.members.len())));
    }
    cbs.check_against(graph)?;

    let mut best: Option<Candidate> = None;
    for root in 0..graph.vertex_count() {
        let options: Vec<_> = cbs
            .members
            .iter()
            .map(|&m| simple_paths(graph, root, m, max_path_hops, cbs.rtt_budget))
            .collect();
        if options.iter().any(Vec::is_empty) {
            continue;
        }
        let mut search = Search {
            graph,
            demand: cbs.demand,
            weights,
            root,
            options,
            load: HashMap::new(),
            link_use: HashMap::new(),
            n_a: 0,
            chosen_paths: Vec::new(),
            chosen_wavelengths: Vec::new(),
            best: best.take(),
        };
        search.member(0);
        best = search.best;
    }

    Ok(best.map(|b| Placement {
        cbs_id: cbs.id,
        controller: b.root,
        assignment: WavelengthAssignment {
            routes: cbs
                .members
                .iter()
                .zip(b.paths)
                .zip(b.wavelengths)
                .map(|((&member, path), wavelengths)| Route {
                    member,
                    path,
                    wavelengths,
                })
                .collect(),
        },
        cost: TreeCost {
            n: b.n,
            n_g: b.n_g,
            n_a: b.n_a,
            n_l: b.n_l,
        },
    }))
}
