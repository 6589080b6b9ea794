//! Controller placement and wavelength assignment for one CBS at a time.
//!
//! For a CBS, every vertex is tried as the controller: a latency- and
//! capacity-pruned BFS tree is grown from it, trees that do not reach every
//! member are dropped, the surviving trees get a first-fit wavelength
//! assignment over their root-to-member paths, and the cheapest feasible tree
//! is committed to the graph. CBSs are handled one after another, each seeing
//! the allocations of those before it.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::prioritization::{classify, PrioritizationThresholds};
use crate::scenario::CbsSpec;
use crate::topology::{BackhaulGraph, LinkId, Rate, VertexId};

/// Breadth-first tree grown from a candidate controller under the CBS's
/// round-trip budget and per-link capacity checks.
#[derive(Clone, Debug, PartialEq)]
pub struct BfsTree {
    pub root: VertexId,
    parent: Vec<Option<(VertexId, LinkId)>>,
    depth_latency: Vec<Option<f64>>,
    order: Vec<VertexId>,
}

impl BfsTree {
    pub fn contains(&self, v: VertexId) -> bool {
        self.depth_latency.get(v).is_some_and(Option::is_some)
    }

    /// Parent vertex and connecting link; `None` for the root and for
    /// vertices outside the tree.
    pub fn parent(&self, v: VertexId) -> Option<(VertexId, LinkId)> {
        self.parent.get(v).copied().flatten()
    }

    /// One-way latency from the root along the tree path.
    pub fn depth_latency(&self, v: VertexId) -> Option<f64> {
        self.depth_latency.get(v).copied().flatten()
    }

    /// Vertices in admission order, root first.
    pub fn vertices(&self) -> &[VertexId] {
        &self.order
    }

    /// Tree path from the root to `v`, both inclusive.
    pub fn path_to(&self, v: VertexId) -> Option<Vec<VertexId>> {
        if !self.contains(v) {
            return None;
        }
        let mut path = vec![v];
        let mut cur = v;
        while let Some((p, _)) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }

    fn path_links_to(&self, v: VertexId) -> Vec<LinkId> {
        let mut links = Vec::new();
        let mut cur = v;
        while let Some((p, l)) = self.parent(cur) {
            links.push(l);
            cur = p;
        }
        links.reverse();
        links
    }
}

/// Grows the pruned BFS tree rooted at `root`.
///
/// Neighbors are explored in ascending id. A vertex `v` reached over `(u, v)`
/// is admitted only if the round trip over the tree path stays within the
/// budget and, when `v` is a member, some wavelength on `(u, v)` still has room
/// for the member's demand. A rejected vertex may still be admitted later
/// through another parent; once admitted it is never revisited.
pub fn max_path_bfs(graph: &BackhaulGraph, root: VertexId, cbs: &CbsSpec) -> BfsTree {
    let n = graph.vertex_count();
    let mut tree = BfsTree {
        root,
        parent: vec![None; n],
        depth_latency: vec![None; n],
        order: vec![root],
    };
    tree.depth_latency[root] = Some(0.0);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let base = tree.depth_latency[u].expect("queued vertices are admitted");
        for (v, l) in graph.neighbors(u) {
            if tree.depth_latency[v].is_some() {
                continue;
            }
            let link = graph.link(l);
            let depth = base + link.latency;
            if 2.0 * depth > cbs.rtt_budget {
                continue;
            }
            if cbs.contains(v) && !link.wavelengths.iter().any(|w| w.residual() >= cbs.demand) {
                continue;
            }
            tree.parent[v] = Some((u, l));
            tree.depth_latency[v] = Some(depth);
            tree.order.push(v);
            queue.push_back(v);
        }
    }
    tree
}

/// Keeps the trees that reach every CBS member.
pub fn match_cbs(trees: Vec<BfsTree>, cbs: &CbsSpec) -> Vec<BfsTree> {
    trees
        .into_iter()
        .filter(|t| cbs.members.iter().all(|&m| t.contains(m)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    pub member: VertexId,
    /// Controller first, member last. A single vertex when the controller is
    /// the member itself.
    pub path: Vec<VertexId>,
    /// Wavelength index per hop.
    pub wavelengths: Vec<usize>,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.wavelengths.len()
    }
}

/// Routes for every member, in ascending member id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WavelengthAssignment {
    pub routes: Vec<Route>,
}

impl WavelengthAssignment {
    /// Distinct (link, wavelength) pairs the assignment occupies.
    pub fn used_pairs(&self, graph: &BackhaulGraph) -> Result<BTreeSet<(LinkId, usize)>> {
        let mut pairs = BTreeSet::new();
        for r in &self.routes {
            for (l, &w) in graph.path_links(&r.path)?.into_iter().zip(&r.wavelengths) {
                pairs.insert((l, w));
            }
        }
        Ok(pairs)
    }
}

/// Re-walks each member's tree path with the joint load of the whole CBS and
/// assigns wavelengths first-fit, hop by hop from the root. Members are handled
/// in ascending id. Returns `None` if any hop runs out of room. The graph is
/// only read.
pub fn backtrack_and_assign(graph: &BackhaulGraph, tree: &BfsTree, cbs: &CbsSpec) -> Option<WavelengthAssignment> {
    // Few pairs per CBS; a flat list beats hashing here.
    let mut tentative: Vec<((LinkId, usize), Rate)> = Vec::new();
    let mut routes = Vec::with_capacity(cbs.members.len());
    for &member in &cbs.members {
        let path = tree.path_to(member)?;
        let links = tree.path_links_to(member);
        let one_way: f64 = links.iter().map(|&l| graph.link(l).latency).sum();
        if 2.0 * one_way > cbs.rtt_budget {
            return None;
        }
        let mut wavelengths = Vec::with_capacity(links.len());
        for l in links {
            let link = graph.link(l);
            let w = (0..link.wavelengths.len()).find(|&w| {
                let held = tentative
                    .iter()
                    .find(|(k, _)| *k == (l, w))
                    .map_or(Rate::ZERO, |&(_, r)| r);
                link.wavelengths[w].residual().saturating_sub(held) >= cbs.demand
            })?;
            match tentative.iter_mut().find(|(k, _)| *k == (l, w)) {
                Some((_, r)) => *r += cbs.demand,
                None => tentative.push(((l, w), cbs.demand)),
            }
            wavelengths.push(w);
        }
        routes.push(Route {
            member,
            path,
            wavelengths,
        });
    }
    Some(WavelengthAssignment { routes })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostWeights {
    /// Weight of wavelengths used by the tree.
    pub w_g: f64,
    /// Weight of wavelengths newly activated by the tree.
    pub w_a: f64,
    /// Weight of links used by the tree.
    pub w_l: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_g: 1.0,
            w_a: 1.0,
            w_l: 1.0,
        }
    }
}

impl CostWeights {
    pub fn new(w_g: f64, w_a: f64, w_l: f64) -> Result<Self> {
        let ws = [w_g, w_a, w_l];
        if ws.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("cost weights must be finite and >= 0"));
        }
        if ws.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid("cost weights must not all be zero"));
        }
        Ok(Self { w_g, w_a, w_l })
    }

    pub fn total(&self, n_g: usize, n_a: usize, n_l: usize) -> f64 {
        self.w_g * n_g as f64 + self.w_a * n_a as f64 + self.w_l * n_l as f64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TreeCost {
    pub n: f64,
    /// Distinct (link, wavelength) pairs used.
    pub n_g: usize,
    /// Of those, pairs that were idle before this tree.
    pub n_a: usize,
    /// Distinct links used.
    pub n_l: usize,
}

/// Cost of an assignment against the graph state it would be committed to.
pub fn tree_cost(graph: &BackhaulGraph, assignment: &WavelengthAssignment, weights: &CostWeights) -> TreeCost {
    let mut pairs = Vec::new();
    for r in &assignment.routes {
        let links = graph.path_links(&r.path).expect("assignment paths come from tree links");
        pairs.extend(links.into_iter().zip(r.wavelengths.iter().copied()));
    }
    pairs.sort_unstable();
    pairs.dedup();
    let n_g = pairs.len();
    let n_a = pairs
        .iter()
        .filter(|&&(l, w)| !graph.link(l).wavelengths[w].active())
        .count();
    let mut links: Vec<LinkId> = pairs.iter().map(|&(l, _)| l).collect();
    links.dedup();
    let n_l = links.len();
    TreeCost {
        n: weights.total(n_g, n_a, n_l),
        n_g,
        n_a,
        n_l,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub cbs_id: usize,
    pub controller: VertexId,
    pub assignment: WavelengthAssignment,
    pub cost: TreeCost,
}

/// Adds every route's demand to the graph, all or nothing.
pub fn commit_assignment(graph: &mut BackhaulGraph, assignment: &WavelengthAssignment, demand: Rate) -> Result<()> {
    for (i, r) in assignment.routes.iter().enumerate() {
        if r.hops() == 0 {
            continue;
        }
        if let Err(e) = graph.allocate_path(&r.path, &r.wavelengths, demand) {
            for done in assignment.routes[..i].iter().filter(|r| r.hops() > 0) {
                graph
                    .release_path(&done.path, &done.wavelengths, demand)
                    .expect("rolling back a path just allocated");
            }
            return Err(e);
        }
    }
    Ok(())
}

/// Which vertices may host the controller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateRoots {
    All,
    Fixed(VertexId),
}

impl CandidateRoots {
    fn roots(self, graph: &BackhaulGraph) -> Vec<VertexId> {
        match self {
            CandidateRoots::All => (0..graph.vertex_count()).collect(),
            CandidateRoots::Fixed(v) if v < graph.vertex_count() => vec![v],
            CandidateRoots::Fixed(_) => Vec::new(),
        }
    }
}

/// Finds, commits and returns the cheapest placement over the given
/// candidate controllers. Ties go to the lowest controller id. On `None` the
/// graph is untouched.
pub fn place_cbs_with_roots(
    graph: &mut BackhaulGraph,
    cbs: &CbsSpec,
    weights: &CostWeights,
    roots: CandidateRoots,
) -> Option<Placement> {
    let trees: Vec<_> = roots
        .roots(graph)
        .into_iter()
        .map(|root| max_path_bfs(graph, root, cbs))
        .collect();
    let candidates = match_cbs(trees, cbs);
    let assigned = candidates
        .into_iter()
        .filter_map(|t| backtrack_and_assign(graph, &t, cbs).map(|a| (t.root, a)));
    // Keep only assignments that still serve every member.
    let confirmed = assigned.filter(|(_, a)| {
        a.routes.len() == cbs.members.len()
            && a.routes.iter().zip(&cbs.members).all(|(r, &m)| r.member == m)
    });
    let (controller, assignment, cost) = confirmed
        .map(|(root, a)| {
            let cost = tree_cost(graph, &a, weights);
            (root, a, cost)
        })
        .min_by(|a, b| a.2.n.total_cmp(&b.2.n).then(a.0.cmp(&b.0)))?;
    commit_assignment(graph, &assignment, cbs.demand).expect("assignment was admitted against the current graph state");
    Some(Placement {
        cbs_id: cbs.id,
        controller,
        assignment,
        cost,
    })
}

pub fn place_cbs(graph: &mut BackhaulGraph, cbs: &CbsSpec, weights: &CostWeights) -> Option<Placement> {
    place_cbs_with_roots(graph, cbs, weights, CandidateRoots::All)
}

/// Result of placing a sequence of CBSs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeuristicOutcome {
    /// Accepted placements in commit order.
    pub placements: Vec<Placement>,
    pub infeasible: Vec<usize>,
    /// CBS ids in the order they were attempted.
    pub order: Vec<usize>,
}

impl HeuristicOutcome {
    pub fn feasibility(&self) -> f64 {
        let total = self.placements.len() + self.infeasible.len();
        if total == 0 {
            1.0
        } else {
            self.placements.len() as f64 / total as f64
        }
    }
}

/// Places CBSs one at a time in the given order.
pub fn place_in_order<'a>(
    graph: &mut BackhaulGraph,
    order: impl IntoIterator<Item = &'a CbsSpec>,
    weights: &CostWeights,
    roots: CandidateRoots,
) -> HeuristicOutcome {
    let mut out = HeuristicOutcome::default();
    for cbs in order {
        out.order.push(cbs.id);
        match place_cbs_with_roots(graph, cbs, weights, roots) {
            Some(p) => out.placements.push(p),
            None => out.infeasible.push(cbs.id),
        }
    }
    out
}

/// Hotspot CBSs first, then the rest, each in input order.
pub fn run_heuristic(
    graph: &mut BackhaulGraph,
    cbs: &[CbsSpec],
    thresholds: &PrioritizationThresholds,
    weights: &CostWeights,
) -> HeuristicOutcome {
    let work = classify(cbs, graph.vertex_count(), thresholds);
    place_in_order(graph, work.iter(), weights, CandidateRoots::All)
}

/// The same pipeline without the prioritization step: input order.
pub fn run_unprioritized(graph: &mut BackhaulGraph, cbs: &[CbsSpec], weights: &CostWeights) -> HeuristicOutcome {
    place_in_order(graph, cbs, weights, CandidateRoots::All)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gbps(x: f64) -> Rate {
        Rate::from_gbps(x).unwrap()
    }

    fn cbs(id: usize, members: &[VertexId], demand: f64, rtt: f64) -> CbsSpec {
        CbsSpec::new(id, members.to_vec(), gbps(demand), rtt)
    }

    /// Path 0-1-2 with 1000 m links.
    fn path3(k: usize) -> BackhaulGraph {
        let mut g = BackhaulGraph::new(k, gbps(2.5)).unwrap();
        for i in 0..3 {
            g.add_vertex(i as f64 * 1000.0, 0.0);
        }
        g.add_link(0, 1, 1000.0, None).unwrap();
        g.add_link(1, 2, 1000.0, None).unwrap();
        g
    }

    fn triangle() -> BackhaulGraph {
        let mut g = BackhaulGraph::new(4, gbps(2.5)).unwrap();
        for _ in 0..3 {
            g.add_vertex(0.0, 0.0);
        }
        g.add_link(0, 1, 1000.0, None).unwrap();
        g.add_link(0, 2, 1000.0, None).unwrap();
        g.add_link(1, 2, 1000.0, None).unwrap();
        g
    }

    #[test]
    fn bfs_single_vertex() {
        let mut g = BackhaulGraph::new(4, gbps(2.5)).unwrap();
        g.add_vertex(0.0, 0.0);
        let t = max_path_bfs(&g, 0, &cbs(0, &[0], 1.25, 1e-3));
        assert_eq!(t.vertices(), &[0]);
        assert_eq!(t.depth_latency(0), Some(0.0));
    }

    #[test]
    fn bfs_budget_is_inclusive() {
        let g = path3(4);
        let l = g.link(0).latency;
        let t = max_path_bfs(&g, 0, &cbs(0, &[0, 1, 2], 1.25, 2.0 * (2.0 * l)));
        assert_eq!(t.vertices(), &[0, 1, 2]);
        assert_eq!(t.path_to(2), Some(vec![0, 1, 2]));
        let t = max_path_bfs(&g, 0, &cbs(0, &[0, 1, 2], 1.25, 2.0 * (2.0 * l) * 0.999));
        assert_eq!(t.vertices(), &[0, 1]);
    }

    #[test]
    fn bfs_skips_saturated_member_hop() {
        let mut g = path3(2);
        for w in 0..2 {
            g.allocate_path(&[1, 2], &[w], gbps(2.5)).unwrap();
        }
        let t = max_path_bfs(&g, 0, &cbs(0, &[2], 0.625, 1.0));
        assert!(t.contains(1));
        assert!(!t.contains(2));
        // A non-member is admitted over a saturated link.
        let t = max_path_bfs(&g, 0, &cbs(0, &[0], 0.625, 1.0));
        assert!(t.contains(2));
    }

    #[test]
    fn matching() {
        let g = triangle();
        let c = cbs(0, &[0, 1, 2], 1.25, 1.0);
        assert!(match_cbs(vec![], &c).is_empty());
        let trees: Vec<_> = (0..3).map(|r| max_path_bfs(&g, r, &c)).collect();
        assert_eq!(match_cbs(trees, &c).len(), 3);

        let p = path3(4);
        let short = cbs(0, &[0, 2], 1.25, 2.0 * p.link(0).latency);
        let t = max_path_bfs(&p, 0, &short);
        assert!(match_cbs(vec![t], &short).is_empty());
    }

    #[test]
    fn assignment_root_member_is_free() {
        let g = path3(4);
        let c = cbs(0, &[0], 2.5, 1.0);
        let t = max_path_bfs(&g, 0, &c);
        let a = backtrack_and_assign(&g, &t, &c).unwrap();
        assert_eq!(a.routes, vec![Route { member: 0, path: vec![0], wavelengths: vec![] }]);
        assert_eq!(tree_cost(&g, &a, &CostWeights::default()), TreeCost::default());
    }

    #[test]
    fn assignment_shares_a_wavelength_when_it_fits() {
        // Star: 0 - 1, with 1 - 2 and 1 - 3; root 0, members 2 and 3 share hop 0-1.
        let mut g = BackhaulGraph::new(1, gbps(2.5)).unwrap();
        for _ in 0..4 {
            g.add_vertex(0.0, 0.0);
        }
        g.add_link(0, 1, 10.0, None).unwrap();
        g.add_link(1, 2, 10.0, None).unwrap();
        g.add_link(1, 3, 10.0, None).unwrap();
        let c = cbs(0, &[2, 3], 1.25, 1.0);
        let a = backtrack_and_assign(&g, &max_path_bfs(&g, 0, &c), &c).unwrap();
        assert_eq!(a.routes[0].wavelengths, vec![0, 0]);
        assert_eq!(a.routes[1].wavelengths, vec![0, 0]);
        let heavy = cbs(0, &[2, 3], 2.5, 1.0);
        assert!(backtrack_and_assign(&g, &max_path_bfs(&g, 0, &heavy), &heavy).is_none());
        assert_eq!(g.active_wavelengths(), 0);
    }

    #[test]
    fn cost_counts() {
        let mut g = path3(4);
        let c = cbs(0, &[2], 1.25, 1.0);
        let t = max_path_bfs(&g, 0, &c);
        let a = backtrack_and_assign(&g, &t, &c).unwrap();
        let cost = tree_cost(&g, &a, &CostWeights::default());
        assert_eq!((cost.n, cost.n_g, cost.n_a, cost.n_l), (6.0, 2, 2, 2));
        commit_assignment(&mut g, &a, c.demand).unwrap();
        let again = backtrack_and_assign(&g, &t, &c).unwrap();
        assert_eq!(again, a);
        let cost = tree_cost(&g, &again, &CostWeights::default());
        assert_eq!((cost.n_g, cost.n_a, cost.n_l), (2, 0, 2));
    }

    #[test]
    fn place_single_vertex() {
        let mut g = BackhaulGraph::new(4, gbps(2.5)).unwrap();
        g.add_vertex(0.0, 0.0);
        let p = place_cbs(&mut g, &cbs(3, &[0], 1.25, 1e-3), &CostWeights::default()).unwrap();
        assert_eq!(p.cbs_id, 3);
        assert_eq!(p.controller, 0);
        assert_eq!(p.cost, TreeCost::default());
    }

    #[test]
    fn place_triangle_tie_breaks_on_root() {
        let mut g = triangle();
        let p = place_cbs(&mut g, &cbs(0, &[0, 1, 2], 1.25, 1.0), &CostWeights::default()).unwrap();
        assert_eq!(p.controller, 0);
        assert_eq!(p.cost.n, 6.0);
        assert_eq!(p.assignment.routes[1].path, vec![0, 1]);
        assert_eq!(p.assignment.routes[2].path, vec![0, 2]);
        assert_eq!(g.active_wavelengths(), 2);
    }

    #[test]
    fn unreachable_member_is_infeasible_and_atomic() {
        let mut g = path3(4);
        g.allocate_path(&[0, 1], &[0], gbps(1.25)).unwrap();
        let before = g.clone();
        let l = g.link(0).latency;
        // Root 1 needs a one-hop round trip, roots 0 and 2 a two-hop one.
        let c = cbs(0, &[0, 2], 1.25, 2.0 * l * 0.9);
        assert!(place_cbs(&mut g, &c, &CostWeights::default()).is_none());
        assert_eq!(g, before);
    }

    #[test]
    fn sequential_bottleneck() {
        // Two islands joined by a single K=1 link.
        let mut g = BackhaulGraph::new(1, gbps(2.5)).unwrap();
        g.add_vertex(0.0, 0.0);
        g.add_vertex(1000.0, 0.0);
        g.add_link(0, 1, 1000.0, None).unwrap();
        let w = vec![cbs(0, &[0, 1], 2.5, 1.0), cbs(1, &[0, 1], 2.5, 1.0)];
        let out = run_heuristic(&mut g, &w, &PrioritizationThresholds::default(), &CostWeights::default());
        assert_eq!(out.placements.len(), 1);
        assert_eq!(out.placements[0].cbs_id, 0);
        assert_eq!(out.infeasible, vec![1]);
        assert_eq!(out.feasibility(), 0.5);
    }

    #[test]
    fn empty_and_single_runs() {
        let mut g = triangle();
        let out = run_heuristic(&mut g, &[], &PrioritizationThresholds::default(), &CostWeights::default());
        assert!(out.placements.is_empty() && out.infeasible.is_empty());

        let c = cbs(0, &[1, 2], 0.625, 1.0);
        let mut a = triangle();
        let mut b = triangle();
        let out = run_heuristic(&mut a, std::slice::from_ref(&c), &PrioritizationThresholds::new(0.0, 0.0).unwrap(), &CostWeights::default());
        let single = place_cbs(&mut b, &c, &CostWeights::default()).unwrap();
        assert_eq!(out.placements, vec![single]);
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_root_restricts_candidates() {
        let mut g = path3(4);
        let c = cbs(0, &[0, 1], 1.25, 1.0);
        let p = place_cbs_with_roots(&mut g, &c, &CostWeights::default(), CandidateRoots::Fixed(2)).unwrap();
        assert_eq!(p.controller, 2);
        assert_eq!(p.assignment.routes[0].path, vec![2, 1, 0]);
        assert!(place_cbs_with_roots(&mut g, &c, &CostWeights::default(), CandidateRoots::Fixed(9)).is_none());
    }

    #[test]
    fn weights_validation() {
        assert!(CostWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(CostWeights::new(-1.0, 1.0, 0.0).is_err());
        assert_eq!(CostWeights::new(1.0, 1.0, 1.0).unwrap(), CostWeights::default());
    }
}
