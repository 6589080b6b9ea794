//! Line-oriented text formats.
//!
//! Scenario files:
//!
//! ```text
//! # comment
//! K <wavelengths> <capacity_gbps>
//! V <id> <x> <y>
//! E <id1> <id2> <length_m> [latency_s]
//! C <cbs_id> <demand_gbps> <rtt_budget_s> <member ids...>
//! ```
//!
//! `K` is optional and defaults to 4 wavelengths of 2.5 Gb/s. Placement
//! records, one event per attempted CBS in processing order:
//!
//! ```text
//! P <cbs_id> <controller_id> n=<n> ng=<n_g> na=<n_a> nl=<n_l>
//! R <cbs_id> <member_id> <wavelength per hop...> <path vertex ids...>
//! X <cbs_id>
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::placement::{HeuristicOutcome, Placement, Route, TreeCost, WavelengthAssignment};
use crate::scenario::{CbsSpec, Scenario};
use crate::topology::{BackhaulGraph, Rate};

pub const DEFAULT_WAVELENGTHS: usize = 4;
pub const DEFAULT_CAPACITY_GBPS: f64 = 2.5;

/// One attempted CBS, as recorded.
#[derive(Clone, Debug, PartialEq)]
pub enum RunEvent {
    Placed(Placement),
    Infeasible(usize),
}

impl RunEvent {
    pub fn cbs_id(&self) -> usize {
        match self {
            RunEvent::Placed(p) => p.cbs_id,
            RunEvent::Infeasible(id) => *id,
        }
    }
}

/// Events of a run in the order the CBSs were attempted.
pub fn events(outcome: &HeuristicOutcome) -> Vec<RunEvent> {
    let mut placed = outcome.placements.iter().peekable();
    outcome
        .order
        .iter()
        .map(|&id| match placed.peek() {
            Some(p) if p.cbs_id == id => RunEvent::Placed(placed.next().unwrap().clone()),
            _ => RunEvent::Infeasible(id),
        })
        .collect()
}

pub fn write_graph(graph: &BackhaulGraph, out: &mut String) {
    writeln!(out, "K {} {}", graph.wavelength_count(), graph.wavelength_capacity()).unwrap();
    for v in graph.vertices() {
        writeln!(out, "V {} {} {}", v.id, v.x, v.y).unwrap();
    }
    for l in graph.links() {
        writeln!(out, "E {} {} {} {}", l.u, l.v, l.length, l.latency).unwrap();
    }
}

pub fn write_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    write_graph(&scenario.graph, &mut out);
    for c in &scenario.cbs {
        write!(out, "C {} {} {}", c.id, c.demand, c.rtt_budget).unwrap();
        for m in &c.members {
            write!(out, " {m}").unwrap();
        }
        out.push('\n');
    }
    out
}

struct Lines<'a> {
    source: &'a str,
}

impl Lines<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.source.to_string(),
            line,
            msg: msg.into(),
        }
    }

    fn num<T: FromStr>(&self, line: usize, tok: Option<&str>, what: &str) -> Result<T> {
        let tok = tok.ok_or_else(|| self.err(line, format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| self.err(line, format!("bad {what} `{tok}`")))
    }
}

/// Records of one text, split into tokens, with comments and blanks dropped.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_whitespace().collect();
        (!toks.is_empty()).then_some((i + 1, toks))
    })
}

/// Parses a scenario (or bare topology) file.
pub fn parse_scenario(text: &str, source: &str) -> Result<Scenario> {
    let p = Lines { source };
    let mut k = (DEFAULT_WAVELENGTHS, Rate::from_gbps(DEFAULT_CAPACITY_GBPS)?);
    let mut vertices: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut edges = Vec::new();
    let mut cbs_lines = Vec::new();
    for (line, toks) in records(text) {
        let mut it = toks.iter().copied();
        match it.next().unwrap() {
            "K" => {
                let count: usize = p.num(line, it.next(), "wavelength count")?;
                let cap: f64 = p.num(line, it.next(), "capacity")?;
                let cap = Rate::from_gbps(cap).map_err(|e| p.err(line, e.to_string()))?;
                k = (count, cap);
            }
            "V" => {
                let id = p.num(line, it.next(), "vertex id")?;
                let x = p.num(line, it.next(), "x")?;
                let y = p.num(line, it.next(), "y")?;
                vertices.push((line, id, x, y));
            }
            "E" => {
                let a: usize = p.num(line, it.next(), "endpoint")?;
                let b: usize = p.num(line, it.next(), "endpoint")?;
                let len: f64 = p.num(line, it.next(), "length")?;
                let lat: Option<f64> = match it.next() {
                    Some(t) => Some(p.num(line, Some(t), "latency")?),
                    None => None,
                };
                edges.push((line, a, b, len, lat));
            }
            "C" => cbs_lines.push((line, toks.clone())),
            other => return Err(p.err(line, format!("unknown record `{other}`"))),
        }
        if matches!(toks[0], "K" | "V" | "E") && it.next().is_some() {
            return Err(p.err(line, "trailing tokens"));
        }
    }

    let mut graph = BackhaulGraph::new(k.0, k.1).map_err(|e| p.err(0, e.to_string()))?;
    vertices.sort_by_key(|v| v.1);
    for (i, &(line, id, x, y)) in vertices.iter().enumerate() {
        if id != i {
            return Err(p.err(line, format!("vertex ids must be contiguous from 0; expected {i}, got {id}")));
        }
        graph.add_vertex(x, y);
    }
    for (line, a, b, len, lat) in edges {
        graph
            .add_link(a, b, len, lat)
            .map_err(|e| p.err(line, e.to_string()))?;
    }

    let mut cbs = Vec::new();
    let mut seen = HashSet::new();
    for (line, toks) in cbs_lines {
        let mut it = toks.into_iter().skip(1);
        let id: usize = p.num(line, it.next(), "CBS id")?;
        let demand: f64 = p.num(line, it.next(), "demand")?;
        let demand = Rate::from_gbps(demand).map_err(|e| p.err(line, e.to_string()))?;
        let rtt: f64 = p.num(line, it.next(), "RTT budget")?;
        let members = it
            .map(|t| p.num(line, Some(t), "member id"))
            .collect::<Result<Vec<usize>>>()?;
        let spec = CbsSpec::new(id, members, demand, rtt);
        spec.check_against(&graph).map_err(|e| p.err(line, e.to_string()))?;
        if !seen.insert(id) {
            return Err(p.err(line, format!("duplicate CBS id {id}")));
        }
        cbs.push(spec);
    }
    Ok(Scenario { graph, cbs })
}

pub fn write_events(events: &[RunEvent]) -> String {
    let mut out = String::new();
    for e in events {
        match e {
            RunEvent::Placed(p) => {
                let c = &p.cost;
                writeln!(
                    out,
                    "P {} {} n={} ng={} na={} nl={}",
                    p.cbs_id, p.controller, c.n, c.n_g, c.n_a, c.n_l
                )
                .unwrap();
                for r in &p.assignment.routes {
                    write!(out, "R {} {}", p.cbs_id, r.member).unwrap();
                    for w in &r.wavelengths {
                        write!(out, " {w}").unwrap();
                    }
                    for v in &r.path {
                        write!(out, " {v}").unwrap();
                    }
                    out.push('\n');
                }
            }
            RunEvent::Infeasible(id) => writeln!(out, "X {id}").unwrap(),
        }
    }
    out
}

pub fn parse_events(text: &str, source: &str) -> Result<Vec<RunEvent>> {
    let p = Lines { source };
    let mut out: Vec<RunEvent> = Vec::new();
    for (line, toks) in records(text) {
        match toks[0] {
            "P" => {
                if toks.len() != 7 {
                    return Err(p.err(line, "P record needs 6 fields"));
                }
                let cbs_id = p.num(line, Some(toks[1]), "CBS id")?;
                let controller = p.num(line, Some(toks[2]), "controller")?;
                let field = |i: usize, key: &str| -> Result<&str> {
                    toks[i]
                        .strip_prefix(key)
                        .and_then(|s| s.strip_prefix('='))
                        .ok_or_else(|| p.err(line, format!("expected {key}=<value>")))
                };
                let cost = TreeCost {
                    n: p.num(line, Some(field(3, "n")?), "n")?,
                    n_g: p.num(line, Some(field(4, "ng")?), "ng")?,
                    n_a: p.num(line, Some(field(5, "na")?), "na")?,
                    n_l: p.num(line, Some(field(6, "nl")?), "nl")?,
                };
                out.push(RunEvent::Placed(Placement {
                    cbs_id,
                    controller,
                    assignment: WavelengthAssignment::default(),
                    cost,
                }));
            }
            "R" => {
                let nums = toks[1..]
                    .iter()
                    .map(|t| p.num(line, Some(t), "field"))
                    .collect::<Result<Vec<usize>>>()?;
                // cbs, member, then h wavelengths and h + 1 path vertices.
                if nums.len() < 3 || (nums.len() - 3) % 2 != 0 {
                    return Err(p.err(line, "R record has an inconsistent field count"));
                }
                let hops = (nums.len() - 3) / 2;
                let Some(RunEvent::Placed(placement)) = out.last_mut() else {
                    return Err(p.err(line, "R record without a preceding P record"));
                };
                if placement.cbs_id != nums[0] {
                    return Err(p.err(line, format!("R record for CBS {} follows P record for CBS {}", nums[0], placement.cbs_id)));
                }
                placement.assignment.routes.push(Route {
                    member: nums[1],
                    wavelengths: nums[2..2 + hops].to_vec(),
                    path: nums[2 + hops..].to_vec(),
                });
            }
            "X" => {
                if toks.len() != 2 {
                    return Err(p.err(line, "X record needs 1 field"));
                }
                out.push(RunEvent::Infeasible(p.num(line, Some(toks[1]), "CBS id")?));
            }
            other => return Err(p.err(line, format!("unknown record `{other}`"))),
        }
    }
    Ok(out)
}
