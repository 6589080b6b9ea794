//! Sweep runner and metrics.
//!
//! A sweep point is one (hotspot fraction, demand, CBS count) triple. For
//! every point and replication `r` a single scenario is generated with seed
//! `splitmix64(base_seed + r)` and every variant runs on its own copy of it,
//! so variants are compared on identical inputs. Rows come out ordered by
//! hotspot fraction, demand, CBS count, replication, then variant, regardless
//! of how many worker threads ran the sweep.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{default_fixed_root, static_backhaul, static_reconfiguration, OversubscriptionReport};
use crate::error::{Error, Result};
use crate::placement::{run_heuristic, run_unprioritized, CostWeights, Placement};
use crate::prioritization::PrioritizationThresholds;
use crate::records::write_scenario;
use crate::scenario::{generate, CbsSpec, ScenarioParams};
use crate::topology::{BackhaulGraph, Rate};

pub const CSV_HEADER: &str =
    "seed,cbs_count,demand_gbps,h,variant,prioritized,feasibility,wl_total,wl_per_link_mean,wl_per_link_max,runtime_s";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Full heuristic with hotspot CBSs placed first.
    Prioritized,
    /// Full heuristic in input order.
    Unprioritized,
    /// Prioritized heuristic with a fixed controller.
    StaticReconfiguration,
    /// Fixed controller, static wavelength, shortest paths, no admission control.
    StaticBackhaul,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Prioritized,
        Variant::Unprioritized,
        Variant::StaticReconfiguration,
        Variant::StaticBackhaul,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Prioritized => "prioritized",
            Variant::Unprioritized => "unprioritized",
            Variant::StaticReconfiguration => "static_reconfiguration",
            Variant::StaticBackhaul => "static_backhaul",
        }
    }

    pub fn uses_prioritization(self) -> bool {
        matches!(self, Variant::Prioritized | Variant::StaticReconfiguration)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub feasibility: f64,
    /// Active (link, wavelength) pairs.
    pub wl_total: usize,
    pub wl_per_link_mean: f64,
    pub wl_per_link_max: usize,
}

fn wavelength_metrics(per_link: impl Iterator<Item = usize>, link_count: usize) -> (usize, f64, usize) {
    let (total, max) = per_link.fold((0, 0), |(t, m), c| (t + c, m.max(c)));
    let mean = if link_count == 0 {
        0.0
    } else {
        total as f64 / link_count as f64
    };
    (total, mean, max)
}

/// Metrics after a run, read off the graph's activity flags.
pub fn evaluate(graph: &BackhaulGraph, cbs: &[CbsSpec], placements: &[Placement], infeasible: &[usize]) -> Metrics {
    debug_assert_eq!(placements.len() + infeasible.len(), cbs.len());
    let attempted = placements.len() + infeasible.len();
    let feasibility = if attempted == 0 {
        1.0
    } else {
        placements.len() as f64 / attempted as f64
    };
    let (wl_total, wl_per_link_mean, wl_per_link_max) =
        wavelength_metrics(graph.links().iter().map(|l| l.active_count()), graph.link_count());
    Metrics {
        feasibility,
        wl_total,
        wl_per_link_mean,
        wl_per_link_max,
    }
}

/// Metrics of a static backhaul run: a-priori feasibility and the pairs it lights.
pub fn evaluate_report(graph: &BackhaulGraph, report: &OversubscriptionReport) -> Metrics {
    let mut per_link = vec![0usize; graph.link_count()];
    for p in &report.pairs {
        per_link[p.link] += 1;
    }
    let (wl_total, wl_per_link_mean, wl_per_link_max) = wavelength_metrics(per_link.into_iter(), graph.link_count());
    Metrics {
        feasibility: report.a_priori_feasibility,
        wl_total,
        wl_per_link_mean,
        wl_per_link_max,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub cbs_count: usize,
    pub demand: Rate,
    pub h: f64,
    pub variant: Variant,
    pub prioritized: bool,
    pub metrics: Metrics,
    pub runtime_s: f64,
    /// SHA-256 of the serialized scenario the variant ran on.
    pub scenario_hash: String,
    /// Offered load beyond capacity; only static backhaul can be non-zero.
    pub excess: Rate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioParams,
    pub cbs_counts: Vec<usize>,
    pub demands: Vec<f64>,
    pub hotspot_fractions: Vec<f64>,
    pub variants: Vec<Variant>,
    pub replications: u64,
    pub base_seed: u64,
    pub t_v: f64,
    pub t_h: f64,
    /// `[w_g, w_a, w_l]`.
    pub weights: [f64; 3],
    /// Controller for the static variants; defaults to the vertex nearest the centroid.
    pub fixed_root: Option<usize>,
    pub static_wavelength: usize,
    /// Record wall-clock runtimes. Off by default so outputs are byte-reproducible.
    pub timing: bool,
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioParams::default(),
            cbs_counts: (1..=10).map(|i| i * 10).collect(),
            demands: vec![0.625, 1.25, 2.5],
            hotspot_fractions: vec![0.0, 0.5, 0.75, 1.0],
            variants: vec![Variant::Prioritized, Variant::Unprioritized],
            replications: 20,
            base_seed: 1,
            t_v: 0.1,
            t_h: 0.9,
            weights: [1.0, 1.0, 1.0],
            fixed_root: None,
            static_wavelength: 0,
            timing: false,
            jobs: None,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn thresholds(&self) -> Result<PrioritizationThresholds> {
        PrioritizationThresholds::new(self.t_v, self.t_h).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn cost_weights(&self) -> Result<CostWeights> {
        let [g, a, l] = self.weights;
        CostWeights::new(g, a, l).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Config(format!("{name} must not be empty")))
            } else {
                Ok(())
            }
        };
        empty("cbs_counts", self.cbs_counts.len())?;
        empty("demands", self.demands.len())?;
        empty("hotspot_fractions", self.hotspot_fractions.len())?;
        empty("variants", self.variants.len())?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        self.thresholds()?;
        self.cost_weights()?;
        for point in self.points() {
            self.params_for(&point, 0).validate()?;
        }
        Ok(())
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }

    /// Sweep points in output order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &h in &self.hotspot_fractions {
            for &demand in &self.demands {
                for &cbs_count in &self.cbs_counts {
                    out.push(SweepPoint { h, demand, cbs_count });
                }
            }
        }
        out
    }

    pub fn params_for(&self, point: &SweepPoint, replication: u64) -> ScenarioParams {
        ScenarioParams {
            cbs_count: point.cbs_count,
            demand: point.demand,
            hotspot_fraction: point.h,
            seed: scenario_seed(self.base_seed, replication),
            ..self.scenario.clone()
        }
    }

    /// Resolved config text for the `.meta` companion file.
    pub fn meta_text(&self) -> String {
        let mut resolved = self.clone();
        resolved.scenario.jitter_sigma = Some(self.scenario.jitter_sigma());
        resolved.scenario.hotspot_sigma = Some(self.scenario.hotspot_sigma());
        format!(
            "# cran-backhaul {}\n{}",
            env!("CARGO_PKG_VERSION"),
            toml::to_string(&resolved).expect("config serializes")
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub h: f64,
    pub demand: f64,
    pub cbs_count: usize,
}

/// SplitMix64 finalizer applied to `base_seed + replication`.
pub fn scenario_seed(base_seed: u64, replication: u64) -> u64 {
    let mut z = base_seed.wrapping_add(replication).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs every variant of the config on one sweep point and replication.
pub fn run_point(config: &ExperimentConfig, point: &SweepPoint, replication: u64) -> Result<Vec<MetricsRow>> {
    let params = config.params_for(point, replication);
    let scenario = generate(&params)?;
    let hash = sha256_hex(&write_scenario(&scenario));
    let thresholds = config.thresholds()?;
    let weights = config.cost_weights()?;
    let fixed_root = match config.fixed_root {
        Some(r) => r,
        None => default_fixed_root(&scenario.graph).ok_or_else(|| Error::invalid("empty graph"))?,
    };

    let mut rows = Vec::with_capacity(config.variants.len());
    for &variant in &config.variants {
        let mut graph = scenario.graph.clone();
        let started = Instant::now();
        let (metrics, excess) = match variant {
            Variant::StaticBackhaul => {
                let report = static_backhaul(&graph, &scenario.cbs, fixed_root, config.static_wavelength)?;
                (evaluate_report(&graph, &report), report.aggregate_excess())
            }
            _ => {
                let out = match variant {
                    Variant::Prioritized => run_heuristic(&mut graph, &scenario.cbs, &thresholds, &weights),
                    Variant::Unprioritized => run_unprioritized(&mut graph, &scenario.cbs, &weights),
                    _ => static_reconfiguration(&mut graph, &scenario.cbs, fixed_root, &thresholds, &weights)?,
                };
                (evaluate(&graph, &scenario.cbs, &out.placements, &out.infeasible), Rate::ZERO)
            }
        };
        let runtime_s = if config.timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        rows.push(MetricsRow {
            seed: params.seed,
            cbs_count: point.cbs_count,
            demand: params.demand_rate()?,
            h: point.h,
            variant,
            prioritized: variant.uses_prioritization(),
            metrics,
            runtime_s,
            scenario_hash: hash.clone(),
            excess,
        });
    }
    Ok(rows)
}

/// Runs the whole sweep. With an output path set, the file is created before
/// any work starts, and the CSV and `.meta` companion are written at the end.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let out_file = match &config.output {
        Some(path) => Some((path, File::create(path).map_err(|e| Error::io(path, e))?)),
        None => None,
    };

    let tasks: Vec<(SweepPoint, u64)> = config
        .points()
        .into_iter()
        .flat_map(|p| (0..config.replications).map(move |r| (p, r)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_task: Vec<Result<Vec<MetricsRow>>> =
        pool.install(|| tasks.par_iter().map(|(p, r)| run_point(config, p, *r)).collect());
    let mut rows = Vec::with_capacity(tasks.len() * config.variants.len());
    for chunk in per_task {
        rows.extend(chunk?);
    }

    if let Some((path, file)) = out_file {
        write_csv(&rows, file).map_err(|e| with_path(e, path))?;
        let meta = meta_path(path);
        std::fs::write(&meta, config.meta_text()).map_err(|e| Error::io(meta, e))?;
    }
    Ok(rows)
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn format_row(r: &MetricsRow) -> [String; 11] {
    [
        r.seed.to_string(),
        r.cbs_count.to_string(),
        format!("{:.4}", r.demand.gbps()),
        format!("{:.4}", r.h),
        r.variant.to_string(),
        r.prioritized.to_string(),
        format!("{:.4}", r.metrics.feasibility),
        r.metrics.wl_total.to_string(),
        format!("{:.4}", r.metrics.wl_per_link_mean),
        r.metrics.wl_per_link_max.to_string(),
        format!("{:.3}", r.runtime_s),
    ]
}

pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::invalid(format!("csv: {other:?}")),
    };
    w.write_record(CSV_HEADER.split(',')).map_err(fail)?;
    for r in rows {
        w.write_record(format_row(r)).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, file).map_err(|e| with_path(e, path))
}
