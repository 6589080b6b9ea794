use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use backhaul::baselines::{default_fixed_root, static_backhaul, static_reconfiguration};
use backhaul::experiments::{run_sweep, ExperimentConfig, Variant};
use backhaul::oracle::brute_force_feasible;
use backhaul::placement::{place_cbs, HeuristicOutcome};
use backhaul::prioritization::classify;
use backhaul::records::{events, parse_events, parse_scenario, write_events, write_scenario};
use backhaul::scenario::generate;
use backhaul::validate::validate_run;
use backhaul::{run_heuristic, run_unprioritized, CostWeights, Error, PrioritizationThresholds, Result, ScenarioParams};

#[derive(Parser)]
#[command(name = "backhaul", version, about = "CBS controller placement and wavelength allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file from a parameter config.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Place every CBS of a scenario and write the placement records.
    Place {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "prioritized")]
        variant: Variant,
        #[command(flatten)]
        tuning: Tuning,
        /// Controller for the static variants.
        #[arg(long)]
        fixed_root: Option<usize>,
        /// Wavelength used by static_backhaul.
        #[arg(long, default_value_t = 0)]
        wavelength: usize,
        /// Exit with status 1 if any CBS is infeasible.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep and write the metrics CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare each heuristic decision with exhaustive search.
    OracleCheck {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_hops: usize,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Check recorded placements against a scenario.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        placements: PathBuf,
        #[arg(long, value_parser = parse_weights, default_value = "1,1,1")]
        weights: CostWeights,
    },
}

#[derive(Args)]
struct Tuning {
    /// Cost weights as w_g,w_a,w_l.
    #[arg(long, value_parser = parse_weights, default_value = "1,1,1")]
    weights: CostWeights,
    /// Prioritization thresholds as t_v,t_h.
    #[arg(long, value_parser = parse_thresholds, default_value = "0.1,0.9")]
    thresholds: PrioritizationThresholds,
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse_weights(s: &str) -> std::result::Result<CostWeights, String> {
    let [g, a, l] = parse_floats::<3>(s)?;
    CostWeights::new(g, a, l).map_err(|e| e.to_string())
}

fn parse_thresholds(s: &str) -> std::result::Result<PrioritizationThresholds, String> {
    let [v, h] = parse_floats::<2>(s)?;
    PrioritizationThresholds::new(v, h).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_scenario(path: &Path) -> Result<backhaul::Scenario> {
    parse_scenario(&read(path)?, &path.display().to_string())
}

fn summarize(outcome: &HeuristicOutcome) {
    eprintln!(
        "placed {}/{} CBSs (feasibility {:.4})",
        outcome.placements.len(),
        outcome.order.len(),
        outcome.feasibility()
    );
}

/// Returns whether the command's check passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let mut params = match config {
                Some(path) => ScenarioParams::load(&path)?,
                None => ScenarioParams::default(),
            };
            if let Some(seed) = seed {
                params.seed = seed;
            }
            let scenario = generate(&params)?;
            write(&out, &write_scenario(&scenario))?;
            eprintln!(
                "{} vertices, {} links, {} CBSs",
                scenario.graph.vertex_count(),
                scenario.graph.link_count(),
                scenario.cbs.len()
            );
            Ok(true)
        }
        Command::Place {
            scenario,
            variant,
            tuning,
            fixed_root,
            wavelength,
            strict,
            out,
        } => {
            let sc = load_scenario(&scenario)?;
            let mut graph = sc.graph.clone();
            let root = || {
                fixed_root
                    .or_else(|| default_fixed_root(&graph))
                    .ok_or_else(|| Error::InvalidArgument("empty graph".into()))
            };
            let outcome = match variant {
                Variant::StaticBackhaul => {
                    let report = static_backhaul(&sc.graph, &sc.cbs, root()?, wavelength)?;
                    eprintln!(
                        "offered {} over {} pairs, excess {} on {} pairs",
                        report.offered_total(),
                        report.pairs.len(),
                        report.aggregate_excess(),
                        report.oversubscribed_pairs()
                    );
                    let mut buf = Vec::new();
                    report.write_pairs_csv(&mut buf)?;
                    match out {
                        Some(path) => write(&path, &String::from_utf8_lossy(&buf))?,
                        None => print!("{}", String::from_utf8_lossy(&buf)),
                    }
                    return Ok(!strict || report.oversubscribed_pairs() == 0);
                }
                Variant::Prioritized => run_heuristic(&mut graph, &sc.cbs, &tuning.thresholds, &tuning.weights),
                Variant::Unprioritized => run_unprioritized(&mut graph, &sc.cbs, &tuning.weights),
                Variant::StaticReconfiguration => {
                    let r = root()?;
                    static_reconfiguration(&mut graph, &sc.cbs, r, &tuning.thresholds, &tuning.weights)?
                }
            };
            summarize(&outcome);
            let text = write_events(&events(&outcome));
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(!strict || outcome.infeasible.is_empty())
        }
        Command::Sweep { config, jobs, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if jobs.is_some() {
                cfg.jobs = jobs;
            }
            if out.is_some() {
                cfg.output = out;
            }
            if cfg.output.is_none() {
                return Err(Error::Config("no output path: set `output` or pass --out".into()));
            }
            let rows = run_sweep(&cfg)?;
            eprintln!("{} rows", rows.len());
            Ok(true)
        }
        Command::OracleCheck {
            scenario,
            max_hops,
            tuning,
        } => {
            let sc = load_scenario(&scenario)?;
            let mut graph = sc.graph.clone();
            let work = classify(&sc.cbs, graph.vertex_count(), &tuning.thresholds);
            let mut ok = true;
            for cbs in work.iter() {
                let best = brute_force_feasible(&graph, cbs, max_hops, &tuning.weights)?;
                let found = place_cbs(&mut graph, cbs, &tuning.weights);
                match (&found, &best) {
                    (Some(h), None) => {
                        ok = false;
                        println!("CBS {}: heuristic placed it but exhaustive search found nothing", h.cbs_id);
                    }
                    (Some(h), Some(b)) if h.cost.n < b.cost.n - 1e-9 => {
                        ok = false;
                        println!("CBS {}: heuristic cost {} below exhaustive optimum {}", h.cbs_id, h.cost.n, b.cost.n);
                    }
                    (Some(h), Some(b)) => {
                        println!("CBS {}: heuristic n={} optimum n={}", h.cbs_id, h.cost.n, b.cost.n)
                    }
                    (None, Some(b)) => println!("CBS {}: infeasible for heuristic, optimum n={}", cbs.id, b.cost.n),
                    (None, None) => println!("CBS {}: infeasible", cbs.id),
                }
            }
            Ok(ok)
        }
        Command::Validate {
            scenario,
            placements,
            weights,
        } => {
            let sc = load_scenario(&scenario)?;
            let evs = parse_events(&read(&placements)?, &placements.display().to_string())?;
            let violations = validate_run(&sc.graph, &sc.cbs, &evs, &weights, None);
            for v in &violations {
                println!("{v}");
            }
            if violations.is_empty() {
                eprintln!("{} events, no violations", evs.len());
            }
            Ok(violations.is_empty())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
