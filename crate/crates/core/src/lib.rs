//! Controller placement and wavelength allocation for coordinated
//! base-station sets (CBSs) on a WDM mesh backhaul.
//!
//! Each CBS needs a controller vertex and a latency-bounded tree of
//! lightpath routes to its members. [`placement::run_heuristic`] places a
//! batch of CBSs one at a time, hotspot CBSs first, and commits capacity on
//! the shared [`topology::BackhaulGraph`] as it goes.

pub mod baselines;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod placement;
pub mod prioritization;
pub mod records;
pub mod scenario;
pub mod topology;
pub mod validate;

pub use error::{Error, Result};
pub use placement::{place_cbs, run_heuristic, run_unprioritized, CostWeights, Placement};
pub use prioritization::PrioritizationThresholds;
pub use scenario::{CbsSpec, Scenario, ScenarioParams};
pub use topology::{BackhaulGraph, Rate};
