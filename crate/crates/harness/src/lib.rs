//! Experiment harness: seeded Monte Carlo sweeps with runtime monitors,
//! bound checks, exhaustive small-instance exploration and reports.

pub mod audit;
pub mod config;
pub mod explore;
pub mod stats;
pub mod sweep;
pub mod trial;

pub use config::{ExperimentConfig, InputSpec, Protocol};
pub use explore::{explore, ExhaustiveReport, ExploreConfig, ExploreVerdict};
pub use stats::{trial_seed, wilson, Verdict};
pub use sweep::{run_sweep, verify_bound, SweepReport};
pub use trial::{run_trial, run_trial_traced, TrialReport};
