//! Synthetic experiments, CSV ingestion and the `ppi` command line.

pub mod commands;
pub mod ingest;
pub mod scenario;
pub mod summary;
pub mod sweep;

pub use scenario::{generate_synthetic, ScenarioKind, ScenarioSpec};
pub use summary::{summarize, SummaryRow};
pub use sweep::{run_sweep, trial_seed, Method, SweepConfig, TrialRecord};
