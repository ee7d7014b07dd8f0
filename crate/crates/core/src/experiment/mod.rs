//! Configuration-driven experiments: estimator comparison over synthetic or
//! recorded streams, result tables and guarantee checks.

pub mod aggregate;
pub mod config;
pub mod ingest;
pub mod runner;
pub mod verify;

pub use aggregate::{aggregate, read_aggregate, write_aggregate, AggregateRow};
pub use config::{EstimatorKind, ExperimentConfig, Mode};
pub use ingest::{read_stream, write_stream, SignalStream};
pub use runner::{estimator_specs, run_experiment, run_realization, EstimatorSpec, ExperimentSummary, Manifest};
