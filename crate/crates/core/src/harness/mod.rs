//! Configuration, coupled replica runs and convergence studies.

pub mod config;
pub mod replica;
pub mod study;

pub use config::{ExperimentConfig, PRESETS};
pub use replica::{run_replica, EnsembleRecord, ReplicaOptions, ReplicaResult, Snapshots};
pub use study::{halving_check, run_convergence_study, run_corollary_empirical, StudyOptions, StudyOutcome};
