//! Config-driven experiment runner with a reproduction manifest.

pub mod config;
pub mod metrics;
pub mod run;
pub mod verify;

pub use config::{ExperimentConfig, Stage, SCHEMA_EXAMPLE, SCHEMA_VERSION};
pub use run::{run, RunManifest};
pub use verify::{verify, VerifyReport};
