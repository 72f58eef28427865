//! Runs of the simulated installation: configuration, slot scheduling,
//! the agent environment over the full simulation, run manifests and the
//! per-minute report.

pub mod bench;
pub mod config;
pub mod las_env;
pub mod report;
pub mod run;
pub mod schedule;

use std::path::PathBuf;

use thiserror::Error;

pub use bench::{run_bench, run_bench_seed, BenchConfig, BenchError, SeedOutcome};
pub use config::{derive_seed, LoadedConfig, Mode, RunConfig, Seeds};
pub use las_env::{LasEnv, LasSim};
pub use report::{report, write_report, LoadedRun, Report};
pub use run::{file_sha256, run, run_dir_of, RunManifest, SlotRecord, SlotStatus, MANIFEST_FILE};
pub use schedule::{plan, schedule_slots, Slot};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {0}: {1}")]
    Read(PathBuf, #[source] std::io::Error),
    #[error("cannot write {0}: {1}")]
    Write(PathBuf, #[source] std::io::Error),
    #[error("the slot has no simulated time left")]
    SlotOver,
    #[error("checkpoint lineage broken: {0}")]
    Lineage(String),
    #[error("runs {first} and {other} were recorded on different topologies")]
    MixedTopologies { first: String, other: String },
    #[error("slot {index} of day {day} failed: {source}")]
    SlotFailed {
        day: u32,
        index: u32,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sculpture(#[from] crate::sculpture::SculptureError),
    #[error(transparent)]
    Pb(#[from] crate::pb::PbError),
    #[error(transparent)]
    Pla(#[from] crate::pla::PlaError),
    #[error(transparent)]
    Visitor(#[from] crate::visitors::VisitorError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
}
