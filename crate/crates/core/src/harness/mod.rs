//! Experiment harness: scenario files, seeded runs, multi-seed studies and
//! the files they leave behind.

pub mod build;
pub mod config;
pub mod output;
pub mod plot;
pub mod run;
pub mod study;

pub use config::{EventAction, EventConfig, Mode, OptimizerConfig, ScenarioConfig, TestbedKind};
pub use output::{write_artifacts, NumericTable};
pub use run::{run_scenario, IterationRecord, RunArtifacts, RunSummary};
pub use study::{run_study, Interval, StudyRow, Sweep};
