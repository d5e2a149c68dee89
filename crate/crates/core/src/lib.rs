//! Distributed, plug-n-play optimization for multi-robot teams whose global
//! objective can only be measured, never computed ahead of time.
//!
//! Every robot runs its own [`agent::Agent`]: a windowed least-squares
//! polynomial estimator of its private subcost, a batch of random candidate
//! moves filtered by the operational constraints, and a greedy pick of the
//! best-scoring candidate. The [`coordinator`] gathers measurements, evaluates
//! the global cost and hands each robot a single scalar, the discrepancy
//! between the real cost and the cost obtained by rewinding that robot's
//! measurement one iteration.
//!
//! Four testbeds are provided under [`testbed`], and [`harness`] drives
//! seeded runs and multi-seed studies from TOML scenario files.

pub mod agent;
pub mod coordinator;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod testbed;

pub use agent::{Agent, AgentConfig, DecisionVector, RegressorSpec, StepSizeSchedule};
pub use coordinator::{CostReport, MeasurementRecord, Swarm, Testbed};
pub use error::{Error, Result};

/// Index of a robot inside a scenario. Stable for the whole run.
pub type RobotId = usize;
