//! Discrete-TTI simulator of a single LTE-A downlink cell.
//!
//! The crate implements a resource-allocation mechanism in which one tabular
//! Q-Learning agent per traffic class (VoIP, Video, Web) picks that class's
//! resource-block cap every TTI from Σ quantized budget levels, rewarded by a
//! log-ratio of system throughput to delay × packet loss. Round robin,
//! proportional fair and frame level scheduling run on the same engine as
//! baselines.
//!
//! Module map:
//!
//! * [`rl`]: Q-table, ε-greedy selection, Q-Learning update and a
//!   value-iteration reference solver.
//! * [`budget`]: budget levels, the reward and the per-class agents.
//! * [`radio`]: pathloss, SINR, spectral efficiency and per-RB capacity.
//! * [`traffic`]: video, VoIP and web sources; flow queues with delay budgets.
//! * [`sched`]: RR, PF, FLS and the budgeted class-priority allocator.
//! * [`engine`]: the per-TTI loop.
//! * [`metrics`]: throughput, delay, jitter, PLR, fairness, CDFs.
//! * [`config`] and [`experiment`]: config files, sweeps and CSV output.

pub mod budget;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod radio;
pub mod rl;
pub mod rng;
pub mod sched;
pub mod traffic;

pub use error::{Error, Result};
