//! Reference driver models for counterfactual cut-in simulation.
//!
//! Recorded cut-in events are replayed with the human evasive maneuver
//! removed, and a driver model (CCDM or FSM) decides when and how hard the
//! ego vehicle brakes. The crate also generates synthetic events, computes
//! per-event comparison metrics and runs the summary statistics.

pub mod ccdm;
pub mod config;
pub mod driver;
pub mod engine;
pub mod fsm;
pub mod generator;
pub mod kinematics;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod stats;
