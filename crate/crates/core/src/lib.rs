//! Deterministic discrete-event benchmark harness for geo-distributed
//! transaction processing protocols.

pub mod cli;
pub mod config;
pub mod error;
pub mod metrics;
pub mod model;
pub mod netsim;
pub mod protocols;
pub mod scenarios;
pub mod seed;
pub mod time;
pub mod workload;

pub use error::{Error, Result};
