//! Flit-level simulation of Delta multistage interconnection networks that
//! use wormhole routing over lane-partitioned switch buffers, plus closed-form
//! reliability and cost calculators for the same fabrics.

pub mod config;
pub mod costmodel;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod reliability;
pub mod topology;
pub mod traffic;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use metrics::{MetricsRecord, Summary};
pub use topology::NetworkShape;
