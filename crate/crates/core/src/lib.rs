//! Flight-time prediction with spatial weighted recurrent networks and a
//! fuel-loading policy simulator.

pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod fuel;
pub mod manifest;
pub mod ingest;
pub mod model;
pub mod nn;
pub mod synth;
pub mod training;
pub mod workflow;

pub use error::{Error, Result};
