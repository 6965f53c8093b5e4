//! Network delay states, demand counts and per-flight sample assembly.

pub mod dataset;
pub mod delay;
pub mod network;
pub mod sample;

pub use dataset::{load_samples, save_samples, DatasetHeader, LabeledSample};
pub use delay::{
    airport_delays, build_window, demand_counts, od_delay, DelayStateIndex, DelayStateWindow, FlightLog,
    ScheduleIndex,
};
pub use network::NetworkIndex;
pub use sample::{assemble_all, assemble_sample, AssembledSample, AssemblyReport, FlightInfo};
