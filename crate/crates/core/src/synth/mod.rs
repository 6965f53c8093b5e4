//! Synthetic worlds with planted structure: schedules, delays with
//! OD-specific spatial coupling and finite memory, METAR streams and fuel
//! records, plus the ground truth needed to check every pipeline stage.

pub mod io;
pub mod metar;
pub mod spec;
pub mod world;

pub use io::{load_metadata, write_world, FLIGHTS_FILE, METADATA_FILE, METAR_FILE, NETWORK_FILE};
pub use spec::{FuelProcess, ScenarioSpec, WeatherProcess};
pub use world::{airport_code, generate, group_stats, GroupStat, OdTruth, PlantedColumn, SyntheticWorld, WorldMetadata, AIRCRAFT};
