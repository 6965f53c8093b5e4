//! World directories: `flights.csv`, `metar.txt`, `network.json` and
//! `metadata.json`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::save_flight_records;
use crate::synth::world::{SyntheticWorld, WorldMetadata};

pub const FLIGHTS_FILE: &str = "flights.csv";
pub const METAR_FILE: &str = "metar.txt";
pub const NETWORK_FILE: &str = "network.json";
pub const METADATA_FILE: &str = "metadata.json";

/// Writes the world into `dir`, returning the written paths.
pub fn write_world(world: &SyntheticWorld, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let flights = dir.join(FLIGHTS_FILE);
    save_flight_records(&flights, &world.flights)?;
    let metar = dir.join(METAR_FILE);
    fs::write(&metar, &world.metar).map_err(|e| Error::io(&metar, e))?;
    let network = dir.join(NETWORK_FILE);
    fs::write(&network, world.network.to_json()?).map_err(|e| Error::io(&network, e))?;
    let meta = dir.join(METADATA_FILE);
    fs::write(&meta, serde_json::to_string_pretty(&world.metadata)?).map_err(|e| Error::io(&meta, e))?;
    Ok(vec![flights, metar, network, meta])
}

pub fn load_metadata(dir: &Path) -> Result<WorldMetadata> {
    let p = dir.join(METADATA_FILE);
    Ok(serde_json::from_str(&fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?)
}
