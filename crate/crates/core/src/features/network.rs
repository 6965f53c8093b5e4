use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::metar::is_icao;
use crate::ingest::FlightRecord;

/// Frozen ordering of the airports and OD pairs that index every delay-state
/// column.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "IndexFile", into = "IndexFile")]
pub struct NetworkIndex {
    airports: Vec<String>,
    od_pairs: Vec<(String, String)>,
    airport_pos: HashMap<String, usize>,
    od_pos: HashMap<(String, String), usize>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    airports: Vec<String>,
    od_pairs: Vec<(String, String)>,
}

impl TryFrom<IndexFile> for NetworkIndex {
    type Error = Error;
    fn try_from(f: IndexFile) -> Result<Self> {
        NetworkIndex::new(f.airports, f.od_pairs)
    }
}

impl From<NetworkIndex> for IndexFile {
    fn from(n: NetworkIndex) -> Self {
        IndexFile {
            airports: n.airports,
            od_pairs: n.od_pairs,
        }
    }
}

impl PartialEq for NetworkIndex {
    fn eq(&self, other: &Self) -> bool {
        self.airports == other.airports && self.od_pairs == other.od_pairs
    }
}

impl NetworkIndex {
    pub fn new(airports: Vec<String>, od_pairs: Vec<(String, String)>) -> Result<Self> {
        let mut airport_pos = HashMap::new();
        for (i, a) in airports.iter().enumerate() {
            if !is_icao(a) {
                return Err(Error::InvalidConfig(format!("bad airport code `{a}`")));
            }
            if airport_pos.insert(a.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate airport `{a}`")));
            }
        }
        let mut od_pos = HashMap::new();
        for (i, (o, d)) in od_pairs.iter().enumerate() {
            if !airport_pos.contains_key(o) || !airport_pos.contains_key(d) {
                return Err(Error::InvalidConfig(format!("OD {o}-{d} uses an unindexed airport")));
            }
            if o == d {
                return Err(Error::InvalidConfig(format!("OD {o}-{d} is a loop")));
            }
            if od_pos.insert((o.clone(), d.clone()), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate OD {o}-{d}")));
            }
        }
        Ok(NetworkIndex {
            airports,
            od_pairs,
            airport_pos,
            od_pos,
        })
    }

    /// Index of the OD pairs averaging at least `min_flights_per_day` flights
    /// over the span of `flights`, with their endpoint airports. Both lists are
    /// sorted.
    pub fn from_flights(flights: &[FlightRecord], min_flights_per_day: f64) -> Result<Self> {
        if flights.is_empty() {
            return NetworkIndex::new(Vec::new(), Vec::new());
        }
        let first = flights.iter().map(|f| f.sched_dep).min().unwrap_or_default();
        let last = flights.iter().map(|f| f.sched_dep).max().unwrap_or_default();
        let days = (((last - first).num_seconds() as f64) / 86_400.0).ceil().max(1.0);
        let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
        for f in flights {
            *counts.entry((f.origin.clone(), f.destination.clone())).or_default() += 1;
        }
        let od_pairs: Vec<(String, String)> = counts
            .into_iter()
            .filter(|(_, n)| *n as f64 / days >= min_flights_per_day)
            .map(|(od, _)| od)
            .collect();
        let mut airports: Vec<String> = od_pairs
            .iter()
            .flat_map(|(o, d)| [o.clone(), d.clone()])
            .collect();
        airports.sort();
        airports.dedup();
        NetworkIndex::new(airports, od_pairs)
    }

    pub fn n_airports(&self) -> usize {
        self.airports.len()
    }

    pub fn n_od(&self) -> usize {
        self.od_pairs.len()
    }

    pub fn airports(&self) -> &[String] {
        &self.airports
    }

    pub fn od_pairs(&self) -> &[(String, String)] {
        &self.od_pairs
    }

    pub fn airport_index(&self, code: &str) -> Option<usize> {
        self.airport_pos.get(code).copied()
    }

    pub fn od_index(&self, origin: &str, destination: &str) -> Option<usize> {
        self.od_pos
            .get(&(origin.to_string(), destination.to_string()))
            .copied()
    }

    pub fn require_od(&self, origin: &str, destination: &str) -> Result<usize> {
        self.od_index(origin, destination).ok_or_else(|| Error::UnknownOdPair {
            origin: origin.to_string(),
            destination: destination.to_string(),
        })
    }

    /// Stable content hash (hex, 16 bytes of SHA-256) of the column ordering.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"airports\n");
        for a in &self.airports {
            h.update(a.as_bytes());
            h.update(b"\n");
        }
        h.update(b"od\n");
        for (o, d) in &self.od_pairs {
            h.update(o.as_bytes());
            h.update(b"-");
            h.update(d.as_bytes());
            h.update(b"\n");
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
