//! Flight record tables: airline schedule, actuals, fuel and weights.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::metar::is_icao;

/// Column order of the flight record file.
pub const FLIGHT_COLUMNS: [&str; 18] = [
    "flight_id",
    "flight_number",
    "origin",
    "destination",
    "aircraft_type",
    "sched_dep",
    "sched_arr",
    "actual_dep",
    "actual_arr",
    "planned_flight_time",
    "fuel_loading_fps",
    "mission_fuel_fps",
    "consumed_fuel",
    "reserve_fuel",
    "taxi_fuel",
    "fixed_fuel",
    "zfw",
    "distance",
];

/// One flight. Times are UTC, fuel and weights in kg, distance in meters,
/// planned flight time in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightRecord {
    pub flight_id: String,
    pub flight_number: String,
    pub origin: String,
    pub destination: String,
    pub aircraft_type: String,
    pub sched_dep: DateTime<Utc>,
    pub sched_arr: DateTime<Utc>,
    pub actual_dep: DateTime<Utc>,
    pub actual_arr: DateTime<Utc>,
    pub planned_flight_time: f64,
    pub fuel_loading_fps: f64,
    pub mission_fuel_fps: f64,
    pub consumed_fuel: f64,
    pub reserve_fuel: f64,
    pub taxi_fuel: f64,
    pub fixed_fuel: f64,
    pub zfw: f64,
    pub distance: f64,
}

impl FlightRecord {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidRecord(format!("{}: {msg}", self.flight_id)));
        if !is_icao(&self.origin) || !is_icao(&self.destination) {
            return fail(format!("bad ICAO code {}-{}", self.origin, self.destination));
        }
        if self.sched_arr <= self.sched_dep {
            return fail("scheduled arrival not after scheduled departure".into());
        }
        if self.actual_arr <= self.actual_dep {
            return fail("actual arrival not after actual departure".into());
        }
        let amounts = [
            ("planned_flight_time", self.planned_flight_time),
            ("fuel_loading_fps", self.fuel_loading_fps),
            ("mission_fuel_fps", self.mission_fuel_fps),
            ("consumed_fuel", self.consumed_fuel),
            ("reserve_fuel", self.reserve_fuel),
            ("taxi_fuel", self.taxi_fuel),
            ("fixed_fuel", self.fixed_fuel),
            ("zfw", self.zfw),
        ];
        for (name, v) in amounts {
            if !v.is_finite() || v < 0.0 {
                return fail(format!("{name} = {v}"));
            }
        }
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return fail(format!("distance = {}", self.distance));
        }
        Ok(())
    }

    /// Actual enroute flight time in minutes.
    pub fn actual_flight_time(&self) -> f64 {
        minutes_between(self.actual_dep, self.actual_arr)
    }

    /// Arrival delay `A_arr - S_arr` in minutes; the flight delay time used
    /// for outlier labelling.
    pub fn arrival_delay(&self) -> f64 {
        minutes_between(self.sched_arr, self.actual_arr)
    }

    pub fn departure_delay(&self) -> f64 {
        minutes_between(self.sched_dep, self.actual_dep)
    }
}

pub fn minutes_between(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    (to - from).num_seconds() as f64 / 60.0
}

pub fn format_time(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_time(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::InvalidRecord(format!("timestamp `{s}`: {e}")))
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    flight_id: Option<String>,
    flight_number: Option<String>,
    origin: Option<String>,
    destination: Option<String>,
    aircraft_type: Option<String>,
    sched_dep: Option<String>,
    sched_arr: Option<String>,
    actual_dep: Option<String>,
    actual_arr: Option<String>,
    planned_flight_time: Option<f64>,
    fuel_loading_fps: Option<f64>,
    mission_fuel_fps: Option<f64>,
    consumed_fuel: Option<f64>,
    reserve_fuel: Option<f64>,
    taxi_fuel: Option<f64>,
    fixed_fuel: Option<f64>,
    zfw: Option<f64>,
    distance: Option<f64>,
}

impl Row {
    fn into_record(self) -> Result<FlightRecord> {
        fn req<T>(v: Option<T>, name: &str) -> Result<T> {
            v.ok_or_else(|| Error::InvalidRecord(format!("missing {name}")))
        }
        fn text(v: Option<String>, name: &str) -> Result<String> {
            req(v.filter(|s| !s.trim().is_empty()), name)
        }
        let rec = FlightRecord {
            flight_id: text(self.flight_id, "flight_id")?,
            flight_number: text(self.flight_number, "flight_number")?,
            origin: text(self.origin, "origin")?,
            destination: text(self.destination, "destination")?,
            aircraft_type: text(self.aircraft_type, "aircraft_type")?,
            sched_dep: parse_time(&text(self.sched_dep, "sched_dep")?)?,
            sched_arr: parse_time(&text(self.sched_arr, "sched_arr")?)?,
            actual_dep: parse_time(&text(self.actual_dep, "actual_dep")?)?,
            actual_arr: parse_time(&text(self.actual_arr, "actual_arr")?)?,
            planned_flight_time: req(self.planned_flight_time, "planned_flight_time")?,
            fuel_loading_fps: req(self.fuel_loading_fps, "fuel_loading_fps")?,
            mission_fuel_fps: req(self.mission_fuel_fps, "mission_fuel_fps")?,
            consumed_fuel: req(self.consumed_fuel, "consumed_fuel")?,
            reserve_fuel: req(self.reserve_fuel, "reserve_fuel")?,
            taxi_fuel: req(self.taxi_fuel, "taxi_fuel")?,
            fixed_fuel: req(self.fixed_fuel, "fixed_fuel")?,
            zfw: req(self.zfw, "zfw")?,
            distance: req(self.distance, "distance")?,
        };
        rec.validate()?;
        Ok(rec)
    }

    fn from_record(r: &FlightRecord) -> Self {
        Row {
            flight_id: Some(r.flight_id.clone()),
            flight_number: Some(r.flight_number.clone()),
            origin: Some(r.origin.clone()),
            destination: Some(r.destination.clone()),
            aircraft_type: Some(r.aircraft_type.clone()),
            sched_dep: Some(format_time(r.sched_dep)),
            sched_arr: Some(format_time(r.sched_arr)),
            actual_dep: Some(format_time(r.actual_dep)),
            actual_arr: Some(format_time(r.actual_arr)),
            planned_flight_time: Some(r.planned_flight_time),
            fuel_loading_fps: Some(r.fuel_loading_fps),
            mission_fuel_fps: Some(r.mission_fuel_fps),
            consumed_fuel: Some(r.consumed_fuel),
            reserve_fuel: Some(r.reserve_fuel),
            taxi_fuel: Some(r.taxi_fuel),
            fixed_fuel: Some(r.fixed_fuel),
            zfw: Some(r.zfw),
            distance: Some(r.distance),
        }
    }
}

/// A row that was rejected while loading.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct DropReport {
    pub rows_in: usize,
    pub rows_out: usize,
    pub dropped: Vec<RowError>,
}

impl DropReport {
    pub fn rows_dropped(&self) -> usize {
        self.dropped.len()
    }
}

/// Reads a comma-delimited flight record table. Rows with a missing or
/// invalid field are dropped and listed in the report; records keep file order.
pub fn read_flight_records<R: Read>(reader: R) -> Result<(Vec<FlightRecord>, DropReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in FLIGHT_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::SchemaMismatch(col.to_string()));
        }
    }
    let mut records = Vec::new();
    let mut report = DropReport::default();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        report.rows_in += 1;
        match row.map_err(Error::from).and_then(Row::into_record) {
            Ok(rec) => records.push(rec),
            Err(e) => report.dropped.push(RowError {
                row: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    report.rows_out = records.len();
    if !report.dropped.is_empty() {
        log::info!(
            "dropped {} of {} flight rows with missing or invalid fields",
            report.rows_dropped(),
            report.rows_in
        );
    }
    Ok((records, report))
}

pub fn load_flight_records(path: &Path) -> Result<(Vec<FlightRecord>, DropReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_flight_records(std::io::BufReader::new(file))
}

pub fn write_flight_records<W: Write>(writer: W, records: &[FlightRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(Row::from_record(r))?;
    }
    wtr.flush().map_err(|e| Error::io("<flight records>", e))?;
    Ok(())
}

pub fn save_flight_records(path: &Path, records: &[FlightRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_flight_records(std::io::BufWriter::new(file), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "flight_id,flight_number,origin,destination,aircraft_type,sched_dep,sched_arr,actual_dep,actual_arr,planned_flight_time,fuel_loading_fps,mission_fuel_fps,consumed_fuel,reserve_fuel,taxi_fuel,fixed_fuel,zfw,distance";

    fn row(id: &str, actual_arr: &str) -> String {
        format!(
            "{id},CX100,VHHH,ZGGG,A320,2017-01-01T10:00:00Z,2017-01-01T11:00:00Z,2017-01-01T10:05:00Z,{actual_arr},55,9000,4000,4100,1500,200,2500,50000,150000"
        )
    }

    #[test]
    fn three_valid_rows() {
        let text = [HEADER.to_string(), row("a", "2017-01-01T11:02:00Z"), row("b", "2017-01-01T11:00:00Z"), row("c", "2017-01-01T11:10:00Z")].join("\n");
        let (recs, report) = read_flight_records(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(report.rows_dropped(), 0);
        assert_eq!(recs[0].actual_flight_time(), 57.0);
        assert_eq!(recs[2].arrival_delay(), 10.0);
    }

    #[test]
    fn missing_actual_arrival_is_dropped() {
        let text = [HEADER.to_string(), row("a", "2017-01-01T11:02:00Z"), row("b", ""), row("c", "2017-01-01T11:10:00Z")].join("\n");
        let (recs, report) = read_flight_records(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(report.rows_dropped(), 1);
        assert_eq!(report.dropped[0].row, 2);
        assert_eq!(report.rows_in, report.rows_out + report.rows_dropped());
        assert_eq!(recs[1].flight_id, "c");
    }

    #[test]
    fn invalid_values_are_dropped() {
        let bad_order = row("a", "2017-01-01T10:00:00Z");
        let negative = row("b", "2017-01-01T11:02:00Z").replace(",9000,", ",-9000,");
        let text = [HEADER.to_string(), bad_order, negative].join("\n");
        let (recs, report) = read_flight_records(text.as_bytes()).unwrap();
        assert!(recs.is_empty());
        assert_eq!(report.rows_dropped(), 2);
    }

    #[test]
    fn missing_column_is_schema_mismatch() {
        let header = HEADER.replace(",zfw", "");
        let err = read_flight_records(header.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch(c) if c == "zfw"));
    }

    #[test]
    fn write_then_read() {
        let text = [HEADER.to_string(), row("a", "2017-01-01T11:02:00Z")].join("\n");
        let (recs, _) = read_flight_records(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_flight_records(&mut buf, &recs).unwrap();
        let (back, _) = read_flight_records(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
    }
}
