//! Sample files: one comma-delimited file per split.
//!
//! ```text
//! # swrnn-samples format_version=1 index_hash=<hex> n_t=24 n_od=549 n_ap=53
//! flight_id,flight_number,sched_dep,od_index,subset,target,fdt,origin,...,wx_dep,wx_arr,window
//! ```
//!
//! `wx_dep`/`wx_arr` hold `dir speed gust cloud height visibility vmc`
//! separated by spaces (`dir` is `VRB` for variable wind). `window` holds
//! the `n_t x (n_od + 2 n_ap)` delay states row by row, most recent hour
//! first, each row laid out `[od | arr | dep]`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::delay::DelayStateWindow;
use crate::features::sample::{window_anchor, AssembledSample, FlightInfo};
use crate::ingest::metar::{CloudCover, WeatherObservation, WindDirection};
use crate::ingest::records::{format_time, parse_time};
use crate::training::Subset;

pub const SAMPLES_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "swrnn-samples";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub index_hash: String,
    pub n_t: usize,
    pub n_od: usize,
    pub n_ap: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub sample: AssembledSample,
    pub subset: Subset,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    flight_id: String,
    flight_number: String,
    sched_dep: String,
    od_index: usize,
    subset: Subset,
    target: f64,
    fdt: f64,
    origin: String,
    destination: String,
    aircraft_type: String,
    planned_flight_time: f64,
    sched_dep_minute: f64,
    sched_arr_minute: f64,
    hour_of_day: u32,
    day_of_week: u32,
    month: u32,
    departure_demand: usize,
    arrival_demand: usize,
    wx_dep: String,
    wx_arr: String,
    window: String,
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&v.to_string());
    }
    s
}

fn weather_field(w: &WeatherObservation) -> String {
    let dir = match w.wind_direction {
        WindDirection::Degrees(d) => d.to_string(),
        WindDirection::Variable => "VRB".to_string(),
    };
    format!(
        "{dir} {} {} {} {} {} {}",
        w.wind_speed,
        w.wind_gust,
        w.cloud_type.code(),
        w.cloud_height,
        w.visibility,
        u8::from(w.vmc)
    )
}

fn parse_weather_field(s: &str) -> Result<WeatherObservation> {
    let bad = || Error::InvalidRecord(format!("weather field `{s}`"));
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != 7 {
        return Err(bad());
    }
    let num = |p: &str| p.parse::<f64>().map_err(|_| bad());
    Ok(WeatherObservation {
        wind_direction: if parts[0] == "VRB" {
            WindDirection::Variable
        } else {
            WindDirection::Degrees(num(parts[0])?)
        },
        wind_speed: num(parts[1])?,
        wind_gust: num(parts[2])?,
        cloud_type: CloudCover::from_code(parts[3]).ok_or_else(bad)?,
        cloud_height: num(parts[4])?,
        visibility: num(parts[5])?,
        vmc: match parts[6] {
            "1" => true,
            "0" => false,
            _ => return Err(bad()),
        },
    })
}

impl SampleRow {
    fn from_sample(l: &LabeledSample) -> Self {
        let s = &l.sample;
        let fi = &s.flight_info;
        SampleRow {
            flight_id: s.flight_id.clone(),
            flight_number: s.flight_number.clone(),
            sched_dep: format_time(s.sched_dep),
            od_index: s.od_index,
            subset: l.subset,
            target: s.target,
            fdt: s.fdt,
            origin: fi.origin.clone(),
            destination: fi.destination.clone(),
            aircraft_type: fi.aircraft_type.clone(),
            planned_flight_time: fi.planned_flight_time,
            sched_dep_minute: fi.sched_dep_minute,
            sched_arr_minute: fi.sched_arr_minute,
            hour_of_day: fi.hour_of_day,
            day_of_week: fi.day_of_week,
            month: fi.month,
            departure_demand: fi.departure_demand,
            arrival_demand: fi.arrival_demand,
            wx_dep: weather_field(&s.weather[0]),
            wx_arr: weather_field(&s.weather[1]),
            window: join(s.delay_window.flatten()),
        }
    }

    fn into_sample(self, header: &DatasetHeader) -> Result<LabeledSample> {
        let sched_dep = parse_time(&self.sched_dep)?;
        let flat = self
            .window
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| Error::InvalidRecord(format!("window value `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        let window = DelayStateWindow::from_flat(window_anchor(sched_dep), header.n_t, header.n_od, header.n_ap, &flat)?;
        if self.od_index >= header.n_od {
            return Err(Error::InvalidRecord(format!("od_index {} out of range", self.od_index)));
        }
        Ok(LabeledSample {
            subset: self.subset,
            sample: AssembledSample {
                flight_id: self.flight_id,
                flight_number: self.flight_number,
                sched_dep,
                od_index: self.od_index,
                delay_window: window,
                weather: [parse_weather_field(&self.wx_dep)?, parse_weather_field(&self.wx_arr)?],
                flight_info: FlightInfo {
                    origin: self.origin,
                    destination: self.destination,
                    aircraft_type: self.aircraft_type,
                    planned_flight_time: self.planned_flight_time,
                    sched_dep_minute: self.sched_dep_minute,
                    sched_arr_minute: self.sched_arr_minute,
                    hour_of_day: self.hour_of_day,
                    day_of_week: self.day_of_week,
                    month: self.month,
                    departure_demand: self.departure_demand,
                    arrival_demand: self.arrival_demand,
                },
                target: self.target,
                fdt: self.fdt,
            },
        })
    }
}

pub fn write_samples<W: Write>(mut out: W, header: &DatasetHeader, samples: &[LabeledSample]) -> Result<()> {
    writeln!(
        out,
        "# {MAGIC} format_version={} index_hash={} n_t={} n_od={} n_ap={}",
        header.format_version, header.index_hash, header.n_t, header.n_od, header.n_ap
    )
    .map_err(|e| Error::io("<samples>", e))?;
    let mut wtr = csv::Writer::from_writer(out);
    for s in samples {
        let w = &s.sample.delay_window;
        if (w.n_t(), w.n_od(), w.n_ap()) != (header.n_t, header.n_od, header.n_ap) {
            return Err(Error::ShapeMismatch {
                op: "write_samples",
                left: (header.n_t, header.n_od + 2 * header.n_ap),
                right: (w.n_t(), w.row_width()),
            });
        }
        wtr.serialize(SampleRow::from_sample(s))?;
    }
    wtr.flush().map_err(|e| Error::io("<samples>", e))?;
    Ok(())
}

fn parse_header(line: &str) -> Result<DatasetHeader> {
    let bad = || Error::InvalidRecord(format!("bad samples header `{line}`"));
    let mut parts = line.trim_start_matches('#').split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(bad());
    }
    let mut header = DatasetHeader {
        format_version: 0,
        index_hash: String::new(),
        n_t: 0,
        n_od: 0,
        n_ap: 0,
    };
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(bad)?;
        match k {
            "format_version" => header.format_version = v.parse().map_err(|_| bad())?,
            "index_hash" => header.index_hash = v.to_string(),
            "n_t" => header.n_t = v.parse().map_err(|_| bad())?,
            "n_od" => header.n_od = v.parse().map_err(|_| bad())?,
            "n_ap" => header.n_ap = v.parse().map_err(|_| bad())?,
            _ => {}
        }
    }
    if header.format_version != SAMPLES_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: SAMPLES_FORMAT_VERSION,
            found: header.format_version,
        });
    }
    Ok(header)
}

pub fn read_samples<R: std::io::Read>(input: R) -> Result<(DatasetHeader, Vec<LabeledSample>)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io("<samples>", e))?;
    let header = parse_header(first.trim())?;
    let mut rdr = csv::Reader::from_reader(reader);
    let samples = rdr
        .deserialize::<SampleRow>()
        .map(|r| r.map_err(Error::from).and_then(|r| r.into_sample(&header)))
        .collect::<Result<Vec<_>>>()?;
    Ok((header, samples))
}

pub fn save_samples(path: &Path, header: &DatasetHeader, samples: &[LabeledSample]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_samples(std::io::BufWriter::new(file), header, samples)
}

pub fn load_samples(path: &Path) -> Result<(DatasetHeader, Vec<LabeledSample>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_samples(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weather_field_round_trip() {
        let w = WeatherObservation {
            wind_direction: WindDirection::Variable,
            wind_speed: 3.0,
            wind_gust: 0.0,
            cloud_type: CloudCover::Scattered,
            cloud_height: 2800.0,
            visibility: 8000.0,
            vmc: true,
        };
        assert_eq!(parse_weather_field(&weather_field(&w)).unwrap(), w);
        assert!(parse_weather_field("1 2 3").is_err());
    }

    #[test]
    fn header_version_is_checked() {
        assert!(parse_header("# swrnn-samples format_version=1 index_hash=ab n_t=2 n_od=3 n_ap=2").is_ok());
        assert!(matches!(
            parse_header("# swrnn-samples format_version=7 index_hash=ab n_t=2 n_od=3 n_ap=2"),
            Err(Error::VersionMismatch { .. })
        ));
        assert!(parse_header("# other").is_err());
    }
}
