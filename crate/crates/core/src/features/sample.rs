use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::delay::{floor_hour, DelayStateIndex, DelayStateWindow, ScheduleIndex};
use crate::features::network::NetworkIndex;
use crate::ingest::{FlightRecord, RawRow, TableSchema, WeatherArchive, WeatherObservation, N_WX};

/// Flight-information inputs before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightInfo {
    pub origin: String,
    pub destination: String,
    pub aircraft_type: String,
    /// minutes
    pub planned_flight_time: f64,
    /// minutes after midnight UTC
    pub sched_dep_minute: f64,
    pub sched_arr_minute: f64,
    pub hour_of_day: u32,
    /// 0 = Monday
    pub day_of_week: u32,
    pub month: u32,
    pub departure_demand: usize,
    pub arrival_demand: usize,
}

impl FlightInfo {
    pub fn schema() -> TableSchema {
        TableSchema::new(
            [
                "planned_flight_time",
                "sched_dep_minute",
                "sched_arr_minute",
                "departure_demand",
                "arrival_demand",
            ],
            ["origin", "destination", "aircraft_type", "hour_of_day", "day_of_week", "month"],
        )
    }

    pub fn raw_row(&self) -> RawRow {
        RawRow {
            numeric: vec![
                self.planned_flight_time,
                self.sched_dep_minute,
                self.sched_arr_minute,
                self.departure_demand as f64,
                self.arrival_demand as f64,
            ],
            categorical: vec![
                self.origin.clone(),
                self.destination.clone(),
                self.aircraft_type.clone(),
                self.hour_of_day.to_string(),
                self.day_of_week.to_string(),
                self.month.to_string(),
            ],
        }
    }
}

/// Everything known about one flight one hour before its scheduled departure.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSample {
    pub flight_id: String,
    pub flight_number: String,
    pub sched_dep: DateTime<Utc>,
    /// 0-based position of the flight's OD pair in the network index.
    pub od_index: usize,
    pub delay_window: DelayStateWindow,
    /// `[origin at prediction time, destination at scheduled arrival]`
    pub weather: [WeatherObservation; 2],
    pub flight_info: FlightInfo,
    /// actual enroute flight time, minutes
    pub target: f64,
    /// arrival delay, minutes
    pub fdt: f64,
}

impl AssembledSample {
    /// Numeric weather inputs: `2 * N_WX` values.
    pub fn weather_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * N_WX);
        v.extend_from_slice(&self.weather[0].to_vector());
        v.extend_from_slice(&self.weather[1].to_vector());
        v
    }

    pub fn planned_flight_time(&self) -> f64 {
        self.flight_info.planned_flight_time
    }

    pub fn aircraft_type(&self) -> &str {
        &self.flight_info.aircraft_type
    }
}

/// One hour before scheduled departure.
pub fn prediction_time(sched_dep: DateTime<Utc>) -> DateTime<Utc> {
    sched_dep - Duration::hours(1)
}

/// Last hour boundary at or before the prediction time; the delay window ends here.
pub fn window_anchor(sched_dep: DateTime<Utc>) -> DateTime<Utc> {
    floor_hour(prediction_time(sched_dep))
}

fn minute_of_day(t: DateTime<Utc>) -> f64 {
    f64::from(t.hour() * 60 + t.minute()) + f64::from(t.second()) / 60.0
}

/// Builds the model inputs for `flight` given an already-built delay window.
pub fn assemble_sample(
    flight: &FlightRecord,
    window: DelayStateWindow,
    weather: &WeatherArchive,
    schedule: &ScheduleIndex,
    index: &NetworkIndex,
) -> Result<AssembledSample> {
    let od_index = index.require_od(&flight.origin, &flight.destination)?;
    let predict_at = prediction_time(flight.sched_dep);
    let dep_wx = *weather.lookup(&flight.origin, predict_at)?;
    let arr_wx = *weather.lookup(&flight.destination, flight.sched_arr)?;
    let (departure_demand, _) = schedule.demand(&flight.origin, predict_at);
    let (_, arrival_demand) = schedule.demand(&flight.destination, predict_at);
    let t = flight.sched_dep;
    Ok(AssembledSample {
        flight_id: flight.flight_id.clone(),
        flight_number: flight.flight_number.clone(),
        sched_dep: flight.sched_dep,
        od_index,
        delay_window: window,
        weather: [dep_wx, arr_wx],
        flight_info: FlightInfo {
            origin: flight.origin.clone(),
            destination: flight.destination.clone(),
            aircraft_type: flight.aircraft_type.clone(),
            planned_flight_time: flight.planned_flight_time,
            sched_dep_minute: minute_of_day(flight.sched_dep),
            sched_arr_minute: minute_of_day(flight.sched_arr),
            hour_of_day: t.hour(),
            day_of_week: t.weekday().num_days_from_monday(),
            month: t.month(),
            departure_demand,
            arrival_demand,
        },
        target: flight.actual_flight_time(),
        fdt: flight.arrival_delay(),
    })
}

/// Why a flight did not become a sample.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssemblyReport {
    pub flights_in: usize,
    pub samples: usize,
    pub off_network: usize,
    pub insufficient_history: usize,
    pub missing_weather: usize,
}

/// Assembles samples for every flight on an indexed OD pair that has a full
/// window and weather at both ends. Output keeps flight order.
pub fn assemble_all(
    flights: &[FlightRecord],
    delays: &DelayStateIndex,
    weather: &WeatherArchive,
    index: &NetworkIndex,
    n_t: usize,
) -> (Vec<AssembledSample>, AssemblyReport) {
    let schedule = ScheduleIndex::build(flights);
    let mut report = AssemblyReport {
        flights_in: flights.len(),
        ..Default::default()
    };
    let mut samples = Vec::new();
    for f in flights {
        if index.od_index(&f.origin, &f.destination).is_none() {
            report.off_network += 1;
            continue;
        }
        let window = match delays.window(window_anchor(f.sched_dep), n_t) {
            Ok(w) => w,
            Err(_) => {
                report.insufficient_history += 1;
                continue;
            }
        };
        match assemble_sample(f, window, weather, &schedule, index) {
            Ok(s) => samples.push(s),
            Err(crate::Error::MissingWeather { .. }) => report.missing_weather += 1,
            Err(e) => {
                log::warn!("skipping {}: {e}", f.flight_id);
                report.off_network += 1;
            }
        }
    }
    report.samples = samples.len();
    (samples, report)
}
