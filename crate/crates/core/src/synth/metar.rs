//! METAR text for a given weather severity.

use chrono::{DateTime, Datelike, Timelike, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::ingest::records::format_time;

/// One archive line: RFC3339 issue time, then the report.
///
/// Severity 0 gives good visibility and few clouds, 1 reduced visibility
/// under a broken layer, 2 low visibility, gusts and an overcast deck.
pub fn render(station: &str, t: DateTime<Utc>, severity: u8, rng: &mut ChaCha8Rng) -> String {
    let (speed_range, vis, cloud): ((u32, u32), String, String) = match severity {
        0 => {
            let cloud = if rng.random_bool(0.4) {
                "NSC".to_string()
            } else {
                format!("FEW{:03} SCT{:03}", rng.random_range(20..40), rng.random_range(40..60))
            };
            ((0, 12), "9999".into(), cloud)
        }
        1 => (
            (8, 20),
            format!("{}", rng.random_range(40..90) * 100),
            format!("SCT{:03} BKN{:03}", rng.random_range(8..15), rng.random_range(15..30)),
        ),
        _ => (
            (18, 35),
            format!("{:04}", rng.random_range(6..30) * 100),
            format!("BKN{:03} OVC{:03}", rng.random_range(2..5), rng.random_range(5..9)),
        ),
    };
    let speed = rng.random_range(speed_range.0..=speed_range.1);
    let wind = if speed <= 3 && rng.random_bool(0.5) {
        format!("VRB{speed:02}KT")
    } else {
        let dir = if speed == 0 { 0 } else { rng.random_range(1..=36) * 10 };
        if severity > 0 && rng.random_bool(0.5) {
            format!("{dir:03}{speed:02}G{:02}KT", speed + rng.random_range(8..16))
        } else {
            format!("{dir:03}{speed:02}KT")
        }
    };
    let temp: i32 = rng.random_range(5..32);
    let dew = temp - rng.random_range(1..10);
    let qnh = 1013 + rng.random_range(-12..12) - 4 * i32::from(severity);
    format!(
        "{} METAR {station} {:02}{:02}{:02}Z {wind} {vis} {cloud} {temp:02}/{} Q{qnh:04}=",
        format_time(t),
        t.day(),
        t.hour(),
        t.minute(),
        if dew < 0 { format!("M{:02}", -dew) } else { format!("{dew:02}") },
    )
}
