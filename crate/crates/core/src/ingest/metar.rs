//! METAR decoding into the seven weather variables used by the model.
//!
//! Only the groups that feed [`WeatherObservation`] are interpreted: wind,
//! prevailing visibility (or `CAVOK`) and cloud layers. Temperature, QNH and
//! present-weather groups are recognised and ignored. Trend (`NOSIG`,
//! `BECMG`, `TEMPO`) and `RMK` sections end the decode. Anything else is
//! reported back as a skipped token.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Height recorded when no cloud layer is reported.
pub const NO_CLOUD_HEIGHT_FT: f64 = 99_999.0;
/// Visibility code for "10 km or more".
pub const MAX_VISIBILITY_M: f64 = 9_999.0;
/// Width of [`WeatherObservation::to_vector`].
pub const N_WX: usize = 12;

const KNOTS_PER_MPS: f64 = 1.943_844_492_440_6;
const KNOTS_PER_KMH: f64 = 0.539_956_803_455_7;

/// One undecoded report as it appears in an archive line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawMetar {
    pub station: String,
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
    pub body: String,
}

impl RawMetar {
    /// Splits station and issue time out of a report body.
    pub fn from_body(body: &str) -> Result<Self> {
        let body = body.trim();
        if body.is_empty() {
            return Err(malformed(body, "empty report"));
        }
        let mut tokens = body.trim_end_matches('=').split_whitespace().peekable();
        if matches!(tokens.peek(), Some(&"METAR") | Some(&"SPECI")) {
            tokens.next();
        }
        let station = tokens
            .next()
            .filter(|s| is_icao(s))
            .ok_or_else(|| malformed(body, "missing station identifier"))?;
        let time = tokens
            .next()
            .ok_or_else(|| malformed(body, "missing issue time"))?;
        let (day, hour, minute) =
            parse_issue_time(time).ok_or_else(|| malformed(body, "bad issue time group"))?;
        Ok(RawMetar {
            station: station.to_string(),
            day,
            hour,
            minute,
            body: body.to_string(),
        })
    }
}

pub fn is_icao(code: &str) -> bool {
    code.len() == 4 && code.bytes().all(|b| b.is_ascii_uppercase())
}

fn parse_issue_time(tok: &str) -> Option<(u32, u32, u32)> {
    let digits = tok.strip_suffix('Z')?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let day: u32 = digits[0..2].parse().ok()?;
    let hour: u32 = digits[2..4].parse().ok()?;
    let minute: u32 = digits[4..6].parse().ok()?;
    if !(1..=31).contains(&day) || hour > 23 || minute > 59 {
        return None;
    }
    Some((day, hour, minute))
}

fn malformed(body: &str, reason: &str) -> Error {
    Error::MalformedMetar {
        body: body.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CloudCover {
    None,
    Few,
    Scattered,
    Broken,
    Overcast,
}

impl CloudCover {
    pub const ALL: [CloudCover; 5] = [
        CloudCover::None,
        CloudCover::Few,
        CloudCover::Scattered,
        CloudCover::Broken,
        CloudCover::Overcast,
    ];

    pub fn code(self) -> &'static str {
        match self {
            CloudCover::None => "NONE",
            CloudCover::Few => "FEW",
            CloudCover::Scattered => "SCT",
            CloudCover::Broken => "BKN",
            CloudCover::Overcast => "OVC",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        CloudCover::ALL.into_iter().find(|c| c.code() == code)
    }

    /// Broken, overcast and obscured layers form a ceiling.
    pub fn forms_ceiling(self) -> bool {
        matches!(self, CloudCover::Broken | CloudCover::Overcast)
    }
}

impl fmt::Display for CloudCover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindDirection {
    Degrees(f64),
    Variable,
}

/// Decoded weather at one airport and time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherObservation {
    pub wind_direction: WindDirection,
    /// knots
    pub wind_speed: f64,
    /// knots, 0 when no gust is reported
    pub wind_gust: f64,
    pub cloud_type: CloudCover,
    /// feet above aerodrome level of the lowest layer
    pub cloud_height: f64,
    /// meters, capped at 9999
    pub visibility: f64,
    pub vmc: bool,
}

impl WeatherObservation {
    /// Column names of [`Self::to_vector`], in order.
    pub const FIELD_NAMES: [&'static str; N_WX] = [
        "wind_dir",
        "wind_vrb",
        "wind_speed",
        "wind_gust",
        "cloud_none",
        "cloud_few",
        "cloud_sct",
        "cloud_bkn",
        "cloud_ovc",
        "cloud_height",
        "visibility",
        "vmc",
    ];

    /// Fixed-width numeric form. Variable wind sets `wind_vrb` to 1 and the
    /// direction to 0; cloud coverage is one-hot.
    pub fn to_vector(&self) -> [f64; N_WX] {
        let (dir, vrb) = match self.wind_direction {
            WindDirection::Degrees(d) => (d, 0.0),
            WindDirection::Variable => (0.0, 1.0),
        };
        let mut v = [0.0; N_WX];
        v[0] = dir;
        v[1] = vrb;
        v[2] = self.wind_speed;
        v[3] = self.wind_gust;
        v[4 + self.cloud_type as usize] = 1.0;
        v[9] = self.cloud_height;
        v[10] = self.visibility;
        v[11] = if self.vmc { 1.0 } else { 0.0 };
        v
    }

    pub fn wind_direction_degrees(&self) -> Option<f64> {
        match self.wind_direction {
            WindDirection::Degrees(d) => Some(d),
            WindDirection::Variable => None,
        }
    }
}

/// Visibility and ceiling minima for visual meteorological conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VmcMinima {
    pub visibility_m: f64,
    pub ceiling_ft: f64,
}

impl Default for VmcMinima {
    fn default() -> Self {
        VmcMinima {
            visibility_m: 5000.0,
            ceiling_ft: 1500.0,
        }
    }
}

impl VmcMinima {
    /// `ceiling_ft = None` means no broken or overcast layer.
    pub fn is_vmc(&self, visibility_m: f64, ceiling_ft: Option<f64>) -> bool {
        visibility_m >= self.visibility_m && ceiling_ft.is_none_or(|c| c >= self.ceiling_ft)
    }
}

/// VMC test with the default minima (5000 m, 1500 ft, both inclusive).
pub fn vmc_rule(visibility_m: f64, ceiling_ft: Option<f64>) -> bool {
    VmcMinima::default().is_vmc(visibility_m, ceiling_ft)
}

/// Result of decoding one report, including groups that were not understood.
#[derive(Debug, Clone, PartialEq)]
pub struct MetarDecode {
    pub observation: WeatherObservation,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MetarParser {
    pub minima: VmcMinima,
}

#[derive(Debug, Clone, Copy)]
struct CloudLayer {
    cover: CloudCover,
    height_ft: f64,
}

impl MetarParser {
    pub fn new(minima: VmcMinima) -> Self {
        MetarParser { minima }
    }

    pub fn parse(&self, raw: &RawMetar) -> Result<WeatherObservation> {
        self.decode(raw).map(|d| d.observation)
    }

    pub fn decode(&self, raw: &RawMetar) -> Result<MetarDecode> {
        let body = raw.body.as_str();
        let mut tokens = body
            .trim()
            .trim_end_matches('=')
            .split_whitespace()
            .peekable();
        if matches!(tokens.peek(), Some(&"METAR") | Some(&"SPECI")) {
            tokens.next();
        }
        // station and time are validated by RawMetar::from_body
        let station = tokens.next().ok_or_else(|| malformed(body, "missing station"))?;
        if station != raw.station {
            return Err(malformed(body, "station does not match header"));
        }
        tokens.next();
        while let Some(&t) = tokens.peek() {
            if matches!(t, "AUTO" | "COR" | "CCA" | "CCB") {
                tokens.next();
            } else {
                break;
            }
        }
        if tokens.peek() == Some(&"NIL") {
            return Err(malformed(body, "NIL report"));
        }

        let wind_tok = tokens.next().ok_or_else(|| malformed(body, "missing wind group"))?;
        let (wind_direction, wind_speed, wind_gust) =
            parse_wind(wind_tok).ok_or_else(|| malformed(body, "bad wind group"))?;
        if let Some(&t) = tokens.peek() {
            if is_wind_variation(t) {
                tokens.next();
            }
        }

        let vis_tok = tokens
            .next()
            .ok_or_else(|| malformed(body, "missing visibility group"))?;
        let (visibility, cavok) = if vis_tok == "CAVOK" {
            (MAX_VISIBILITY_M, true)
        } else {
            let v = parse_visibility(vis_tok).ok_or_else(|| malformed(body, "bad visibility group"))?;
            (v, false)
        };

        let mut layers = Vec::new();
        let mut skipped = Vec::new();
        for tok in tokens {
            if matches!(tok, "NOSIG" | "BECMG" | "TEMPO" | "RMK") {
                break;
            }
            if let Some(layer) = parse_cloud(tok) {
                layers.push(layer);
            } else if matches!(tok, "NSC" | "SKC" | "CLR" | "NCD")
                || is_minimum_visibility(tok)
                || is_rvr(tok)
                || is_temperature(tok)
                || is_pressure(tok)
                || is_present_weather(tok)
                || tok.starts_with("WS")
                || tok.starts_with("RE")
            {
                continue;
            } else {
                log::warn!("skipping unknown METAR group `{tok}` in {}", raw.station);
                skipped.push(tok.to_string());
            }
        }
        if cavok {
            layers.clear();
        }

        let lowest = layers
            .iter()
            .copied()
            .min_by(|a, b| a.height_ft.total_cmp(&b.height_ft));
        let (cloud_type, cloud_height) = match lowest {
            Some(l) => (l.cover, l.height_ft),
            None => (CloudCover::None, NO_CLOUD_HEIGHT_FT),
        };
        let ceiling = layers
            .iter()
            .filter(|l| l.cover.forms_ceiling())
            .map(|l| l.height_ft)
            .min_by(f64::total_cmp);

        Ok(MetarDecode {
            observation: WeatherObservation {
                wind_direction,
                wind_speed,
                wind_gust,
                cloud_type,
                cloud_height,
                visibility,
                vmc: self.minima.is_vmc(visibility, ceiling),
            },
            skipped,
        })
    }
}

/// Decodes with the default VMC minima.
pub fn parse_metar(raw: &RawMetar) -> Result<WeatherObservation> {
    MetarParser::default().parse(raw)
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn parse_wind(tok: &str) -> Option<(WindDirection, f64, f64)> {
    let (body, factor) = if let Some(b) = tok.strip_suffix("KT") {
        (b, 1.0)
    } else if let Some(b) = tok.strip_suffix("MPS") {
        (b, KNOTS_PER_MPS)
    } else if let Some(b) = tok.strip_suffix("KMH") {
        (b, KNOTS_PER_KMH)
    } else {
        return None;
    };
    if body.len() < 5 {
        return None;
    }
    let (dir_s, rest) = body.split_at(3);
    let direction = if dir_s == "VRB" {
        WindDirection::Variable
    } else if all_digits(dir_s) {
        let d: f64 = dir_s.parse().ok()?;
        if d > 360.0 {
            return None;
        }
        WindDirection::Degrees(if d == 360.0 { 0.0 } else { d })
    } else {
        return None;
    };
    let (speed_s, gust_s) = match rest.split_once('G') {
        Some((s, g)) => (s, Some(g)),
        None => (rest, None),
    };
    if !(2..=3).contains(&speed_s.len()) || !all_digits(speed_s) {
        return None;
    }
    let speed = speed_s.parse::<f64>().ok()? * factor;
    let gust = match gust_s {
        Some(g) if (2..=3).contains(&g.len()) && all_digits(g) => g.parse::<f64>().ok()? * factor,
        Some(_) => return None,
        None => 0.0,
    };
    if gust > 0.0 && gust < speed {
        return None;
    }
    Some((direction, speed, gust))
}

fn is_wind_variation(tok: &str) -> bool {
    tok.len() == 7 && tok.as_bytes()[3] == b'V' && all_digits(&tok[..3]) && all_digits(&tok[4..])
}

fn parse_visibility(tok: &str) -> Option<f64> {
    if tok.len() == 4 && all_digits(tok) {
        let v: f64 = tok.parse().ok()?;
        return Some(v.min(MAX_VISIBILITY_M));
    }
    // statute miles: whole values only ("10SM", "P6SM")
    let sm = tok.strip_suffix("SM")?;
    let sm = sm.strip_prefix('P').unwrap_or(sm);
    if all_digits(sm) {
        let miles: f64 = sm.parse().ok()?;
        return Some((miles * 1609.344).min(MAX_VISIBILITY_M));
    }
    None
}

fn parse_cloud(tok: &str) -> Option<CloudLayer> {
    let (cover, rest) = if let Some(r) = tok.strip_prefix("VV") {
        (CloudCover::Overcast, r)
    } else if tok.len() >= 6 {
        (CloudCover::from_code(&tok[..3])?, &tok[3..])
    } else {
        return None;
    };
    if cover == CloudCover::None || rest.len() < 3 {
        return None;
    }
    let (h, suffix) = rest.split_at(3);
    if !all_digits(h) || !(suffix.is_empty() || suffix == "CB" || suffix == "TCU" || suffix == "///") {
        return None;
    }
    let hundreds: f64 = h.parse().ok()?;
    Some(CloudLayer {
        cover,
        height_ft: hundreds * 100.0,
    })
}

fn is_minimum_visibility(tok: &str) -> bool {
    tok.len() > 4
        && all_digits(&tok[..4])
        && matches!(&tok[4..], "N" | "NE" | "E" | "SE" | "S" | "SW" | "W" | "NW" | "NDV")
}

fn is_rvr(tok: &str) -> bool {
    tok.starts_with('R') && tok.contains('/') && tok[1..].starts_with(|c: char| c.is_ascii_digit())
}

fn is_temperature(tok: &str) -> bool {
    let Some((t, d)) = tok.split_once('/') else {
        return false;
    };
    let ok = |s: &str| {
        let s = s.strip_prefix('M').unwrap_or(s);
        s.len() == 2 && all_digits(s)
    };
    ok(t) && (ok(d) || d == "//")
}

fn is_pressure(tok: &str) -> bool {
    (tok.starts_with('Q') || tok.starts_with('A')) && tok.len() == 5 && all_digits(&tok[1..])
}

fn is_present_weather(tok: &str) -> bool {
    const CODES: [&str; 31] = [
        "MI", "BC", "PR", "DR", "BL", "SH", "TS", "FZ", "DZ", "RA", "SN", "SG", "IC", "PL", "GR",
        "GS", "UP", "BR", "FG", "FU", "VA", "DU", "SA", "HZ", "PY", "PO", "SQ", "FC", "SS", "DS",
        "VC",
    ];
    let s = tok.trim_start_matches(['-', '+']);
    !s.is_empty()
        && s.len() % 2 == 0
        && s.as_bytes()
            .chunks(2)
            .all(|c| CODES.contains(&std::str::from_utf8(c).unwrap_or("")))
}

/// Decoded reports keyed by station, ordered by issue time.
#[derive(Debug, Clone, Default)]
pub struct WeatherArchive {
    by_station: BTreeMap<String, Vec<(DateTime<Utc>, WeatherObservation)>>,
}

impl WeatherArchive {
    pub fn insert(&mut self, station: &str, issued: DateTime<Utc>, obs: WeatherObservation) {
        let series = self.by_station.entry(station.to_string()).or_default();
        let pos = series.partition_point(|(t, _)| *t <= issued);
        series.insert(pos, (issued, obs));
    }

    /// Latest observation issued at or before `time`.
    pub fn at_or_before(&self, station: &str, time: DateTime<Utc>) -> Option<&WeatherObservation> {
        let series = self.by_station.get(station)?;
        let pos = series.partition_point(|(t, _)| *t <= time);
        pos.checked_sub(1).map(|i| &series[i].1)
    }

    pub fn lookup(&self, station: &str, time: DateTime<Utc>) -> Result<&WeatherObservation> {
        self.at_or_before(station, time)
            .ok_or_else(|| Error::MissingWeather {
                station: station.to_string(),
                time: time.to_rfc3339(),
            })
    }

    pub fn len(&self) -> usize {
        self.by_station.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stations(&self) -> impl Iterator<Item = &str> {
        self.by_station.keys().map(String::as_str)
    }
}

/// One successfully decoded archive line.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedReport {
    pub issued: DateTime<Utc>,
    pub station: String,
    pub observation: WeatherObservation,
}

#[derive(Debug, Clone, Default)]
pub struct MetarLoadReport {
    pub lines: usize,
    pub decoded: Vec<DecodedReport>,
    pub malformed: usize,
    pub skipped_tokens: usize,
}

impl MetarLoadReport {
    pub fn archive(&self) -> WeatherArchive {
        let mut archive = WeatherArchive::default();
        for r in &self.decoded {
            archive.insert(&r.station, r.issued, r.observation);
        }
        archive
    }
}

/// Decodes an archive with one report per line.
///
/// A line may start with an RFC 3339 timestamp (`2017-01-01T00:00:00Z METAR
/// ...`), which fixes year and month. Without it, `reference` supplies the
/// year and month of the first report; the month advances whenever the
/// day-of-month goes backwards.
pub fn parse_metar_lines(
    text: &str,
    parser: &MetarParser,
    reference: Option<(i32, u32)>,
) -> MetarLoadReport {
    let mut report = MetarLoadReport::default();
    let mut cursor = reference;
    let mut last_day = 0u32;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        report.lines += 1;
        let (stamp, body) = match line.split_once(char::is_whitespace) {
            Some((first, rest)) if first.contains('T') && first.ends_with('Z') => {
                match DateTime::parse_from_rfc3339(first) {
                    Ok(t) => (Some(t.with_timezone(&Utc)), rest.trim()),
                    Err(_) => (None, line),
                }
            }
            _ => (None, line),
        };
        let decoded = RawMetar::from_body(body).and_then(|raw| {
            let issued = match stamp {
                Some(t) => t,
                None => {
                    let (y, m) = cursor.ok_or_else(|| {
                        malformed(body, "no timestamp prefix and no reference month")
                    })?;
                    let (y, m) = if raw.day < last_day { next_month(y, m) } else { (y, m) };
                    cursor = Some((y, m));
                    last_day = raw.day;
                    NaiveDate::from_ymd_opt(y, m, raw.day)
                        .and_then(|d| d.and_hms_opt(raw.hour, raw.minute, 0))
                        .map(|dt| Utc.from_utc_datetime(&dt))
                        .ok_or_else(|| malformed(body, "issue day outside month"))?
                }
            };
            if stamp.is_some() {
                if issued.day() != raw.day {
                    return Err(malformed(body, "timestamp prefix disagrees with issue day"));
                }
                // bare lines that follow continue from this report's month
                cursor = Some((issued.year(), issued.month()));
                last_day = raw.day;
            }
            let d = parser.decode(&raw)?;
            Ok((raw.station, issued, d))
        });
        match decoded {
            Ok((station, issued, d)) => {
                report.skipped_tokens += d.skipped.len();
                report.decoded.push(DecodedReport {
                    issued,
                    station,
                    observation: d.observation,
                });
            }
            Err(e) => {
                log::warn!("{e}");
                report.malformed += 1;
            }
        }
    }
    report
}

fn next_month(y: i32, m: u32) -> (i32, u32) {
    if m == 12 {
        (y + 1, 1)
    } else {
        (y, m + 1)
    }
}

pub fn load_metar_file(
    path: &Path,
    parser: &MetarParser,
    reference: Option<(i32, u32)>,
) -> Result<MetarLoadReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_metar_lines(&text, parser, reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(body: &str) -> WeatherObservation {
        parse_metar(&RawMetar::from_body(body).unwrap()).unwrap()
    }

    #[test]
    fn fig7_report() {
        let obs = decode("METAR VHHH 010000Z 08011KT 9999 FEW022 SCT028 20/14 Q1022 NOSIG=");
        assert_eq!(obs.wind_direction, WindDirection::Degrees(80.0));
        assert_eq!(obs.wind_speed, 11.0);
        assert_eq!(obs.wind_gust, 0.0);
        assert_eq!(obs.cloud_type, CloudCover::Few);
        assert_eq!(obs.cloud_height, 2200.0);
        assert_eq!(obs.visibility, 9999.0);
        assert!(obs.vmc);
    }

    #[test]
    fn calm_no_cloud() {
        let obs = decode("METAR XXXX 010000Z 00000KT 9999 NSC 15/10 Q1013=");
        assert_eq!(obs.wind_direction, WindDirection::Degrees(0.0));
        assert_eq!((obs.wind_speed, obs.wind_gust), (0.0, 0.0));
        assert_eq!(obs.cloud_type, CloudCover::None);
        assert_eq!(obs.cloud_height, NO_CLOUD_HEIGHT_FT);
        assert_eq!(obs.visibility, 9999.0);
        assert!(obs.vmc);
    }

    #[test]
    fn gusty_low_overcast() {
        // 240 deg at 15 kt gusting 25; 3000 m; overcast 400 ft -> IMC
        let obs = decode("METAR XXXX 010000Z 24015G25KT 3000 OVC004 08/07 Q0998=");
        assert_eq!(obs.wind_direction, WindDirection::Degrees(240.0));
        assert_eq!((obs.wind_speed, obs.wind_gust), (15.0, 25.0));
        assert_eq!(obs.cloud_type, CloudCover::Overcast);
        assert_eq!(obs.cloud_height, 400.0);
        assert_eq!(obs.visibility, 3000.0);
        assert!(!obs.vmc);
    }

    #[test]
    fn vmc_boundaries() {
        assert!(vmc_rule(9999.0, None));
        assert!(!vmc_rule(3000.0, Some(400.0)));
        assert!(vmc_rule(5000.0, Some(1500.0)));
        assert!(!vmc_rule(4999.0, Some(1500.0)));
        assert!(!vmc_rule(5000.0, Some(1400.0)));
    }

    #[test]
    fn few_and_scattered_do_not_set_ceiling() {
        let obs = decode("METAR XXXX 010000Z 08011KT 9999 FEW005 SCT008=");
        assert!(obs.vmc);
        let obs = decode("METAR XXXX 010000Z 08011KT 9999 FEW030 BKN012=");
        assert_eq!(obs.cloud_type, CloudCover::Broken);
        assert!(!obs.vmc);
    }

    #[test]
    fn cavok_and_variable_wind() {
        let obs = decode("METAR ZGGG 011230Z VRB03KT CAVOK 25/18 Q1010");
        assert_eq!(obs.wind_direction, WindDirection::Variable);
        assert_eq!(obs.to_vector()[1], 1.0);
        assert_eq!(obs.visibility, MAX_VISIBILITY_M);
        assert_eq!(obs.cloud_type, CloudCover::None);
        assert!(obs.vmc);
    }

    #[test]
    fn mps_wind_and_weather_groups() {
        let obs = decode("METAR UUEE 011200Z 27005MPS 240V300 6000 -SHRA BKN020CB 10/08 Q1008 RMK QBB");
        assert!((obs.wind_speed - 5.0 * KNOTS_PER_MPS).abs() < 1e-12);
        assert_eq!(obs.cloud_type, CloudCover::Broken);
        assert_eq!(obs.cloud_height, 2000.0);
    }

    #[test]
    fn unknown_groups_are_skipped() {
        let raw = RawMetar::from_body("METAR VHHH 010000Z 08011KT 9999 FEW022 ZZTOP 20/14 Q1022").unwrap();
        let d = MetarParser::default().decode(&raw).unwrap();
        assert_eq!(d.skipped, vec!["ZZTOP".to_string()]);
        assert_eq!(d.observation.cloud_height, 2200.0);
    }

    #[test]
    fn malformed_reports() {
        for body in [
            "",
            "METAR vhhh 010000Z 08011KT 9999",
            "METAR VHHH 010000 08011KT 9999",
            "METAR VHHH 010000Z 9999 FEW022",
            "METAR VHHH 010000Z 08011KT FEW022",
            "METAR VHHH 010000Z 08025G15KT 9999",
            "METAR VHHH 010000Z 40011KT 9999",
            "METAR VHHH 010000Z NIL",
        ] {
            let res = RawMetar::from_body(body).and_then(|r| parse_metar(&r));
            assert!(matches!(res, Err(Error::MalformedMetar { .. })), "{body}");
        }
    }

    #[test]
    fn archive_lookup_is_at_or_before() {
        let text = "2017-01-01T00:00:00Z METAR VHHH 010000Z 08011KT 9999 FEW022=\n\
                    2017-01-01T01:00:00Z METAR VHHH 010100Z 08011KT 3000 OVC004=\n\
                    garbage line\n";
        let load = parse_metar_lines(text, &MetarParser::default(), None);
        assert_eq!(load.lines, 3);
        assert_eq!(load.malformed, 1);
        let archive = load.archive();
        let t = |h, m| Utc.with_ymd_and_hms(2017, 1, 1, h, m, 0).unwrap();
        assert!(archive.at_or_before("VHHH", t(0, 59)).unwrap().vmc);
        assert!(!archive.at_or_before("VHHH", t(1, 0)).unwrap().vmc);
        assert!(archive.at_or_before("VHHH", Utc.with_ymd_and_hms(2016, 12, 31, 23, 0, 0).unwrap()).is_none());
    }

    #[test]
    fn month_rollover_without_prefix() {
        let text = "METAR VHHH 310000Z 08011KT 9999 FEW022\nMETAR VHHH 010000Z 08011KT 9999 FEW022\n";
        let load = parse_metar_lines(text, &MetarParser::default(), Some((2017, 1)));
        assert_eq!(load.decoded[1].issued, Utc.with_ymd_and_hms(2017, 2, 1, 0, 0, 0).unwrap());
    }

    #[test]
    fn bare_lines_continue_from_a_prefixed_report() {
        let text = "2017-03-31T23:00:00Z METAR VHHH 312300Z 08011KT 9999 FEW022\nMETAR VHHH 010000Z 08011KT 9999 FEW022\n";
        let load = parse_metar_lines(text, &MetarParser::default(), None);
        assert_eq!(load.malformed, 0);
        assert_eq!(load.decoded[1].issued, Utc.with_ymd_and_hms(2017, 4, 1, 0, 0, 0).unwrap());
    }
}
