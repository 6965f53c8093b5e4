//! Decodes raw METAR reports into the seven weather variables the model
//! uses, and shows the fixed-width vector each one becomes.
//!
//! ```text
//! cargo run --release --example decode_metar
//! cargo run --release --example decode_metar -- "METAR EGLL 121350Z 24015G28KT 3000 BKN008 12/10 Q0998="
//! ```

use swrnn::ingest::{parse_metar_lines, CloudCover, MetarParser, RawMetar, WeatherObservation, WindDirection};

fn show(obs: &WeatherObservation) {
    let dir = match obs.wind_direction {
        WindDirection::Degrees(d) => format!("{d:>3}"),
        WindDirection::Variable => "VRB".to_string(),
    };
    let cloud = match obs.cloud_type {
        CloudCover::None => "none".to_string(),
        c => format!("{} at {} ft", c.code(), obs.cloud_height),
    };
    println!(
        "  wind {dir} deg {} kt gust {} kt | cloud {cloud} | visibility {} m | VMC {}",
        obs.wind_speed, obs.wind_gust, obs.visibility, obs.vmc
    );
    let v = obs.to_vector();
    let named: Vec<String> = WeatherObservation::FIELD_NAMES
        .iter()
        .zip(v)
        .map(|(n, x)| format!("{n}={x}"))
        .collect();
    println!("  vector: {}", named.join(" "));
}

fn main() -> swrnn::Result<()> {
    let parser = MetarParser::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let reports = if args.is_empty() {
        vec![
            "METAR VHHH 010000Z 08011KT 9999 FEW022 SCT028 20/14 Q1022 NOSIG=".to_string(),
            "METAR SAAB 151300Z VRB03KT 6000 SCT015 BKN040 18/12 Q1009=".to_string(),
            "METAR SAAC 151300Z 27018G32KT 1200 OVC004 09/08 Q0996=".to_string(),
        ]
    } else {
        args
    };
    for body in &reports {
        println!("{body}");
        match RawMetar::from_body(body).and_then(|raw| parser.decode(&raw)) {
            Ok(d) => {
                show(&d.observation);
                if !d.skipped.is_empty() {
                    println!("  skipped groups: {}", d.skipped.join(" "));
                }
            }
            Err(e) => println!("  rejected: {e}"),
        }
    }

    // A whole archive: timestamped lines are placed exactly, bare lines take
    // their month from the reference and roll over when the day goes back.
    let archive = "\
2024-03-31T23:00:00Z METAR SAAA 312300Z 18005KT 9999 NSC 15/09 Q1015=
METAR SAAA 010000Z 18006KT 9999 FEW030 15/09 Q1015=
METAR SAAA 0100Z garbage=
";
    let report = parse_metar_lines(archive, &parser, Some((2024, 3)));
    println!("\narchive: {} lines, {} decoded, {} malformed", report.lines, report.decoded.len(), report.malformed);
    for d in &report.decoded {
        println!("  {} {} visibility {} m", d.issued, d.station, d.observation.visibility);
    }
    Ok(())
}
