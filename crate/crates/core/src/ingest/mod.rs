//! Raw input parsing and preprocessing.

pub mod encode;
pub mod metar;
pub mod records;

pub use encode::{
    encode_and_normalize, ColumnKind, ColumnScaler, ColumnSpec, EncodedFeatureVector, FeatureEncoder,
    NormStats, RawRow, TableSchema,
};
pub use metar::{
    load_metar_file, parse_metar, parse_metar_lines, vmc_rule, CloudCover, MetarParser, RawMetar,
    VmcMinima, WeatherArchive, WeatherObservation, WindDirection, N_WX,
};
pub use records::{load_flight_records, save_flight_records, DropReport, FlightRecord};
