//! Pipeline stages shared by the command-line tool, the examples and the
//! tests: world loading, feature building, preparation, training and
//! method comparison.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{fps_baseline, lasso_baseline, lasso_predict, flat_features, LassoSelection, PredictionRow, FPS, LASSO};
use crate::features::dataset::{load_samples, save_samples, DatasetHeader, LabeledSample, SAMPLES_FORMAT_VERSION};
use crate::features::{assemble_all, AssembledSample, AssemblyReport, DelayStateIndex, FlightLog, NetworkIndex};
use crate::ingest::metar::MetarLoadReport;
use crate::ingest::records::format_time;
use crate::ingest::{load_flight_records, parse_metar_lines, DropReport, FlightRecord, MetarParser, WeatherArchive, WeatherObservation};
use crate::model::{Checkpoint, ModelInput, Preprocessing, SwrnnModel};
use crate::synth::{SyntheticWorld, FLIGHTS_FILE, METAR_FILE, NETWORK_FILE};
use crate::training::{label_samples, stratified_split, train_model, SplitSpec, Subset, TrainConfig, TrainMethod, TrainReport};

/// OD pairs flown less often than this (per day) are left out of an index
/// built from the flights themselves.
pub const MIN_FLIGHTS_PER_DAY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetarSummary {
    pub lines: usize,
    pub decoded: usize,
    pub malformed: usize,
    pub skipped_tokens: usize,
}

/// Parsed raw inputs of one world.
#[derive(Debug, Clone)]
pub struct WorldInputs {
    pub flights: Vec<FlightRecord>,
    pub drops: DropReport,
    pub weather: WeatherArchive,
    pub metar: MetarSummary,
    pub network: NetworkIndex,
}

fn decode_metar(text: &str) -> (WeatherArchive, MetarSummary) {
    let report = parse_metar_lines(text, &MetarParser::default(), None);
    let summary = MetarSummary {
        lines: report.lines,
        decoded: report.decoded.len(),
        malformed: report.malformed,
        skipped_tokens: report.skipped_tokens,
    };
    (report.archive(), summary)
}

/// Reads `flights.csv` and `metar.txt` from `dir`, with the index from
/// `network.json` when present and otherwise derived from the flights.
pub fn load_world(dir: &Path) -> Result<WorldInputs> {
    let (flights, drops) = load_flight_records(&dir.join(FLIGHTS_FILE))?;
    let metar_path = dir.join(METAR_FILE);
    let text = fs::read_to_string(&metar_path).map_err(|e| Error::io(&metar_path, e))?;
    let (weather, metar) = decode_metar(&text);
    let net_path = dir.join(NETWORK_FILE);
    let network = if net_path.exists() {
        NetworkIndex::from_json(&fs::read_to_string(&net_path).map_err(|e| Error::io(&net_path, e))?)?
    } else {
        NetworkIndex::from_flights(&flights, MIN_FLIGHTS_PER_DAY)?
    };
    Ok(WorldInputs {
        flights,
        drops,
        weather,
        metar,
        network,
    })
}

/// The same inputs straight from a generated world, without files.
pub fn world_inputs(world: &SyntheticWorld) -> WorldInputs {
    let (weather, metar) = decode_metar(&world.metar);
    WorldInputs {
        flights: world.flights.clone(),
        drops: DropReport {
            rows_in: world.flights.len(),
            rows_out: world.flights.len(),
            dropped: Vec::new(),
        },
        weather,
        metar,
        network: world.network.clone(),
    }
}

/// Labelled samples split three ways.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub header: DatasetHeader,
    pub network: NetworkIndex,
    pub train: Vec<LabeledSample>,
    pub val: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub assembly: AssemblyReport,
}

pub fn samples_of(split: &[LabeledSample]) -> Vec<&AssembledSample> {
    split.iter().map(|s| &s.sample).collect()
}

pub fn labels_of(split: &[LabeledSample]) -> Vec<Subset> {
    split.iter().map(|s| s.subset).collect()
}

/// Assembles every sample with an `n_t`-hour window, labels outliers over
/// the whole set and splits 3:1:1 per stratum.
pub fn build_features(inputs: &WorldInputs, n_t: usize, split_seed: u64) -> Result<FeatureSet> {
    if n_t == 0 {
        return Err(Error::InvalidConfig("n_t must be positive".into()));
    }
    let log = FlightLog::new(&inputs.flights)
        .ok_or_else(|| Error::InsufficientHistory("no flights to build features from".into()))?;
    let delays = DelayStateIndex::build(&log, &inputs.network);
    let (samples, assembly) = assemble_all(&inputs.flights, &delays, &inputs.weather, &inputs.network, n_t);
    if samples.is_empty() {
        return Err(Error::InsufficientHistory(format!("no flight has {n_t} hours of history and weather")));
    }
    log::info!(
        "{} samples from {} flights ({} off network, {} short history, {} missing weather)",
        assembly.samples,
        assembly.flights_in,
        assembly.off_network,
        assembly.insufficient_history,
        assembly.missing_weather
    );
    let labels = label_samples(&samples);
    let split = stratified_split(&labels, &SplitSpec::new(split_seed));
    let pick = |idx: &[usize]| -> Vec<LabeledSample> {
        idx.iter()
            .map(|&i| LabeledSample {
                sample: samples[i].clone(),
                subset: labels[i],
            })
            .collect()
    };
    Ok(FeatureSet {
        header: DatasetHeader {
            format_version: SAMPLES_FORMAT_VERSION,
            index_hash: inputs.network.hash(),
            n_t,
            n_od: inputs.network.n_od(),
            n_ap: inputs.network.n_airports(),
        },
        network: inputs.network.clone(),
        train: pick(&split.train),
        val: pick(&split.val),
        test: pick(&split.test),
        assembly,
    })
}

pub const SPLIT_FILES: [&str; 3] = ["train.csv", "val.csv", "test.csv"];

/// Writes `train.csv`, `val.csv`, `test.csv` and `network.json`.
pub fn save_features(dir: &Path, fs_: &FeatureSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, split) in SPLIT_FILES.iter().zip([&fs_.train, &fs_.val, &fs_.test]) {
        save_samples(&dir.join(name), &fs_.header, split)?;
    }
    let net = dir.join(NETWORK_FILE);
    fs::write(&net, fs_.network.to_json()?).map_err(|e| Error::io(&net, e))
}

pub fn load_features(dir: &Path) -> Result<FeatureSet> {
    let net = dir.join(NETWORK_FILE);
    let network = NetworkIndex::from_json(&fs::read_to_string(&net).map_err(|e| Error::io(&net, e))?)?;
    let mut splits = Vec::with_capacity(3);
    let mut header: Option<DatasetHeader> = None;
    for name in SPLIT_FILES {
        let (h, s) = load_samples(&dir.join(name))?;
        if h.index_hash != network.hash() {
            return Err(Error::IndexMismatch {
                expected: network.hash(),
                found: h.index_hash,
            });
        }
        if let Some(prev) = &header {
            if prev != &h {
                return Err(Error::InvalidRecord(format!("{name}: header differs from train.csv")));
            }
        }
        header = Some(h);
        splits.push(s);
    }
    let test = splits.pop().unwrap_or_default();
    let val = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    let n = train.len() + val.len() + test.len();
    Ok(FeatureSet {
        header: header.expect("three splits read"),
        network,
        train,
        val,
        test,
        assembly: AssemblyReport {
            flights_in: n,
            samples: n,
            ..Default::default()
        },
    })
}

/// Network inputs of every split, with the preprocessing fitted on train.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub prep: Preprocessing,
    pub train: Vec<ModelInput>,
    pub val: Vec<ModelInput>,
    pub test: Vec<ModelInput>,
}

impl Prepared {
    pub fn train_refs(&self) -> Vec<&ModelInput> {
        self.train.iter().collect()
    }

    pub fn val_refs(&self) -> Vec<&ModelInput> {
        self.val.iter().collect()
    }

    pub fn test_refs(&self) -> Vec<&ModelInput> {
        self.test.iter().collect()
    }
}

pub fn prepare(fs_: &FeatureSet) -> Result<Prepared> {
    let train = samples_of(&fs_.train);
    let prep = Preprocessing::fit(&train, &fs_.header.index_hash)?;
    Ok(Prepared {
        train: prep.encode_all(&train)?,
        val: prep.encode_all(&samples_of(&fs_.val))?,
        test: prep.encode_all(&samples_of(&fs_.test))?,
        prep,
    })
}

/// One prediction row per sample, in sample order.
pub fn prediction_rows(method: &str, split: &[LabeledSample], preds: &[f64]) -> Vec<PredictionRow> {
    split
        .iter()
        .zip(preds)
        .map(|(s, &p)| PredictionRow {
            flight_id: s.sample.flight_id.clone(),
            flight_number: s.sample.flight_number.clone(),
            sched_dep: s.sample.sched_dep,
            method: method.to_string(),
            y_true: s.sample.target,
            y_pred: p,
            subset: s.subset,
        })
        .collect()
}

/// Trains a network and wraps it with its preprocessing as a checkpoint.
pub fn train_checkpoint(prepared: &Prepared, method: TrainMethod, cfg: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    let report = train_model(method, &prepared.prep, &prepared.train_refs(), &prepared.val_refs(), cfg)?;
    let ck = Checkpoint {
        index_hash: prepared.prep.index_hash.clone(),
        model: report.model.clone(),
        preprocessing: Some(prepared.prep.clone()),
    };
    Ok((ck, report))
}

/// Predictions of a checkpoint on `split`, encoded with the checkpoint's
/// own preprocessing.
pub fn checkpoint_predictions(ck: &Checkpoint, split: &[LabeledSample]) -> Result<Vec<f64>> {
    let prep = ck
        .preprocessing
        .as_ref()
        .ok_or_else(|| Error::CorruptCheckpoint("checkpoint carries no preprocessing".into()))?;
    if prep.index_hash != ck.index_hash {
        return Err(Error::IndexMismatch {
            expected: ck.index_hash.clone(),
            found: prep.index_hash.clone(),
        });
    }
    let inputs = prep.encode_all(&samples_of(split))?;
    ck.model.predict(&inputs)
}

pub fn model_predictions(model: &SwrnnModel, inputs: &[ModelInput]) -> Result<Vec<f64>> {
    model.predict(inputs)
}

/// A method compared on the test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Fps,
    Lasso,
    Network(TrainMethod),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fps => FPS,
            Method::Lasso => LASSO,
            Method::Network(m) => m.name(),
        }
    }

    pub const ALL: [Method; 5] = [
        Method::Fps,
        Method::Lasso,
        Method::Network(TrainMethod::Ablation),
        Method::Network(TrainMethod::SingleStep),
        Method::Network(TrainMethod::TwoStep),
    ];
}

/// Everything produced by [`compare_methods`].
#[derive(Debug, Clone)]
pub struct Comparison {
    /// Test-split predictions, method-major.
    pub predictions: Vec<PredictionRow>,
    pub networks: Vec<TrainReport>,
    pub lasso: Option<LassoSelection>,
}

/// Fits each method on train/validation and predicts the test split.
pub fn compare_methods(fs_: &FeatureSet, prepared: &Prepared, methods: &[Method], cfg: &TrainConfig) -> Result<Comparison> {
    let mut out = Comparison {
        predictions: Vec::new(),
        networks: Vec::new(),
        lasso: None,
    };
    for &m in methods {
        let preds: Vec<f64> = match m {
            Method::Fps => fs_.test.iter().map(|s| fps_baseline(&s.sample)).collect(),
            Method::Lasso => {
                let sel = lasso_baseline(&prepared.prep, &prepared.train_refs(), &prepared.val_refs())?;
                let p = prepared.test.iter().map(|x| lasso_predict(&sel.model, &flat_features(x))).collect();
                out.lasso = Some(sel);
                p
            }
            Method::Network(t) => {
                let report = train_model(t, &prepared.prep, &prepared.train_refs(), &prepared.val_refs(), cfg)?;
                let p = report.model.predict(&prepared.test)?;
                out.networks.push(report);
                p
            }
        };
        log::info!("{}: predicted {} test flights", m.name(), preds.len());
        out.predictions.extend(prediction_rows(m.name(), &fs_.test, &preds));
    }
    Ok(out)
}

/// Writes decoded reports as `issued,station,<weather fields>` rows.
pub fn save_decoded_metar(path: &Path, report: &MetarLoadReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut header = vec!["issued", "station"];
    header.extend(WeatherObservation::FIELD_NAMES);
    w.write_record(&header)?;
    for d in &report.decoded {
        let mut row = vec![format_time(d.issued), d.station.clone()];
        row.extend(d.observation.to_vector().iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The airport appearing in the most flights; ties go to the smallest code.
pub fn busiest_airport(flights: &[FlightRecord]) -> Option<String> {
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for f in flights {
        *counts.entry(&f.origin).or_default() += 1;
        *counts.entry(&f.destination).or_default() += 1;
    }
    let max = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == max).map(|(a, _)| a.to_string())
}
