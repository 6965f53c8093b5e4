//! Command-line front end: one subcommand per pipeline stage, each reading
//! files, writing files and leaving a run manifest next to its outputs.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use swrnn::evaluation::{emit_reports, load_predictions, method_metrics, save_metrics, save_predictions, ReportOptions};
use swrnn::fuel::{fleet_summary, save_fleet_summary, save_plan_results, simulate_fleet, FuelConversion, FuelPolicy};
use swrnn::ingest::{load_flight_records, load_metar_file, MetarParser};
use swrnn::manifest::ManifestBuilder;
use swrnn::model::{load_checkpoint, save_checkpoint};
use swrnn::synth::{generate, load_metadata, write_world, ScenarioSpec, FLIGHTS_FILE, METADATA_FILE, METAR_FILE, NETWORK_FILE};
use swrnn::training::{history_csv, timestep_sweep, TrainConfig, TrainMethod, SWEEP_N_T};
use swrnn::workflow::{
    build_features, busiest_airport, checkpoint_predictions, compare_methods, load_features, load_world, prediction_rows,
    prepare, samples_of, save_decoded_metar, save_features, train_checkpoint, Method, SPLIT_FILES,
};
use swrnn::{Error, Result};

#[derive(Parser)]
#[command(name = "swrnn", version, about = "Flight-time prediction and fuel-loading simulation pipeline")]
struct Cli {
    /// Worker threads; 1 gives bit-identical reruns. Defaults to all cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info", value_name = "LEVEL")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world (flights.csv, metar.txt, network.json, metadata.json).
    Synth(SynthArgs),
    /// Decode a METAR archive into a weather table.
    ParseMetar(ParseMetarArgs),
    /// Assemble labelled samples and write the train/val/test split.
    BuildFeatures(BuildFeaturesArgs),
    /// Train one network and save its checkpoint.
    Train(TrainArgs),
    /// Predict the test split with baselines and checkpoints; write predictions and metrics.
    Evaluate(EvaluateArgs),
    /// Retrain over a range of window lengths and report validation RMSE.
    SweepNt(SweepArgs),
    /// Simulate fuel loading from predicted flight times.
    FuelSim(FuelArgs),
    /// Write metric, error-distribution and case-study tables from predictions.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario seed (overrides the one in --spec).
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario description as JSON; defaults to the built-in scenario.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Number of simulated days (overrides --spec).
    #[arg(long)]
    days: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ParseMetarArgs {
    /// METAR archive, one report per line.
    input: PathBuf,
    /// Year and month (YYYY-MM) for lines without a timestamp prefix.
    #[arg(long, value_name = "YYYY-MM")]
    reference: Option<String>,
    /// Output directory; receives weather.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct BuildFeaturesArgs {
    /// Directory with flights.csv, metar.txt and optionally network.json.
    world: PathBuf,
    /// Hours in each delay-state window.
    #[arg(long = "nt", default_value_t = 24)]
    n_t: usize,
    /// Seed of the stratified split.
    #[arg(long, default_value_t = 42)]
    split_seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("method").required(true).args(["two_step", "single_step", "ablation_no_swl"])))]
struct TrainArgs {
    /// Feature directory written by build-features.
    features: PathBuf,
    /// Pretrain per-OD spatial layers, freeze them, then train the shared network.
    #[arg(long)]
    two_step: bool,
    /// Train spatial layers and shared network jointly.
    #[arg(long)]
    single_step: bool,
    /// Train without spatial layers.
    #[arg(long)]
    ablation_no_swl: bool,
    /// Training configuration (key=value lines).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Training seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; receives <method>.ckpt and <method>_history.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Feature directory written by build-features.
    features: PathBuf,
    /// Checkpoint to evaluate, as PATH or NAME=PATH; repeatable. The name defaults to the file stem.
    #[arg(long = "checkpoint", value_name = "[NAME=]PATH")]
    checkpoints: Vec<String>,
    /// Skip the LASSO baseline.
    #[arg(long)]
    no_lasso: bool,
    /// Output directory; receives predictions.csv and metrics.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    TwoStep,
    SingleStep,
    AblationNoSwl,
}

impl From<MethodArg> for TrainMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::TwoStep => TrainMethod::TwoStep,
            MethodArg::SingleStep => TrainMethod::SingleStep,
            MethodArg::AblationNoSwl => TrainMethod::Ablation,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Directory with flights.csv, metar.txt and optionally network.json.
    world: PathBuf,
    /// Window lengths to try, comma separated.
    #[arg(long = "nt-values", value_delimiter = ',', default_values_t = SWEEP_N_T)]
    n_t_values: Vec<usize>,
    /// Network variant to retrain.
    #[arg(long, value_enum, default_value = "two-step")]
    method: MethodArg,
    /// Training configuration (key=value lines).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Training seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the stratified split.
    #[arg(long, default_value_t = 42)]
    split_seed: u64,
    /// Output directory; receives sweep.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyArg {
    ProEfficiency,
    ProSafety,
}

impl From<PolicyArg> for FuelPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::ProEfficiency => FuelPolicy::pro_efficiency(),
            PolicyArg::ProSafety => FuelPolicy::pro_safety(),
        }
    }
}

#[derive(Args)]
struct FuelArgs {
    /// Flight records (a flights.csv or a directory containing one).
    records: PathBuf,
    /// predictions.csv written by evaluate.
    #[arg(long, value_name = "FILE")]
    predictions: PathBuf,
    /// Method whose predictions drive the loading.
    #[arg(long, default_value = "swrnn_two_step")]
    method: String,
    /// Loading policy; repeatable. Defaults to both.
    #[arg(long, value_enum)]
    policy: Vec<PolicyArg>,
    /// Hub airport for the inbound/outbound grouping; defaults to the world
    /// metadata, then the busiest airport.
    #[arg(long)]
    hub: Option<String>,
    /// Output directory; receives plans.csv, groups.csv and fleet.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// predictions.csv written by evaluate.
    predictions: PathBuf,
    /// Histogram bin width in minutes.
    #[arg(long, default_value_t = 2.0)]
    bin_width: f64,
    /// Flight number for the case study; defaults to the most frequent.
    #[arg(long)]
    case_flight: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    let threads = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        Some(n) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            n
        }
        None => rayon::current_num_threads(),
    };
    let args: Vec<String> = std::env::args().collect();
    match run(cli.command, args, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn train_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn world_files(dir: &Path) -> Vec<PathBuf> {
    [FLIGHTS_FILE, METAR_FILE, NETWORK_FILE]
        .iter()
        .map(|f| dir.join(f))
        .filter(|p| p.exists())
        .collect()
}

fn feature_files(dir: &Path) -> Vec<PathBuf> {
    SPLIT_FILES.iter().chain([&NETWORK_FILE]).map(|f| dir.join(f)).collect()
}

fn run(command: Command, args: Vec<String>, threads: usize) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a, args, threads),
        Command::ParseMetar(a) => parse_metar(a, args, threads),
        Command::BuildFeatures(a) => build(a, args, threads),
        Command::Train(a) => train(a, args, threads),
        Command::Evaluate(a) => evaluate(a, args, threads),
        Command::SweepNt(a) => sweep(a, args, threads),
        Command::FuelSim(a) => fuel(a, args, threads),
        Command::Report(a) => report(a, args, threads),
    }
}

fn synth(a: SynthArgs, args: Vec<String>, threads: usize) -> Result<()> {
    let mut m = ManifestBuilder::new("synth", args, threads);
    let mut spec = match &a.spec {
        Some(p) => {
            m.input(p);
            ScenarioSpec::load(p)?
        }
        None => ScenarioSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(d) = a.days {
        spec.days = d;
    }
    spec.validate()?;
    let world = generate(&spec)?;
    create_dir(&a.out)?;
    let files = write_world(&world, &a.out)?;
    println!(
        "{} flights, {} METAR reports, {} OD pairs -> {}",
        world.flights.len(),
        world.metadata.metar_reports,
        world.network.n_od(),
        a.out.display()
    );
    m.seed(spec.seed).config(&spec)?.outputs(files);
    m.finish()?.save(&a.out)?;
    Ok(())
}

fn parse_reference(s: &str) -> Result<(i32, u32)> {
    let bad = || Error::InvalidConfig(format!("--reference expects YYYY-MM, got `{s}`"));
    let (y, mo) = s.split_once('-').ok_or_else(bad)?;
    let y: i32 = y.parse().map_err(|_| bad())?;
    let mo: u32 = mo.parse().map_err(|_| bad())?;
    if !(1..=12).contains(&mo) {
        return Err(bad());
    }
    Ok((y, mo))
}

fn parse_metar(a: ParseMetarArgs, args: Vec<String>, threads: usize) -> Result<()> {
    let reference = a.reference.as_deref().map(parse_reference).transpose()?;
    let report = load_metar_file(&a.input, &MetarParser::default(), reference)?;
    create_dir(&a.out)?;
    let out = a.out.join("weather.csv");
    save_decoded_metar(&out, &report)?;
    println!(
        "{} lines: {} decoded, {} malformed, {} unrecognised tokens skipped",
        report.lines,
        report.decoded.len(),
        report.malformed,
        report.skipped_tokens
    );
    let mut m = ManifestBuilder::new("parse-metar", args, threads);
    m.input(&a.input).output(out).config(&serde_json::json!({ "reference": a.reference }))?;
    m.finish()?.save(&a.out)?;
    Ok(())
}

fn build(a: BuildFeaturesArgs, args: Vec<String>, threads: usize) -> Result<()> {
    let inputs = load_world(&a.world)?;
    if inputs.drops.rows_dropped() > 0 {
        log::warn!("{} flight rows dropped during validation", inputs.drops.rows_dropped());
    }
    let fs_ = build_features(&inputs, a.n_t, a.split_seed)?;
    save_features(&a.out, &fs_)?;
    println!(
        "{} samples (train {}, val {}, test {}), n_t={}, index {}",
        fs_.assembly.samples,
        fs_.train.len(),
        fs_.val.len(),
        fs_.test.len(),
        a.n_t,
        fs_.header.index_hash
    );
    let mut m = ManifestBuilder::new("build-features", args, threads);
    for p in world_files(&a.world) {
        m.input(p);
    }
    m.seed(a.split_seed)
        .config(&serde_json::json!({
            "n_t": a.n_t,
            "split_seed": a.split_seed,
            "index_hash": fs_.header.index_hash,
            "samples": fs_.assembly.samples,
        }))?
        .outputs(feature_files(&a.out));
    m.finish()?.save(&a.out)?;
    Ok(())
}

fn train(a: TrainArgs, args: Vec<String>, threads: usize) -> Result<()> {
    let cfg = train_config(a.config.as_deref(), a.seed)?;
    let method = if a.two_step {
        TrainMethod::TwoStep
    } else if a.single_step {
        TrainMethod::SingleStep
    } else {
        TrainMethod::Ablation
    };
    let fs_ = load_features(&a.features)?;
    let prepared = prepare(&fs_)?;
    let (ck, report) = train_checkpoint(&prepared, method, &TrainConfig { n_t: fs_.header.n_t, ..cfg.clone() })?;
    create_dir(&a.out)?;
    let ck_path = a.out.join(format!("{}.ckpt", method.name()));
    save_checkpoint(&ck, &ck_path)?;
    let hist_path = a.out.join(format!("{}_history.csv", method.name()));
    write_text(&hist_path, &history_csv(&report.history)?)?;
    let best = report.history.iter().find(|h| h.epoch == report.best_epoch);
    println!(
        "{}: best epoch {} (val RMSE {:.3} min) -> {}",
        method.name(),
        report.best_epoch,
        best.map_or(f64::NAN, |h| h.val_rmse),
        ck_path.display()
    );
    let mut m = ManifestBuilder::new("train", args, threads);
    if let Some(c) = &a.config {
        m.input(c);
    }
    for p in feature_files(&a.features) {
        m.input(p);
    }
    m.seed(cfg.seed)
        .config(&serde_json::json!({ "method": method.name(), "train": cfg }))?
        .output(ck_path)
        .output(hist_path);
    // one manifest per method, so several methods can share an output directory
    m.finish()?.save_as(&a.out, &format!("train-{}", method.name()))?;
    Ok(())
}

fn parse_checkpoint_arg(s: &str) -> (String, PathBuf) {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let p = PathBuf::from(s);
            let name = p.file_stem().map_or_else(|| s.to_string(), |n| n.to_string_lossy().into_owned());
            (name, p)
        }
    }
}

fn evaluate(a: EvaluateArgs, args: Vec<String>, threads: usize) -> Result<()> {
    let fs_ = load_features(&a.features)?;
    let prepared = prepare(&fs_)?;
    let baselines: Vec<Method> = if a.no_lasso {
        vec![Method::Fps]
    } else {
        vec![Method::Fps, Method::Lasso]
    };
    let mut rows = compare_methods(&fs_, &prepared, &baselines, &TrainConfig::default())?.predictions;
    let mut m = ManifestBuilder::new("evaluate", args, threads);
    for p in feature_files(&a.features) {
        m.input(p);
    }
    for spec in &a.checkpoints {
        let (name, path) = parse_checkpoint_arg(spec);
        let ck = load_checkpoint(&path, Some(&fs_.header.index_hash))?;
        let preds = checkpoint_predictions(&ck, &fs_.test)?;
        rows.extend(prediction_rows(&name, &fs_.test, &preds));
        m.input(path);
    }
    create_dir(&a.out)?;
    let pred_path = a.out.join("predictions.csv");
    save_predictions(&pred_path, &rows)?;
    let reports = method_metrics(&rows)?;
    let metrics_path = a.out.join("metrics.csv");
    save_metrics(&metrics_path, &reports)?;
    println!("{:<20} {:<8} {:>6} {:>9} {:>9} {:>7}", "method", "subset", "count", "rmse", "mae", "r2");
    for r in &reports {
        for (subset, s) in r.rows() {
            println!(
                "{:<20} {:<8} {:>6} {:>9.3} {:>9.3} {:>7.3}",
                r.method, subset, s.count, s.rmse, s.mae, s.r2
            );
        }
    }
    m.config(&serde_json::json!({ "lasso": !a.no_lasso, "checkpoints": a.checkpoints }))?
        .output(pred_path)
        .output(metrics_path);
    m.finish()?.save(&a.out)?;
    Ok(())
}

fn sweep(a: SweepArgs, args: Vec<String>, threads: usize) -> Result<()> {
    let cfg = train_config(a.config.as_deref(), a.seed)?;
    let longest = a.n_t_values.iter().copied().max().unwrap_or(0);
    if longest == 0 {
        return Err(Error::InvalidConfig("--nt-values must contain positive values".into()));
    }
    let inputs = load_world(&a.world)?;
    let fs_ = build_features(&inputs, longest, a.split_seed)?;
    let method: TrainMethod = a.method.into();
    let rows = timestep_sweep(
        &samples_of(&fs_.train),
        &samples_of(&fs_.val),
        &fs_.header.index_hash,
        &cfg,
        &a.n_t_values,
        method,
    )?;
    create_dir(&a.out)?;
    let out = a.out.join("sweep.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n_t", "val_rmse"])?;
    for r in &rows {
        w.write_record([r.n_t.to_string(), r.val_rmse.to_string()])?;
        println!("n_t={:>3}  val RMSE {:.3} min", r.n_t, r.val_rmse);
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: out.clone(),
        source: e.into_error(),
    })?;
    fs::write(&out, bytes).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let mut m = ManifestBuilder::new("sweep-nt", args, threads);
    for p in world_files(&a.world) {
        m.input(p);
    }
    m.seed(cfg.seed)
        .config(&serde_json::json!({
            "method": method.name(),
            "n_t_values": a.n_t_values,
            "split_seed": a.split_seed,
            "train": cfg,
        }))?
        .output(out);
    m.finish()?.save(&a.out)?;
    Ok(())
}

fn fuel(a: FuelArgs, args: Vec<String>, threads: usize) -> Result<()> {
    let (records_path, world_dir) = if a.records.is_dir() {
        (a.records.join(FLIGHTS_FILE), Some(a.records.clone()))
    } else {
        (a.records.clone(), a.records.parent().map(Path::to_path_buf))
    };
    let (records, _) = load_flight_records(&records_path)?;
    let rows = load_predictions(&a.predictions)?;
    let predictions: HashMap<String, f64> = rows
        .iter()
        .filter(|r| r.method == a.method)
        .map(|r| (r.flight_id.clone(), r.y_pred))
        .collect();
    if predictions.is_empty() {
        return Err(Error::InvalidRecord(format!(
            "{} has no predictions for method `{}`",
            a.predictions.display(),
            a.method
        )));
    }
    let hub = match a.hub.clone() {
        Some(h) => h,
        None => world_dir
            .filter(|d| d.join(METADATA_FILE).exists())
            .map(|d| load_metadata(&d))
            .transpose()?
            .map(|md| md.hub)
            .or_else(|| busiest_airport(&records))
            .ok_or_else(|| Error::InvalidRecord("no flight records".into()))?,
    };
    let policy_args = if a.policy.is_empty() {
        vec![PolicyArg::ProEfficiency, PolicyArg::ProSafety]
    } else {
        a.policy.clone()
    };
    let policies: Vec<FuelPolicy> = policy_args.iter().map(|&p| p.into()).collect();
    let sim = simulate_fleet(&records, &predictions, &policies, &hub);
    let conv = FuelConversion::default();
    let summary = fleet_summary(&sim.results, &conv);
    create_dir(&a.out)?;
    let plans = a.out.join("plans.csv");
    save_plan_results(&plans, &sim.results)?;
    save_fleet_summary(&a.out, &summary, &sim.current)?;
    for t in &summary.fleet {
        println!(
            "{:<15} {:>6} flights  saved {:>12.1} kg ({:.2}%)  ${:.0}  CO2 -{:.0} kg",
            t.policy, t.flights, t.fuel_saved_kg, t.fuel_saved_pct, t.savings_usd, t.co2_reduced_kg
        );
    }
    for g in sim.current.iter().chain(&summary.groups) {
        println!("{:<15} {:<9} risk {:>6.2}%", g.policy, g.group, g.risk_pct);
    }
    if !sim.skipped.is_empty() {
        log::warn!("{} flights could not be planned", sim.skipped.len());
    }
    let mut m = ManifestBuilder::new("fuel-sim", args, threads);
    m.input(&records_path)
        .input(&a.predictions)
        .config(&serde_json::json!({
            "method": a.method,
            "policies": policies.iter().map(|p| (&p.name, p.buffer_minutes)).collect::<Vec<_>>(),
            "hub": hub,
            "conversion": conv,
        }))?
        .output(plans)
        .output(a.out.join("groups.csv"))
        .output(a.out.join("fleet.csv"));
    m.finish()?.save(&a.out)?;
    Ok(())
}

fn report(a: ReportArgs, args: Vec<String>, threads: usize) -> Result<()> {
    let rows = load_predictions(&a.predictions)?;
    let opts = ReportOptions {
        bin_width: a.bin_width,
        case_flight: a.case_flight.clone(),
    };
    let summary = emit_reports(&rows, &a.out, &opts)?;
    println!(
        "{} methods, case study {} -> {}",
        summary.metrics.len(),
        summary.case_flight.as_deref().unwrap_or("-"),
        a.out.display()
    );
    let mut m = ManifestBuilder::new("report", args, threads);
    m.input(&a.predictions)
        .config(&serde_json::json!({ "bin_width": a.bin_width, "case_flight": summary.case_flight }))?
        .outputs(summary.files);
    m.finish()?.save(&a.out)?;
    Ok(())
}
