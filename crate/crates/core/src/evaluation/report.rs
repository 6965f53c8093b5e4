//! Predictions files and the report tables derived from them.
//!
//! Every report is a pure function of the predictions file, so reports
//! regenerate byte-identically from a saved file.
//!
//! | file | columns |
//! |---|---|
//! | `metrics.csv` | `method,subset,count,rmse,mae,r2` |
//! | `error_summary.csv` | `method,count,mean,std` |
//! | `error_histogram.csv` | `method,bin_start,bin_end,count` |
//! | `error_scatter.csv` | `method,flight_id,actual_time,error` |
//! | `flight_series.csv` | `flight_number,date,method,y_true,y_pred` |
//! | `case_study.csv` | `flight_number,method,count,rmse,mae,r2` |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::metrics::{metrics, subset_metrics, MetricsReport, SubsetMetrics};
use crate::training::Subset;

/// One prediction of one method for one flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub flight_id: String,
    pub flight_number: String,
    pub sched_dep: DateTime<Utc>,
    pub method: String,
    /// actual flight time, minutes
    pub y_true: f64,
    pub y_pred: f64,
    pub subset: Subset,
}

impl PredictionRow {
    pub fn error(&self) -> f64 {
        self.y_pred - self.y_true
    }
}

pub fn write_predictions<W: std::io::Write>(out: W, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["flight_id", "flight_number", "sched_dep", "method", "y_true", "y_pred", "subset"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}

pub fn save_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(std::io::BufWriter::new(f), rows)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(f)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Methods in order of first appearance.
pub fn methods(rows: &[PredictionRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.method) {
            out.push(r.method.clone());
        }
    }
    out
}

fn rows_of<'a>(rows: &'a [PredictionRow], method: &'a str) -> impl Iterator<Item = &'a PredictionRow> + 'a {
    rows.iter().filter(move |r| r.method == method)
}

/// Metrics per method, in order of first appearance.
pub fn method_metrics(rows: &[PredictionRow]) -> Result<Vec<MetricsReport>> {
    methods(rows)
        .iter()
        .map(|m| {
            let sel: Vec<&PredictionRow> = rows_of(rows, m).collect();
            let p: Vec<f64> = sel.iter().map(|r| r.y_pred).collect();
            let t: Vec<f64> = sel.iter().map(|r| r.y_true).collect();
            let l: Vec<Subset> = sel.iter().map(|r| r.subset).collect();
            metrics(m, &p, &t, &l)
        })
        .collect()
}

/// Mean and population standard deviation of a method's errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn error_summary(errors: &[f64]) -> ErrorSummary {
    let n = errors.len();
    if n == 0 {
        return ErrorSummary {
            count: 0,
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let mean = errors.iter().sum::<f64>() / n as f64;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n as f64;
    ErrorSummary {
        count: n,
        mean,
        std: var.sqrt(),
    }
}

/// Counts of `errors` in bins `[start + k w, start + (k+1) w)`.
pub fn histogram(errors: &[f64], start: f64, width: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for e in errors {
        let k = ((e - start) / width).floor();
        let k = (k.max(0.0) as usize).min(bins.saturating_sub(1));
        if bins > 0 {
            counts[k] += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    /// Histogram bin width in minutes.
    pub bin_width: f64,
    /// Flight number for the case study; the most frequent one when `None`.
    pub case_flight: Option<String>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            bin_width: 2.0,
            case_flight: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub files: Vec<PathBuf>,
    pub metrics: Vec<MetricsReport>,
    pub case_flight: Option<String>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Table { w })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        Ok(self.w.write_record(fields)?)
    }

    fn save(self, path: &Path) -> Result<()> {
        let bytes = self.w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

fn metric_fields(m: &SubsetMetrics) -> [String; 4] {
    [m.count.to_string(), num(m.rmse), num(m.mae), num(m.r2)]
}

/// The flight number with the most predictions of the first method; ties go
/// to the lexicographically smallest.
pub fn busiest_flight_number(rows: &[PredictionRow]) -> Option<String> {
    let first = methods(rows).into_iter().next()?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == first) {
        *counts.entry(&r.flight_number).or_default() += 1;
    }
    let max = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == max).map(|(f, _)| f.to_string())
}

fn metrics_table(reports: &[MetricsReport]) -> Result<Table> {
    let mut t = Table::new(&["method", "subset", "count", "rmse", "mae", "r2"])?;
    for r in reports {
        for (subset, m) in r.rows() {
            let [c, a, b, d] = metric_fields(&m);
            t.row([r.method.as_str(), subset, &c, &a, &b, &d])?;
        }
    }
    Ok(t)
}

/// Writes one `method,subset,count,rmse,mae,r2` row per method and subset.
pub fn save_metrics(path: &Path, reports: &[MetricsReport]) -> Result<()> {
    metrics_table(reports)?.save(path)
}

/// Writes all report tables into `dir`.
pub fn emit_reports(rows: &[PredictionRow], dir: &Path, opts: &ReportOptions) -> Result<ReportSummary> {
    if !(opts.bin_width > 0.0) {
        return Err(Error::InvalidConfig("histogram bin width must be positive".into()));
    }
    if rows.is_empty() {
        return Err(Error::InvalidRecord("no prediction rows to report on".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let names = methods(rows);
    let reports = method_metrics(rows)?;
    let mut files = Vec::new();
    let mut save = |t: Table, name: &str| -> Result<()> {
        let p = dir.join(name);
        t.save(&p)?;
        files.push(p);
        Ok(())
    };

    save(metrics_table(&reports)?, "metrics.csv")?;

    let mut t = Table::new(&["method", "count", "mean", "std"])?;
    for r in &reports {
        let s = error_summary(&r.errors);
        t.row([r.method.clone(), s.count.to_string(), num(s.mean), num(s.std)])?;
    }
    save(t, "error_summary.csv")?;

    let mut t = Table::new(&["method", "bin_start", "bin_end", "count"])?;
    let all_errors = rows.iter().map(PredictionRow::error);
    let lo = all_errors.clone().fold(f64::INFINITY, f64::min);
    let hi = all_errors.fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        let w = opts.bin_width;
        let start = (lo / w).floor() * w;
        let bins = (((hi - start) / w).floor() as usize) + 1;
        for r in &reports {
            for (k, c) in histogram(&r.errors, start, w, bins).into_iter().enumerate() {
                let a = start + k as f64 * w;
                t.row([r.method.clone(), num(a), num(a + w), c.to_string()])?;
            }
        }
    }
    save(t, "error_histogram.csv")?;

    let mut t = Table::new(&["method", "flight_id", "actual_time", "error"])?;
    for m in &names {
        for r in rows_of(rows, m) {
            t.row([m.clone(), r.flight_id.clone(), num(r.y_true), num(r.error())])?;
        }
    }
    save(t, "error_scatter.csv")?;

    let mut t = Table::new(&["flight_number", "date", "method", "y_true", "y_pred"])?;
    let mut series: Vec<&PredictionRow> = rows.iter().collect();
    let rank = |m: &str| names.iter().position(|n| n == m).unwrap_or(usize::MAX);
    series.sort_by(|a, b| {
        (a.flight_number.as_str(), a.sched_dep, rank(&a.method), a.flight_id.as_str()).cmp(&(
            b.flight_number.as_str(),
            b.sched_dep,
            rank(&b.method),
            b.flight_id.as_str(),
        ))
    });
    for r in series {
        t.row([
            r.flight_number.clone(),
            r.sched_dep.format("%Y-%m-%d").to_string(),
            r.method.clone(),
            num(r.y_true),
            num(r.y_pred),
        ])?;
    }
    save(t, "flight_series.csv")?;

    let case_flight = opts.case_flight.clone().or_else(|| busiest_flight_number(rows));
    let mut t = Table::new(&["flight_number", "method", "count", "rmse", "mae", "r2"])?;
    if let Some(f) = &case_flight {
        for m in &names {
            let (p, y): (Vec<f64>, Vec<f64>) = rows_of(rows, m)
                .filter(|r| &r.flight_number == f)
                .map(|r| (r.y_pred, r.y_true))
                .unzip();
            if let Some(s) = subset_metrics(&p, &y) {
                let [c, a, b, d] = metric_fields(&s);
                t.row([f.as_str(), m.as_str(), &c, &a, &b, &d])?;
            }
        }
    }
    save(t, "case_study.csv")?;

    Ok(ReportSummary {
        files,
        metrics: reports,
        case_flight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn row(id: usize, method: &str, y: f64, p: f64, subset: Subset) -> PredictionRow {
        PredictionRow {
            flight_id: format!("F{id}"),
            flight_number: format!("XX{}", id % 2),
            sched_dep: Utc.with_ymd_and_hms(2024, 1, 1 + id as u32, 8, 0, 0).unwrap(),
            method: method.into(),
            y_true: y,
            y_pred: p,
            subset,
        }
    }

    fn sample_rows() -> Vec<PredictionRow> {
        let mut v = Vec::new();
        for i in 0..7 {
            let s = if i == 3 { Subset::Outlier } else { Subset::Normal };
            v.push(row(i, "fps", 100.0 + i as f64, 103.0, s));
            v.push(row(i, "swrnn", 100.0 + i as f64, 100.5 + i as f64, s));
        }
        v
    }

    #[test]
    fn empty_predictions_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_reports(&[], dir.path(), &ReportOptions::default()).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn histogram_counts_every_error() {
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&sample_rows(), dir.path(), &ReportOptions::default()).unwrap();
        let text = fs::read_to_string(dir.path().join("error_histogram.csv")).unwrap();
        let total: usize = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(total, 14);
        assert_eq!(histogram(&[-1.0, 0.0, 1.9, 2.0], 0.0, 2.0, 2), vec![3, 1]);
    }

    #[test]
    fn error_summary_matches_direct_computation() {
        let rows = sample_rows();
        let errs: Vec<f64> = rows.iter().filter(|r| r.method == "fps").map(|r| r.error()).collect();
        let s = error_summary(&errs);
        // errors 3, 2, 1, 0, -1, -2, -3
        assert_eq!(s.mean, 0.0);
        assert!((s.std - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_regenerate_identically_from_saved_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sample_rows();
        let pred = dir.path().join("p.csv");
        save_predictions(&pred, &rows).unwrap();
        let back = load_predictions(&pred).unwrap();
        assert_eq!(back, rows);
        let a = emit_reports(&rows, &dir.path().join("a"), &ReportOptions::default()).unwrap();
        let b = emit_reports(&back, &dir.path().join("b"), &ReportOptions::default()).unwrap();
        for (x, y) in a.files.iter().zip(&b.files) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        assert_eq!(a.case_flight.as_deref(), Some("XX0"));
        let metrics = fs::read_to_string(dir.path().join("a/metrics.csv")).unwrap();
        assert!(metrics.starts_with("method,subset,count,rmse,mae,r2\nfps,all,7,2,"));
    }
}
