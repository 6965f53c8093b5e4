//! One-hot encoding and z-score normalisation with frozen training statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENCODER_FORMAT_VERSION: u32 = 1;
/// Reserved level that absorbs categories unseen at fit time.
pub const OTHER_LEVEL: &str = "__other__";

/// Names of the numeric and categorical input columns, in row order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub numeric: Vec<String>,
    pub categorical: Vec<String>,
}

impl TableSchema {
    pub fn new<S: Into<String>>(
        numeric: impl IntoIterator<Item = S>,
        categorical: impl IntoIterator<Item = S>,
    ) -> Self {
        TableSchema {
            numeric: numeric.into_iter().map(Into::into).collect(),
            categorical: categorical.into_iter().map(Into::into).collect(),
        }
    }
}

/// One unencoded row laid out according to a [`TableSchema`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub numeric: Vec<f64>,
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    OneHot { group: String, level: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NumericColumn {
    name: String,
    source: usize,
    stats: NormStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CategoricalColumn {
    name: String,
    source: usize,
    /// Sorted observed levels followed by [`OTHER_LEVEL`].
    levels: Vec<String>,
}

/// Encoder fitted on training rows. Serialises to JSON so that every split is
/// encoded against the same column layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub format_version: u32,
    schema: TableSchema,
    numeric: Vec<NumericColumn>,
    dropped: Vec<String>,
    categorical: Vec<CategoricalColumn>,
}

/// Encoded rows plus the layout and statistics that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFeatureVector {
    pub values: Vec<Vec<f64>>,
    pub column_schema: Vec<ColumnSpec>,
    pub norm_stats: Vec<Option<NormStats>>,
}

fn check_row(schema: &TableSchema, row: &RawRow) -> Result<()> {
    if row.numeric.len() != schema.numeric.len() || row.categorical.len() != schema.categorical.len() {
        return Err(Error::InvalidRecord(format!(
            "row has {}+{} fields, schema expects {}+{}",
            row.numeric.len(),
            row.categorical.len(),
            schema.numeric.len(),
            schema.categorical.len()
        )));
    }
    if let Some(v) = row.numeric.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidRecord(format!("non-finite numeric value {v}")));
    }
    Ok(())
}

/// Population mean and standard deviation.
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> NormStats {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return NormStats { mean: 0.0, std: 0.0 };
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    NormStats { mean, std: var.sqrt() }
}

fn is_constant(stats: &NormStats) -> bool {
    stats.std <= 1e-12 * stats.mean.abs().max(1.0)
}

impl FeatureEncoder {
    /// Fits statistics and category levels on training rows.
    pub fn fit(schema: &TableSchema, rows: &[RawRow]) -> Result<Self> {
        for row in rows {
            check_row(schema, row)?;
        }
        let mut numeric = Vec::new();
        let mut dropped = Vec::new();
        for (i, name) in schema.numeric.iter().enumerate() {
            let stats = mean_std(rows.iter().map(|r| r.numeric[i]));
            if is_constant(&stats) {
                log::info!("dropping constant column `{name}`");
                dropped.push(name.clone());
            } else {
                numeric.push(NumericColumn {
                    name: name.clone(),
                    source: i,
                    stats,
                });
            }
        }
        let categorical = schema
            .categorical
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let mut levels: Vec<String> = rows.iter().map(|r| r.categorical[i].clone()).collect();
                levels.sort();
                levels.dedup();
                levels.retain(|l| l != OTHER_LEVEL);
                levels.push(OTHER_LEVEL.to_string());
                CategoricalColumn {
                    name: name.clone(),
                    source: i,
                    levels,
                }
            })
            .collect();
        Ok(FeatureEncoder {
            format_version: ENCODER_FORMAT_VERSION,
            schema: schema.clone(),
            numeric,
            dropped,
            categorical,
        })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn dropped_columns(&self) -> &[String] {
        &self.dropped
    }

    pub fn width(&self) -> usize {
        self.numeric.len() + self.categorical.iter().map(|c| c.levels.len()).sum::<usize>()
    }

    pub fn column_schema(&self) -> Vec<ColumnSpec> {
        let mut cols: Vec<ColumnSpec> = self
            .numeric
            .iter()
            .map(|c| ColumnSpec {
                name: c.name.clone(),
                kind: ColumnKind::Numeric,
            })
            .collect();
        for c in &self.categorical {
            for level in &c.levels {
                cols.push(ColumnSpec {
                    name: format!("{}={}", c.name, level),
                    kind: ColumnKind::OneHot {
                        group: c.name.clone(),
                        level: level.clone(),
                    },
                });
            }
        }
        cols
    }

    pub fn norm_stats(&self) -> Vec<Option<NormStats>> {
        let mut stats: Vec<Option<NormStats>> = self.numeric.iter().map(|c| Some(c.stats)).collect();
        stats.extend(self.categorical.iter().flat_map(|c| c.levels.iter().map(|_| None)));
        stats
    }

    pub fn encode_row_into(&self, row: &RawRow, out: &mut Vec<f64>) -> Result<()> {
        check_row(&self.schema, row)?;
        for c in &self.numeric {
            out.push((row.numeric[c.source] - c.stats.mean) / c.stats.std);
        }
        for c in &self.categorical {
            let value = &row.categorical[c.source];
            let hit = c.levels[..c.levels.len() - 1]
                .binary_search(value)
                .unwrap_or(c.levels.len() - 1);
            out.extend((0..c.levels.len()).map(|j| if j == hit { 1.0 } else { 0.0 }));
        }
        Ok(())
    }

    pub fn encode_row(&self, row: &RawRow) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.width());
        self.encode_row_into(row, &mut out)?;
        Ok(out)
    }

    pub fn encode(&self, rows: &[RawRow]) -> Result<EncodedFeatureVector> {
        Ok(EncodedFeatureVector {
            values: rows.iter().map(|r| self.encode_row(r)).collect::<Result<_>>()?,
            column_schema: self.column_schema(),
            norm_stats: self.norm_stats(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let enc: FeatureEncoder = serde_json::from_str(text)?;
        if enc.format_version != ENCODER_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: ENCODER_FORMAT_VERSION,
                found: enc.format_version,
            });
        }
        Ok(enc)
    }
}

/// Fits on `rows` when `fit_stats` is absent, otherwise applies the given
/// encoder. Returns the encoder that was used alongside the encoded table.
pub fn encode_and_normalize(
    rows: &[RawRow],
    schema: &TableSchema,
    fit_stats: Option<&FeatureEncoder>,
) -> Result<(FeatureEncoder, EncodedFeatureVector)> {
    let encoder = match fit_stats {
        Some(enc) => {
            if enc.schema() != schema {
                return Err(Error::InvalidConfig("encoder schema differs from row schema".into()));
            }
            enc.clone()
        }
        None => FeatureEncoder::fit(schema, rows)?,
    };
    let table = encoder.encode(rows)?;
    Ok((encoder, table))
}

/// Per-column z-scoring for fixed-width numeric blocks whose column identity
/// must be preserved (delay-state matrices). Constant columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub stats: Vec<NormStats>,
}

impl ColumnScaler {
    pub fn identity(width: usize) -> Self {
        ColumnScaler {
            stats: vec![NormStats { mean: 0.0, std: 1.0 }; width],
        }
    }

    /// Fits on rows of width `width`, each row given as a slice.
    pub fn fit<'a>(width: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; width];
        let mut rows_vec = Vec::new();
        for r in rows {
            debug_assert_eq!(r.len(), width);
            n += 1;
            for (s, v) in sum.iter_mut().zip(r) {
                *s += v;
            }
            rows_vec.push(r);
        }
        if n == 0 {
            return Self::identity(width);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut ss = vec![0.0; width];
        for r in rows_vec {
            for ((s, v), m) in ss.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let stats = mean
            .into_iter()
            .zip(ss)
            .map(|(mean, s)| {
                let st = NormStats { mean, std: (s / n as f64).sqrt() };
                if is_constant(&st) {
                    NormStats { mean, std: 1.0 }
                } else {
                    st
                }
            })
            .collect();
        ColumnScaler { stats }
    }

    /// Fits a sign-preserving scaler: no centring, each column divided by
    /// its root mean square (1 for all-zero columns), so zero stays zero.
    pub fn fit_scale_only<'a>(width: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut n = 0usize;
        let mut ss = vec![0.0; width];
        for r in rows {
            debug_assert_eq!(r.len(), width);
            n += 1;
            for (s, v) in ss.iter_mut().zip(r) {
                *s += v * v;
            }
        }
        let stats = ss
            .into_iter()
            .map(|s| {
                let rms = if n == 0 { 0.0 } else { (s / n as f64).sqrt() };
                NormStats {
                    mean: 0.0,
                    std: if rms > 1e-12 { rms } else { 1.0 },
                }
            })
            .collect();
        ColumnScaler { stats }
    }

    pub fn width(&self) -> usize {
        self.stats.len()
    }

    pub fn apply(&self, row: &mut [f64]) {
        for (v, s) in row.iter_mut().zip(&self.stats) {
            *v = (*v - s.mean) / s.std;
        }
    }
}
