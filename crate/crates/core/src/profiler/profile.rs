use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Table;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Integer,
    Real,
    Categorical,
    Boolean,
    Text,
    Unknown,
}

impl ColumnType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnType::Integer | ColumnType::Real)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Integer => "integer",
            ColumnType::Real => "real",
            ColumnType::Categorical => "categorical",
            ColumnType::Boolean => "boolean",
            ColumnType::Text => "text",
            ColumnType::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub count: usize,
    pub mean: f64,
    /// Sample (n-1) standard deviation; absent for fewer than two values.
    pub std: Option<f64>,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub numeric: Option<NumericStats>,
    /// Up to five (value, frequency) pairs, most frequent first.
    pub categorical: Option<Vec<(String, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub inferred_type: ColumnType,
    pub missing_count: usize,
    pub stats: ColumnStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub path: String,
    pub n_rows: usize,
    pub n_cols: usize,
    pub columns: Vec<ColumnProfile>,
}

/// Type-inference thresholds. A non-numeric column is categorical when its
/// distinct count is at most `max(categorical_min_distinct,
/// categorical_row_fraction * n_rows)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileOptions {
    pub categorical_min_distinct: usize,
    pub categorical_row_fraction: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { categorical_min_distinct: 20, categorical_row_fraction: 0.05 }
    }
}

pub fn profile(table: &Table) -> Result<DatasetProfile> {
    profile_with(table, &ProfileOptions::default())
}

pub fn profile_with(table: &Table, options: &ProfileOptions) -> Result<DatasetProfile> {
    if table.n_cols() == 0 {
        return Err(Error::Profile("table has no columns".into()));
    }
    let n_rows = table.n_rows();
    let columns = table
        .headers
        .iter()
        .zip(&table.columns)
        .map(|(name, cells)| profile_column(name, cells, n_rows, options))
        .collect();
    Ok(DatasetProfile { path: table.path.clone(), n_rows, n_cols: table.n_cols(), columns })
}

fn profile_column(name: &str, cells: &[Option<String>], n_rows: usize, options: &ProfileOptions) -> ColumnProfile {
    let present: Vec<&str> = cells.iter().flatten().map(String::as_str).collect();
    let missing_count = cells.len() - present.len();
    let inferred_type = infer_type(&present, n_rows, options);
    let mut stats = ColumnStats::default();
    match inferred_type {
        ColumnType::Integer | ColumnType::Real => {
            let values: Vec<f64> = present.iter().filter_map(|v| parse_real(v)).collect();
            stats.numeric = numeric_stats(&values);
        }
        ColumnType::Categorical | ColumnType::Boolean => stats.categorical = Some(top_values(&present, 5)),
        ColumnType::Text | ColumnType::Unknown => {}
    }
    ColumnProfile { name: name.to_string(), inferred_type, missing_count, stats }
}

fn parse_real(v: &str) -> Option<f64> {
    v.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

fn infer_type(present: &[&str], n_rows: usize, options: &ProfileOptions) -> ColumnType {
    if present.is_empty() {
        return ColumnType::Unknown;
    }
    if present.iter().all(|v| v.trim().parse::<i64>().is_ok()) {
        return ColumnType::Integer;
    }
    if present.iter().all(|v| parse_real(v).is_some()) {
        return ColumnType::Real;
    }
    if present.iter().all(|v| v.eq_ignore_ascii_case("true") || v.eq_ignore_ascii_case("false")) {
        return ColumnType::Boolean;
    }
    let mut distinct: Vec<&str> = present.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let limit = options
        .categorical_min_distinct
        .max((options.categorical_row_fraction * n_rows as f64).floor() as usize);
    if distinct.len() <= limit {
        ColumnType::Categorical
    } else {
        ColumnType::Text
    }
}

/// Linear-interpolation quantile of sorted data: position q * (n - 1).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn numeric_stats(values: &[f64]) -> Option<NumericStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Some(NumericStats {
        count: values.len(),
        mean,
        std,
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

fn top_values(present: &[&str], k: usize) -> Vec<(String, usize)> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for v in present {
        *freq.entry(v).or_default() += 1;
    }
    let mut pairs: Vec<(String, usize)> = freq.into_iter().map(|(v, c)| (v.to_string(), c)).collect();
    // Frequency descending, then value ascending for determinism.
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    pairs.truncate(k);
    pairs
}
