//! Descriptive statistics, correlation and univariate F-score feature ranking.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnKind, DataError, DataTable};
use crate::matrix::Matrix;
use crate::preprocess::{mean, population_stddev};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("arrays must have equal length >= {min} (got {x} and {y})")]
    BadLength { x: usize, y: usize, min: usize },
    #[error("histogram edges must be strictly ascending with at least two edges")]
    BadBins,
    #[error("k must be in 1..={max} (got {k})")]
    BadK { k: usize, max: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryStats {
    pub columns: Vec<ColumnSummary>,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// at position `(n - 1) * p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize_values(column: &str, values: &[f64]) -> ColumnSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    ColumnSummary {
        column: column.to_owned(),
        n: values.len(),
        mean: mean(values),
        median: quantile_sorted(&sorted, 0.5),
        stddev: population_stddev(values),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
    }
}

/// Summary statistics for every numeric column of a cleaned, non-empty table.
pub fn summarize(t: &DataTable) -> Result<SummaryStats, AnalysisError> {
    let mut columns = Vec::new();
    for spec in t.schema().iter().filter(|s| s.kind == ColumnKind::Numeric) {
        let v = t.numeric_values(&spec.name)?;
        if v.is_empty() {
            return Err(DataError::EmptyResult.into());
        }
        columns.push(summarize_values(&spec.name, &v));
    }
    Ok(SummaryStats { columns })
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(AnalysisError::BadLength { x: x.len(), y: y.len(), min: 2 });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Univariate regression F statistic `r^2 / (1 - r^2) * (n - 2)`.
///
/// `+inf` when `|r| = 1` up to rounding, `0` when either input is constant.
pub fn f_regression_score(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(AnalysisError::BadLength { x: x.len(), y: y.len(), min: 3 });
    }
    let r = match pearson_r(x, y) {
        Ok(r) => r,
        Err(AnalysisError::ZeroVariance) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let r2 = r * r;
    let denom = 1.0 - r2;
    if denom <= 4.0 * f64::EPSILON {
        return Ok(f64::INFINITY);
    }
    Ok(r2 / denom * (x.len() - 2) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FScoreEntry {
    pub feature: String,
    pub score: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FScoreTable {
    pub entries: Vec<FScoreEntry>,
    pub k_selected: usize,
}

fn rank_scores(mut scored: Vec<(String, f64)>, k: usize) -> FScoreTable {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let entries = scored
        .into_iter()
        .enumerate()
        .map(|(i, (feature, score))| FScoreEntry { feature, score, selected: i < k })
        .collect();
    FScoreTable { entries, k_selected: k }
}

/// Scores every column, sorts by descending score (ties by ascending name) and
/// marks the top `k` as selected.
pub fn select_k_best(
    features: &Matrix,
    names: &[String],
    y: &[f64],
    k: usize,
) -> Result<FScoreTable, AnalysisError> {
    if k == 0 || k > features.cols() {
        return Err(AnalysisError::BadK { k, max: features.cols() });
    }
    let scored = names
        .iter()
        .enumerate()
        .map(|(j, name)| Ok((name.clone(), f_regression_score(&features.column(j), y)?)))
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(rank_scores(scored, k))
}

/// Indicator-expanded view: numeric feature columns are scored as-is and every
/// `(column, category)` pair of a categorical feature becomes a 0/1 column
/// named `column=category`. Analysis only; never fed to models.
pub fn expanded_feature_scores(
    t: &DataTable,
    y: &[f64],
    k: usize,
) -> Result<FScoreTable, AnalysisError> {
    let mut scored = Vec::new();
    for spec in t.schema().iter().filter(|s| s.role == crate::dataset::ColumnRole::Feature) {
        match spec.kind {
            ColumnKind::Numeric => {
                let v = t.numeric_values(&spec.name)?;
                scored.push((spec.name.clone(), f_regression_score(&v, y)?));
            }
            ColumnKind::Categorical => {
                let v = t.categorical_values(&spec.name)?;
                let mut categories: Vec<&str> = v.clone();
                categories.sort_unstable();
                categories.dedup();
                for cat in categories {
                    let indicator: Vec<f64> =
                        v.iter().map(|&c| if c == cat { 1.0 } else { 0.0 }).collect();
                    scored.push((
                        format!("{}={}", spec.name, cat),
                        f_regression_score(&indicator, y)?,
                    ));
                }
            }
        }
    }
    if k == 0 || k > scored.len() {
        return Err(AnalysisError::BadK { k, max: scored.len() });
    }
    Ok(rank_scores(scored, k))
}

/// Keeps entries with `score > min_score`, preserving order.
pub fn threshold_scores(table: &FScoreTable, min_score: f64) -> FScoreTable {
    let entries: Vec<FScoreEntry> =
        table.entries.iter().filter(|e| e.score > min_score).cloned().collect();
    let k_selected = entries.iter().filter(|e| e.selected).count();
    FScoreTable { entries, k_selected }
}

/// Category frequencies, sorted by descending count then name.
pub fn category_counts(t: &DataTable, column: &str) -> Result<Vec<(String, usize)>, AnalysisError> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in t.categorical_values(column)? {
        *counts.entry(v).or_default() += 1;
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(k, v)| (k.to_owned(), v)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Counts per `[edge_i, edge_{i+1})` bin. Values outside the edge range are
/// clamped into the first or last bin so counts always sum to `y.len()`.
pub fn gross_histogram(y: &[f64], bin_edges: &[f64]) -> Result<Vec<HistogramBin>, AnalysisError> {
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less)) {
        return Err(AnalysisError::BadBins);
    }
    let n_bins = bin_edges.len() - 1;
    let mut counts = vec![0usize; n_bins];
    for &v in y {
        // first edge strictly greater than v, minus one
        let bin = bin_edges.partition_point(|&e| e <= v).saturating_sub(1).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(bin_edges
        .windows(2)
        .zip(counts)
        .map(|(w, count)| HistogramBin { lower: w[0], upper: w[1], count })
        .collect())
}

/// Default gross bin edges (currency units) for the histogram table.
pub const DEFAULT_GROSS_EDGES: [f64; 8] = [0.0, 1e6, 1e7, 5e7, 1e8, 2.5e8, 5e8, 1e9];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Column, ColumnRole, ColumnSpec};

    #[test]
    fn odd_length_order_statistics() {
        let s = summarize_values("x", &[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(s.mean, 3.0);
    }

    #[test]
    fn even_length_interpolated_quartiles() {
        // oracle: h = 3p; p=.25 -> 1 + .75 * 1; p=.5 -> 2 + .5; p=.75 -> 3 + .25
        let s = summarize_values("x", &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn constant_column_summary() {
        let s = summarize_values("x", &[2.0, 2.0, 2.0]);
        assert_eq!(s.stddev, 0.0);
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (2.0, 2.0, 2.0, 2.0, 2.0));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_r(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson_r(&[1.0, 2.0, 1.0, 2.0], &[1.0, 1.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]), Err(AnalysisError::ZeroVariance)));
    }

    #[test]
    fn f_score_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        assert_eq!(f_regression_score(&x, &y).unwrap(), f64::INFINITY);
        assert_eq!(f_regression_score(&[1.0, 2.0, 1.0, 2.0], &[1.0, 1.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(f_regression_score(&[3.0, 3.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.0);
        // Sxy = 6.5, Sxx = 5, Syy = 8.75 -> r^2 = 42.25 / 43.75, F = 42.25 / 1.5 * 2
        let f = f_regression_score(&x, &[1.0, 2.0, 3.0, 5.0]).unwrap();
        let expected = 42.25 / 1.5 * 2.0;
        assert!((f - 56.3).abs() < 0.05);
        assert!((f - expected).abs() < 1e-9);
    }

    #[test]
    fn select_k_best_ranks_and_marks() {
        let x = Matrix::from_columns(&[
            vec![1.0, 2.0, 1.0, 2.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![4.0, 3.0, 2.0, 1.5],
        ]);
        let y = [2.0, 4.0, 6.0, 8.0];
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let t = select_k_best(&x, &names, &y, 3).unwrap();
        assert_eq!(t.entries[0].feature, "b");
        assert_eq!(t.entries[0].score, f64::INFINITY);
        assert!(t.entries.iter().all(|e| e.selected));
        assert!(t.entries.windows(2).all(|w| w[0].score >= w[1].score));
        let t1 = select_k_best(&x, &names, &y, 1).unwrap();
        assert_eq!(t1.entries.iter().filter(|e| e.selected).count(), 1);
        assert!(select_k_best(&x, &names, &y, 4).is_err());
    }

    #[test]
    fn ties_break_by_name() {
        let x = Matrix::from_columns(&[vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]]);
        let names = vec!["z".to_string(), "m".to_string()];
        let t = select_k_best(&x, &names, &[1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(t.entries[0].feature, "m");
        assert!(t.entries[0].selected);
    }

    #[test]
    fn thresholding() {
        let table = FScoreTable {
            entries: [6569.0, 120.0, 99.0]
                .iter()
                .enumerate()
                .map(|(i, &s)| FScoreEntry { feature: format!("f{i}"), score: s, selected: true })
                .collect(),
            k_selected: 3,
        };
        let kept = threshold_scores(&table, 100.0);
        assert_eq!(kept.entries.len(), 2);
        assert_eq!(kept.entries[1].score, 120.0);
        assert_eq!(threshold_scores(&table, 0.0), table);
        assert!(threshold_scores(&table, f64::INFINITY).entries.is_empty());
    }

    #[test]
    fn histogram_binning() {
        let bins = gross_histogram(&[1.0, 5.0, 9.0], &[0.0, 5.0, 10.0]).unwrap();
        assert_eq!(bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 2]);
        let clamped = gross_histogram(&[-3.0, 10.0, 50.0], &[0.0, 5.0, 10.0]).unwrap();
        assert_eq!(clamped.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 2]);
        assert!(matches!(gross_histogram(&[1.0], &[0.0, 0.0]), Err(AnalysisError::BadBins)));
        assert!(matches!(gross_histogram(&[1.0], &[0.0]), Err(AnalysisError::BadBins)));
    }

    #[test]
    fn counts_sorted_by_frequency() {
        let schema = vec![ColumnSpec::new("country", ColumnKind::Categorical, ColumnRole::Feature)];
        let vals = ["US", "UK", "US", "FR", "UK", "US"];
        let col = Column::Categorical(vals.iter().map(|s| Some(s.to_string())).collect());
        let t = DataTable::new(schema, vec![col]).unwrap();
        let c = category_counts(&t, "country").unwrap();
        assert_eq!(c, vec![("US".into(), 3), ("UK".into(), 2), ("FR".into(), 1)]);
        assert_eq!(c.iter().map(|x| x.1).sum::<usize>(), t.row_count());
    }
}
