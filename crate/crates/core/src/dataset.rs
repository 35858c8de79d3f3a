//! Loading, cleaning and splitting the movie table.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Rng;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const TARGET_COLUMN: &str = "gross";

/// The 14 feature columns, in canonical order.
pub const FEATURE_NAMES: [&str; 14] = [
    "name", "rating", "genre", "year", "released", "score", "votes", "director", "writer", "star",
    "country", "budget", "company", "runtime",
];

const NUMERIC_NAMES: [&str; 6] = ["year", "score", "votes", "budget", "runtime", "gross"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("cannot parse numeric cell at data row {row}, column `{column}`")]
    ParseError { row: usize, column: String },
    #[error("no rows left after dropping incomplete rows")]
    EmptyResult,
    #[error("split leaves an empty partition ({n} rows, test fraction {test_fraction})")]
    DegenerateSplit { n: usize, test_fraction: f64 },
    #[error("invalid table: {0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        Self { name: name.into(), kind, role }
    }
}

impl fmt::Display for ColumnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
        };
        let role = match self.role {
            ColumnRole::Feature => "feature",
            ColumnRole::Target => "target",
        };
        write!(f, "{}:{}:{}", self.name, kind, role)
    }
}

/// The canonical movie schema: 14 features followed by the `gross` target.
pub fn movie_schema() -> Vec<ColumnSpec> {
    let kind_of = |n: &str| {
        if NUMERIC_NAMES.contains(&n) {
            ColumnKind::Numeric
        } else {
            ColumnKind::Categorical
        }
    };
    FEATURE_NAMES
        .iter()
        .map(|&n| ColumnSpec::new(n, kind_of(n), ColumnRole::Feature))
        .chain(std::iter::once(ColumnSpec::new(
            TARGET_COLUMN,
            ColumnKind::Numeric,
            ColumnRole::Target,
        )))
        .collect()
}

/// The canonical schema without its target column, as used for prediction requests.
pub fn movie_feature_schema() -> Vec<ColumnSpec> {
    movie_schema().into_iter().filter(|c| c.role == ColumnRole::Feature).collect()
}

/// One column's cells. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Categorical(v) => v[row].is_none(),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => {
                Column::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// Rectangular column store. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    schema: Vec<ColumnSpec>,
    columns: Vec<Column>,
    row_count: usize,
}

impl DataTable {
    /// Checks that there is one column per spec and all columns have equal length.
    pub fn new(schema: Vec<ColumnSpec>, columns: Vec<Column>) -> Result<Self, DataError> {
        if schema.len() != columns.len() {
            return Err(DataError::Invalid(format!(
                "{} columns for {} schema entries",
                columns.len(),
                schema.len()
            )));
        }
        let row_count = columns.first().map_or(0, Column::len);
        if let Some((spec, _)) = schema.iter().zip(&columns).find(|(_, c)| c.len() != row_count) {
            return Err(DataError::Invalid(format!("column `{}` has a different length", spec.name)));
        }
        Ok(Self { schema, columns, row_count })
    }

    pub fn schema(&self) -> &[ColumnSpec] {
        &self.schema
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    /// The values of a numeric column with no missing cells.
    pub fn numeric_values(&self, name: &str) -> Result<Vec<f64>, DataError> {
        match self.column(name) {
            Some(Column::Numeric(v)) => v
                .iter()
                .enumerate()
                .map(|(row, x)| x.ok_or_else(|| DataError::ParseError { row, column: name.into() }))
                .collect(),
            Some(Column::Categorical(_)) => {
                Err(DataError::Invalid(format!("column `{name}` is not numeric")))
            }
            None => Err(DataError::MissingColumn(name.into())),
        }
    }

    /// The values of a categorical column with no missing cells.
    pub fn categorical_values(&self, name: &str) -> Result<Vec<&str>, DataError> {
        match self.column(name) {
            Some(Column::Categorical(v)) => v
                .iter()
                .enumerate()
                .map(|(row, x)| {
                    x.as_deref().ok_or_else(|| DataError::ParseError { row, column: name.into() })
                })
                .collect(),
            Some(Column::Numeric(_)) => {
                Err(DataError::Invalid(format!("column `{name}` is not categorical")))
            }
            None => Err(DataError::MissingColumn(name.into())),
        }
    }

    pub fn row_is_complete(&self, row: usize) -> bool {
        self.columns.iter().all(|c| !c.is_missing(row))
    }

    /// A new table holding `rows` (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            row_count: rows.len(),
        }
    }
}

fn is_missing_marker(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// A cell that is neither a number nor a missing marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotNumeric;

/// Parses a numeric cell. `Ok(None)` for a missing marker.
pub fn parse_numeric_cell(cell: &str) -> Result<Option<f64>, NotNumeric> {
    if is_missing_marker(cell) {
        return Ok(None);
    }
    let cleaned: String = cell.trim().trim_matches('"').chars().filter(|&c| c != ',').collect();
    let cleaned = cleaned.trim();
    if is_missing_marker(cleaned) {
        return Ok(None);
    }
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(NotNumeric),
    }
}

fn parse_categorical_cell(cell: &str) -> Option<String> {
    if is_missing_marker(cell) {
        None
    } else {
        Some(cell.to_string())
    }
}

/// Reads a CSV file with a header row. Columns are matched to `schema` by
/// case-insensitive name and reordered to schema order; extra columns are ignored.
pub fn load_table(path: impl AsRef<Path>, schema: &[ColumnSpec]) -> Result<DataTable, DataError> {
    let file = std::fs::File::open(path)?;
    read_table(file, schema)
}

/// Same as [`load_table`] but from any reader.
pub fn read_table<R: std::io::Read>(reader: R, schema: &[ColumnSpec]) -> Result<DataTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut positions = Vec::with_capacity(schema.len());
    for spec in schema {
        let pos = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(&spec.name))
            .ok_or_else(|| DataError::MissingColumn(spec.name.clone()))?;
        positions.push(pos);
    }

    let mut columns: Vec<Column> = schema
        .iter()
        .map(|s| match s.kind {
            ColumnKind::Numeric => Column::Numeric(Vec::new()),
            ColumnKind::Categorical => Column::Categorical(Vec::new()),
        })
        .collect();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for ((spec, &pos), column) in schema.iter().zip(&positions).zip(columns.iter_mut()) {
            let cell = record.get(pos).unwrap_or("");
            match column {
                Column::Numeric(v) => {
                    let parsed = parse_numeric_cell(cell)
                        .map_err(|_| DataError::ParseError { row, column: spec.name.clone() })?;
                    v.push(parsed);
                }
                Column::Categorical(v) => v.push(parse_categorical_cell(cell)),
            }
        }
    }
    DataTable::new(schema.to_vec(), columns)
}

/// Keeps only rows with no missing cell in any schema column, in original order.
pub fn drop_incomplete_rows(t: &DataTable) -> Result<DataTable, DataError> {
    let keep: Vec<usize> = (0..t.row_count()).filter(|&r| t.row_is_complete(r)).collect();
    if keep.is_empty() {
        return Err(DataError::EmptyResult);
    }
    Ok(t.select_rows(&keep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Shuffles `0..n` with [`Rng`] and takes the first `floor(test_fraction * n)` as test.
pub fn split_indices(n: usize, seed: u64, test_fraction: f64) -> Result<SplitIndices, DataError> {
    let degenerate = DataError::DegenerateSplit { n, test_fraction };
    if n < 2 || !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(degenerate);
    }
    let n_test = (test_fraction * n as f64).floor() as usize;
    if n_test == 0 || n_test >= n {
        return Err(degenerate);
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let train = order.split_off(n_test);
    Ok(SplitIndices { train, test: order, seed, test_fraction })
}

pub fn train_test_split(
    t: &DataTable,
    seed: u64,
    test_fraction: f64,
) -> Result<SplitIndices, DataError> {
    split_indices(t.row_count(), seed, test_fraction)
}
