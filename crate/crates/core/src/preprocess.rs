//! Label encoding, log1p money transform and standard scaling.
//!
//! Stage order is fixed: encode, then log1p on `budget` and the target, then
//! scale the feature columns. Every fitted statistic comes from the table passed
//! to [`fit_pipeline`]; [`Pipeline::transform`] never refits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Column, ColumnKind, ColumnRole, ColumnSpec, DataError, DataTable};
use crate::matrix::Matrix;

pub const LOG_FEATURE: &str = "budget";

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("log1p undefined for value {0} (must be > -1)")]
    DomainError(f64),
    #[error("table schema does not match the fitted pipeline schema")]
    SchemaMismatch,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Sorted class list for one categorical column. A category's code is its index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryClasses {
    pub column: String,
    pub classes: Vec<String>,
}

impl CategoryClasses {
    pub fn code(&self, value: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(value)).ok()
    }

    /// Code used for categories not seen at fit time.
    pub fn unseen_code(&self) -> usize {
        self.classes.len()
    }

    pub fn decode(&self, code: usize) -> Option<&str> {
        self.classes.get(code).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EncoderMap {
    pub columns: Vec<CategoryClasses>,
}

impl EncoderMap {
    pub fn classes_for(&self, column: &str) -> Option<&CategoryClasses> {
        self.columns.iter().find(|c| c.column == column)
    }
}

/// A category seen at transform time that the encoder was not fitted on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnseenCategory {
    pub column: String,
    pub value: String,
}

pub fn fit_encoders(t: &DataTable) -> Result<EncoderMap, PreprocessError> {
    let mut columns = Vec::new();
    for spec in t.schema() {
        if spec.kind != ColumnKind::Categorical {
            continue;
        }
        let mut classes: Vec<String> =
            t.categorical_values(&spec.name)?.into_iter().map(str::to_owned).collect();
        classes.sort_unstable();
        classes.dedup();
        columns.push(CategoryClasses { column: spec.name.clone(), classes });
    }
    Ok(EncoderMap { columns })
}

/// Replaces categorical cells with their codes. Unseen categories get the
/// sentinel code `k` and are listed in the returned warnings (one per distinct
/// column/value pair, in first-seen order).
pub fn encode_table(
    t: &DataTable,
    e: &EncoderMap,
) -> Result<(DataTable, Vec<UnseenCategory>), PreprocessError> {
    let mut warnings: Vec<UnseenCategory> = Vec::new();
    let mut out = Vec::with_capacity(t.columns().len());
    for (spec, column) in t.schema().iter().zip(t.columns()) {
        match column {
            Column::Numeric(v) => out.push(Column::Numeric(v.clone())),
            Column::Categorical(v) => {
                let classes = e
                    .classes_for(&spec.name)
                    .ok_or(PreprocessError::SchemaMismatch)?;
                let codes = v
                    .iter()
                    .map(|cell| {
                        cell.as_deref().map(|value| match classes.code(value) {
                            Some(c) => c as f64,
                            None => {
                                let w = UnseenCategory {
                                    column: spec.name.clone(),
                                    value: value.to_owned(),
                                };
                                if !warnings.contains(&w) {
                                    warnings.push(w);
                                }
                                classes.unseen_code() as f64
                            }
                        })
                    })
                    .collect();
                out.push(Column::Numeric(codes));
            }
        }
    }
    Ok((DataTable::new(t.schema().to_vec(), out)?, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledColumn {
    pub column: String,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalerParams {
    pub columns: Vec<ScaledColumn>,
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation (divides by `n`).
pub(crate) fn population_stddev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Mean and population stddev of each listed column of an all-numeric table.
pub fn fit_scaler(t: &DataTable, feature_columns: &[&str]) -> Result<ScalerParams, PreprocessError> {
    let columns = feature_columns
        .iter()
        .map(|&name| {
            let v = t.numeric_values(name)?;
            Ok(ScaledColumn { column: name.to_owned(), mean: mean(&v), stddev: population_stddev(&v) })
        })
        .collect::<Result<_, PreprocessError>>()?;
    Ok(ScalerParams { columns })
}

#[inline]
fn scale_value(x: f64, c: &ScaledColumn) -> f64 {
    let divisor = if c.stddev > 0.0 { c.stddev } else { 1.0 };
    (x - c.mean) / divisor
}

/// `(x - mean) / stddev`, with divisor 1 for zero-variance columns.
pub fn apply_scaler(t: &DataTable, p: &ScalerParams) -> Result<DataTable, PreprocessError> {
    let mut columns = t.columns().to_vec();
    for c in &p.columns {
        let idx = t.column_index(&c.column).ok_or(PreprocessError::SchemaMismatch)?;
        match &mut columns[idx] {
            Column::Numeric(v) => v.iter_mut().flatten().for_each(|x| *x = scale_value(*x, c)),
            Column::Categorical(_) => return Err(PreprocessError::SchemaMismatch),
        }
    }
    Ok(DataTable::new(t.schema().to_vec(), columns)?)
}

pub fn log1p_transform(values: &[f64]) -> Result<Vec<f64>, PreprocessError> {
    values
        .iter()
        .map(|&x| if x > -1.0 { Ok(x.ln_1p()) } else { Err(PreprocessError::DomainError(x)) })
        .collect()
}

pub fn expm1_inverse(values: &[f64]) -> Vec<f64> {
    values.iter().map(|x| x.exp_m1()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub scale: bool,
    pub log_money: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { scale: false, log_money: true }
    }
}

/// A fully fitted preprocessing pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub encoder: EncoderMap,
    pub scaler: Option<ScalerParams>,
    pub log_budget: bool,
    pub log_target: bool,
    pub fitted_on_schema: Vec<ColumnSpec>,
}

pub fn fit_pipeline(t: &DataTable, config: PipelineConfig) -> Result<Pipeline, PreprocessError> {
    let encoder = fit_encoders(t)?;
    let mut pipeline = Pipeline {
        encoder,
        scaler: None,
        log_budget: config.log_money,
        log_target: config.log_money,
        fitted_on_schema: t.schema().to_vec(),
    };
    if config.scale {
        let (encoded, _) = encode_table(t, &pipeline.encoder)?;
        let logged = pipeline.apply_log(&encoded)?;
        let names = pipeline.feature_names();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        pipeline.scaler = Some(fit_scaler(&logged, &names)?);
    }
    Ok(pipeline)
}

fn map_numeric_column(
    t: &DataTable,
    name: &str,
    f: impl Fn(&[f64]) -> Result<Vec<f64>, PreprocessError>,
) -> Result<DataTable, PreprocessError> {
    let Some(idx) = t.column_index(name) else {
        return Ok(t.clone());
    };
    let mut columns = t.columns().to_vec();
    if let Column::Numeric(v) = &columns[idx] {
        let present: Vec<f64> = v.iter().flatten().copied().collect();
        let mut mapped = f(&present)?.into_iter();
        let new: Vec<Option<f64>> = v.iter().map(|x| x.map(|_| mapped.next().unwrap())).collect();
        columns[idx] = Column::Numeric(new);
    }
    Ok(DataTable::new(t.schema().to_vec(), columns)?)
}

impl Pipeline {
    pub fn feature_names(&self) -> Vec<String> {
        self.fitted_on_schema
            .iter()
            .filter(|c| c.role == ColumnRole::Feature)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn target_name(&self) -> Option<&str> {
        self.fitted_on_schema
            .iter()
            .find(|c| c.role == ColumnRole::Target)
            .map(|c| c.name.as_str())
    }

    fn features_only_schema(&self) -> Vec<ColumnSpec> {
        self.fitted_on_schema
            .iter()
            .filter(|c| c.role == ColumnRole::Feature)
            .cloned()
            .collect()
    }

    fn apply_log(&self, t: &DataTable) -> Result<DataTable, PreprocessError> {
        let mut t = t.clone();
        if self.log_budget {
            t = map_numeric_column(&t, LOG_FEATURE, log1p_transform)?;
        }
        if self.log_target {
            if let Some(target) = self.target_name() {
                t = map_numeric_column(&t, target, log1p_transform)?;
            }
        }
        Ok(t)
    }

    fn feature_matrix(&self, t: &DataTable) -> Result<(Matrix, Vec<UnseenCategory>), PreprocessError> {
        let (encoded, warnings) = encode_table(t, &self.encoder)?;
        let mut prepared = self.apply_log(&encoded)?;
        if let Some(scaler) = &self.scaler {
            prepared = apply_scaler(&prepared, scaler)?;
        }
        let columns = self
            .feature_names()
            .iter()
            .map(|n| prepared.numeric_values(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((Matrix::from_columns(&columns), warnings))
    }

    /// Feature matrix and (transformed) target vector for a table with the fitted schema.
    pub fn transform(&self, t: &DataTable) -> Result<(Matrix, Vec<f64>), PreprocessError> {
        if t.schema() != self.fitted_on_schema.as_slice() {
            return Err(PreprocessError::SchemaMismatch);
        }
        let (x, _) = self.feature_matrix(t)?;
        let target = self.target_name().ok_or(PreprocessError::SchemaMismatch)?;
        let mut y = t.numeric_values(target)?;
        if self.log_target {
            y = log1p_transform(&y)?;
        }
        Ok((x, y))
    }

    /// Feature matrix for a table holding either the full fitted schema or just
    /// its feature columns. Unseen categories are reported, not rejected.
    pub fn transform_features(
        &self,
        t: &DataTable,
    ) -> Result<(Matrix, Vec<UnseenCategory>), PreprocessError> {
        if t.schema() != self.fitted_on_schema.as_slice()
            && t.schema() != self.features_only_schema().as_slice()
        {
            return Err(PreprocessError::SchemaMismatch);
        }
        self.feature_matrix(t)
    }

    /// Maps model-space target values back to currency units.
    pub fn inverse_target(&self, values: &[f64]) -> Vec<f64> {
        if self.log_target {
            expm1_inverse(values)
        } else {
            values.to_vec()
        }
    }
}
