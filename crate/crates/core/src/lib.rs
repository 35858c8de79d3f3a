//! Supervised regression toolkit for predicting a movie's box-office gross
//! from 14 tabular features.
//!
//! The crate covers the full path from a raw CSV to a persisted model:
//! [`dataset`] loads and cleans the table, [`preprocess`] encodes, log-transforms
//! and scales it, [`models`] fits one of six regressors, [`tuning`] runs k-fold
//! grid search, [`metrics`] scores predictions and [`persist`] saves artifacts.
//! [`cli`] wires these into the `mrp` command-line tool.

pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod persist;
pub mod preprocess;
pub mod rng;
pub mod tuning;

pub use dataset::{ColumnKind, ColumnRole, ColumnSpec, DataError, DataTable, SplitIndices};
pub use matrix::Matrix;
pub use metrics::{EvalReport, MetricError};
pub use models::{Model, ModelError, ModelKind, ModelParams};
pub use persist::{ModelArtifact, PersistError};
pub use preprocess::{Pipeline, PipelineConfig, PreprocessError};
