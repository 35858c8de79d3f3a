//! Versioned, canonical JSON model artifacts (`.mrp.json`).
//!
//! Keys are written in lexicographic order and floats in their shortest
//! round-trip decimal form, so saving the same artifact always yields the same
//! bytes and every float reloads bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{ColumnSpec, DataTable};
use crate::models::{Model, ModelError, ModelKind, ModelParams};
use crate::preprocess::{Pipeline, PreprocessError, UnseenCategory};

pub const FORMAT_VERSION: u32 = 1;
pub const ARTIFACT_EXTENSION: &str = ".mrp.json";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("unsupported artifact format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("corrupt artifact at `{path}`: {message}")]
    CorruptArtifact { path: String, message: String },
    #[error("artifact schema hash does not match its pipeline schema")]
    SchemaHashMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub params: ModelParams,
    pub schema_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub created_utc: String,
    pub pipeline: Pipeline,
    pub model_kind: ModelKind,
    pub model_payload: Model,
    pub training_meta: TrainingMeta,
}

/// SHA-256 (hex) over `name:kind:role` lines of the schema.
pub fn schema_hash(schema: &[ColumnSpec]) -> String {
    let mut h = Sha256::new();
    for c in schema {
        h.update(c.to_string().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Creation timestamp for new artifacts. Honors `SOURCE_DATE_EPOCH`; otherwise
/// the Unix epoch, which keeps repeated runs byte-identical.
pub fn artifact_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

impl ModelArtifact {
    pub fn new(
        pipeline: Pipeline,
        model_kind: ModelKind,
        model_payload: Model,
        seed: u64,
        params: ModelParams,
    ) -> Self {
        let schema_hash = schema_hash(&pipeline.fitted_on_schema);
        Self {
            format_version: FORMAT_VERSION,
            created_utc: artifact_timestamp(),
            pipeline,
            model_kind,
            model_payload,
            training_meta: TrainingMeta { seed, params, schema_hash },
        }
    }

    pub fn check_schema(&self) -> Result<(), PersistError> {
        if schema_hash(&self.pipeline.fitted_on_schema) != self.training_meta.schema_hash {
            return Err(PersistError::SchemaHashMismatch);
        }
        Ok(())
    }

    /// Model-space predictions for a table (full schema or features only).
    pub fn predict_table(&self, t: &DataTable) -> Result<(Vec<f64>, Vec<UnseenCategory>), PersistError> {
        self.check_schema()?;
        let (x, warnings) = self.pipeline.transform_features(t)?;
        Ok((self.model_payload.predict(&x)?, warnings))
    }

    /// Predictions in currency units (target transform inverted).
    pub fn predict_gross(&self, t: &DataTable) -> Result<(Vec<f64>, Vec<UnseenCategory>), PersistError> {
        let (p, w) = self.predict_table(t)?;
        Ok((self.pipeline.inverse_target(&p), w))
    }

    pub fn to_canonical_json(&self) -> String {
        with_deep_stack(|| {
            let value = serde_json::to_value(self).expect("artifact serializes");
            let mut s =
                serde_json::to_string_pretty(&canonicalize(value)).expect("value serializes");
            s.push('\n');
            s
        })
    }

    pub fn from_json(text: &str) -> Result<Self, PersistError> {
        with_deep_stack(|| Self::from_json_inner(text))
    }

    fn from_json_inner(text: &str) -> Result<Self, PersistError> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let value = Value::deserialize(&mut de)
            .and_then(|v| de.end().map(|_| v))
            .map_err(|e| PersistError::CorruptArtifact { path: "$".into(), message: e.to_string() })?;
        match value.get("format_version").and_then(Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(found) => return Err(PersistError::VersionMismatch { found }),
            None => {
                return Err(PersistError::CorruptArtifact {
                    path: "format_version".into(),
                    message: "missing or not an unsigned integer".into(),
                })
            }
        }
        let artifact: ModelArtifact = serde_path_to_error::deserialize(value).map_err(|e| {
            PersistError::CorruptArtifact { path: e.path().to_string(), message: e.inner().to_string() }
        })?;
        Ok(artifact)
    }
}

/// Stack size for (de)serializing nested trees; unlimited-depth trees can nest
/// hundreds of levels.
const DEEP_STACK_BYTES: usize = 512 << 20;

fn with_deep_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(DEEP_STACK_BYTES)
            .spawn_scoped(s, f)
            .expect("spawn serialization thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

/// Rebuilds objects with keys inserted in sorted order.
fn canonicalize(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> =
                map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

pub fn save(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<(), PersistError> {
    std::fs::write(path, artifact.to_canonical_json())?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelArtifact, PersistError> {
    let text = std::fs::read_to_string(path)?;
    ModelArtifact::from_json(&text)
}
