//! Python bindings for `mrp_core`.
//!
//! ```python
//! import mrp
//! train, test = mrp.train("movies.csv", "gbm", "gbm.mrp.json", grid="default")
//! art = mrp.Artifact.load("gbm.mrp.json")
//! gross, warnings = art.predict({"name": "New Film", "budget": 5e7, ...})
//! ```

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mrp_core::cli::{cmd_select_features, cmd_train, PredictRequest, SelectArgs, TrainArgs};
use mrp_core::dataset::{self, movie_schema, FEATURE_NAMES};
use mrp_core::matrix::Matrix;
use mrp_core::models::{self, ModelKind, ModelParams, ParamValue};
use mrp_core::{analysis, metrics, persist, rng, tuning};

create_exception!(mrp, MrpError, PyException, "Any error raised by the mrp toolkit.");

fn err(e: impl std::fmt::Display) -> PyErr {
    MrpError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!(
            "row {bad} has {} values, expected {cols}",
            rows[bad].len()
        )));
    }
    Ok(Matrix::from_rows(&rows))
}

fn parse_kind(kind: &str) -> PyResult<ModelKind> {
    kind.parse().map_err(|_| {
        PyValueError::new_err(format!(
            "unknown model `{kind}` (expected one of: linear, tree, bagging, forest, xgb, gbm)"
        ))
    })
}

// ---------------------------------------------------------------------------
// metrics, selection, splitting

#[pyfunction]
fn r2(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<f64> {
    metrics::r2(&y, &yhat).map_err(err)
}

/// Returns `(percent, excluded)`; rows with |y| below 1e-8 are excluded.
#[pyfunction]
fn mape(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<(f64, usize)> {
    let m = metrics::mape(&y, &yhat).map_err(err)?;
    Ok((m.percent, m.excluded))
}

#[pyfunction]
fn msle(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<f64> {
    metrics::msle(&y, &yhat).map_err(err)
}

#[pyfunction]
fn mse(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<f64> {
    metrics::mse(&y, &yhat).map_err(err)
}

#[pyfunction]
fn f_regression_score(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    analysis::f_regression_score(&x, &y).map_err(err)
}

#[pyfunction]
fn pearson_r(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    analysis::pearson_r(&x, &y).map_err(err)
}

/// `(train_indices, test_indices)` for `n` rows.
#[pyfunction]
#[pyo3(signature = (n, seed = dataset::DEFAULT_SEED, test_fraction = dataset::DEFAULT_TEST_FRACTION))]
fn split_indices(n: usize, seed: u64, test_fraction: f64) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let s = dataset::split_indices(n, seed, test_fraction).map_err(err)?;
    Ok((s.train, s.test))
}

#[pyfunction]
#[pyo3(signature = (n, k = tuning::DEFAULT_FOLDS, seed = dataset::DEFAULT_SEED))]
fn kfold_indices(n: usize, k: usize, seed: u64) -> PyResult<Vec<Vec<usize>>> {
    tuning::kfold_indices(n, k, seed).map_err(err)
}

#[pyfunction]
fn derive_seed(master: u64, stream: u64) -> u64 {
    rng::derive_seed(master, stream)
}

/// Univariate F scores against raw gross on the cleaned CSV, best first, as
/// `(feature, score, selected)` tuples.
#[pyfunction]
#[pyo3(signature = (data, k = 10, expand_categories = false))]
fn select_features(py: Python<'_>, data: PathBuf, k: usize, expand_categories: bool) -> PyResult<Vec<(String, f64, bool)>> {
    let dir = std::env::temp_dir().join(format!("mrp-select-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(err)?;
    let args = SelectArgs { data, k, min_score: None, expand_categories, out: dir.join("fscores.csv") };
    let table = py.detach(|| cmd_select_features(&args, &mut std::io::sink())).map_err(err);
    let _ = std::fs::remove_dir_all(&dir);
    Ok(table?.entries.into_iter().map(|e| (e.feature, e.score, e.selected)).collect())
}

// ---------------------------------------------------------------------------
// models

/// A fitted regression model.
#[pyclass(module = "mrp", name = "Model")]
struct PyModel {
    kind: ModelKind,
    inner: models::Model,
}

#[pymethods]
impl PyModel {
    /// Fits `kind` (linear, tree, bagging, forest, xgb, gbm) on rows `x` and
    /// targets `y`. Keyword arguments override hyperparameters, e.g.
    /// `n_estimators=200, max_depth=None`.
    #[staticmethod]
    #[pyo3(signature = (kind, x, y, seed = dataset::DEFAULT_SEED, **params))]
    fn fit(
        py: Python<'_>,
        kind: &str,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        seed: u64,
        params: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<Self> {
        let kind = parse_kind(kind)?;
        let mut p = ModelParams::defaults(kind);
        if let Some(params) = params {
            for (name, value) in params.iter() {
                let name: String = name.extract()?;
                let value = if value.is_none() { ParamValue(None) } else { ParamValue(Some(value.extract()?)) };
                p.set(&name, value).map_err(err)?;
            }
        }
        let x = to_matrix(x)?;
        let inner = py.detach(|| models::fit_model(kind, &p, &x, &y, seed)).map_err(err)?;
        Ok(Self { kind, inner })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.kind.id()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.inner.predict(&to_matrix(x)?).map_err(err)
    }

    /// `(iteration, r2)` pairs for boosting models, starting at iteration 0.
    fn staged_train_r2(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Vec<(usize, f64)>> {
        match &self.inner {
            models::Model::Ensemble(e) => models::staged_train_r2(e, &to_matrix(x)?, &y).map_err(err),
            _ => Err(err(models::ModelError::NotBoosting)),
        }
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, n_features={})", self.kind.id(), self.inner.n_features())
    }
}

// ---------------------------------------------------------------------------
// artifacts and the training pipeline

/// One row of the train/test report.
#[pyclass(module = "mrp", name = "EvalReport", get_all, frozen)]
struct PyEvalReport {
    model: String,
    split: String,
    r2: f64,
    mape_percent: f64,
    mape_excluded: usize,
    msle: f64,
    mse: f64,
    n: usize,
    target_space: String,
}

impl From<metrics::EvalReport> for PyEvalReport {
    fn from(r: metrics::EvalReport) -> Self {
        Self {
            model: r.model,
            split: r.split.as_str().into(),
            r2: r.r2,
            mape_percent: r.mape_percent,
            mape_excluded: r.mape_excluded,
            msle: r.msle,
            mse: r.mse,
            n: r.n,
            target_space: r.target_space.as_str().into(),
        }
    }
}

#[pymethods]
impl PyEvalReport {
    fn __repr__(&self) -> String {
        format!(
            "EvalReport(model={:?}, split={:?}, r2={:.4}, mape_percent={:.2}, n={}, target_space={:?})",
            self.model, self.split, self.r2, self.mape_percent, self.n, self.target_space
        )
    }
}

/// A saved pipeline plus model (`.mrp.json`).
#[pyclass(module = "mrp", name = "Artifact")]
struct PyArtifact {
    inner: persist::ModelArtifact,
}

fn cell_text(value: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = value.extract::<String>() {
        Ok(s)
    } else if let Ok(i) = value.extract::<i64>() {
        Ok(i.to_string())
    } else {
        Ok(value.extract::<f64>()?.to_string())
    }
}

#[pymethods]
impl PyArtifact {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: persist::load(path).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: persist::ModelArtifact::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_canonical_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        persist::save(&self.inner, path).map_err(err)
    }

    #[getter]
    fn model_kind(&self) -> &'static str {
        self.inner.model_kind.id()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.training_meta.seed
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.pipeline.feature_names()
    }

    /// The fitted model alone.
    fn model(&self) -> PyModel {
        PyModel { kind: self.inner.model_kind, inner: self.inner.model_payload.clone() }
    }

    /// Predicted gross for one movie given as a dict of the 14 features
    /// (strings or numbers). Returns `(gross, warnings)`, where warnings name
    /// categories never seen in training.
    fn predict(&self, record: &Bound<'_, PyDict>) -> PyResult<(f64, Vec<String>)> {
        let mut values = Vec::with_capacity(FEATURE_NAMES.len());
        for name in FEATURE_NAMES {
            let v = record
                .get_item(name)?
                .ok_or_else(|| err(format!("invalid field `{name}`")))?;
            values.push(cell_text(&v)?);
        }
        let request = PredictRequest::new(values, None).map_err(err)?;
        let table = request.to_table().map_err(err)?;
        let (gross, warnings) = self.inner.predict_gross(&table).map_err(err)?;
        let warnings = warnings.into_iter().map(|w| format!("unseen {} `{}`", w.column, w.value)).collect();
        Ok((gross[0], warnings))
    }

    /// Predicted gross for every complete row of a CSV file.
    fn predict_csv(&self, py: Python<'_>, path: PathBuf) -> PyResult<Vec<f64>> {
        py.detach(|| {
            let raw = dataset::load_table(&path, &movie_schema()).map_err(|e| e.to_string())?;
            let clean = dataset::drop_incomplete_rows(&raw).map_err(|e| e.to_string())?;
            self.inner.predict_gross(&clean).map(|(g, _)| g).map_err(|e| e.to_string())
        })
        .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Artifact(model_kind={:?}, seed={})", self.inner.model_kind.id(), self.inner.training_meta.seed)
    }
}

/// Runs the full training command: clean, split, optional grid search, fit,
/// evaluate and save the artifact (plus report files) to `out`. Returns the
/// `(train, test)` reports.
#[pyfunction]
#[pyo3(signature = (
    data, model, out, seed = dataset::DEFAULT_SEED, test_fraction = dataset::DEFAULT_TEST_FRACTION,
    grid = None, folds = tuning::DEFAULT_FOLDS, scale = None, log_money = true, raw_space_metrics = false,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    data: PathBuf,
    model: &str,
    out: PathBuf,
    seed: u64,
    test_fraction: f64,
    grid: Option<String>,
    folds: usize,
    scale: Option<bool>,
    log_money: bool,
    raw_space_metrics: bool,
) -> PyResult<(PyEvalReport, PyEvalReport)> {
    let kind = parse_kind(model)?;
    let args = TrainArgs {
        data,
        model: model.to_owned(),
        seed,
        test_fraction,
        grid,
        folds,
        no_scale: !scale.unwrap_or(kind == ModelKind::Linear),
        no_log_money: !log_money,
        track_r2: None,
        raw_space_metrics,
        out,
    };
    let outcome = py.detach(|| cmd_train(&args, &mut std::io::sink())).map_err(err)?;
    Ok((outcome.train.into(), outcome.test.into()))
}

#[pymodule]
fn mrp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MrpError", m.py().get_type::<MrpError>())?;
    m.add("FEATURE_NAMES", FEATURE_NAMES.to_vec())?;
    m.add("MODEL_KINDS", ModelKind::MENU.iter().map(|k| k.id()).collect::<Vec<_>>())?;
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(mape, m)?)?;
    m.add_function(wrap_pyfunction!(msle, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(f_regression_score, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(split_indices, m)?)?;
    m.add_function(wrap_pyfunction!(kfold_indices, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(select_features, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyArtifact>()?;
    m.add_class::<PyEvalReport>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_rejected() {
        Python::initialize();
        assert!(to_matrix(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        let m = to_matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
    }

    #[test]
    fn model_roundtrip_through_python_types() {
        Python::initialize();
        Python::attach(|py| {
            let params = PyDict::new(py);
            params.set_item("n_estimators", 5).unwrap();
            params.set_item("max_depth", py.None()).unwrap();
            let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
            let y = vec![0.0, 0.0, 1.0, 1.0];
            let m = PyModel::fit(py, "bagging", x.clone(), y, 1, Some(&params)).unwrap();
            assert_eq!(m.kind(), "bagging");
            assert_eq!(m.predict(x).unwrap().len(), 4);
            assert!(PyModel::fit(py, "svm", vec![vec![0.0]], vec![0.0], 1, None).is_err());
        });
    }
}
