//! The six regression model families and a uniform fit/predict surface.

pub mod ensemble;
pub mod linear;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{
    default_forest_max_features, fit_bagging, fit_gbm, fit_random_forest, fit_xgb,
    staged_train_r2, EnsembleKind, EnsembleModel,
};
pub use linear::{fit_ols, fit_ols_detailed, LinearModel};
pub use tree::{fit_cart, RegressionTree, TreeConfig, TreeNode};

use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("normal equations are singular even after ridge regularization")]
    SingularAfterRidge,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("no training rows")]
    EmptyData,
    #[error("staged R^2 is only defined for boosting models")]
    NotBoosting,
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}

/// Model menu, numbered 1-6 in this order for the interactive CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "tree")]
    Tree,
    #[serde(rename = "bagging")]
    Bagging,
    #[serde(rename = "forest")]
    RandomForest,
    #[serde(rename = "xgb")]
    Xgb,
    #[serde(rename = "gbm")]
    Gbm,
}

impl ModelKind {
    pub const MENU: [ModelKind; 6] = [
        ModelKind::Linear,
        ModelKind::Tree,
        ModelKind::Bagging,
        ModelKind::RandomForest,
        ModelKind::Xgb,
        ModelKind::Gbm,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Tree => "tree",
            ModelKind::Bagging => "bagging",
            ModelKind::RandomForest => "forest",
            ModelKind::Xgb => "xgb",
            ModelKind::Gbm => "gbm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Linear => "Linear Regression",
            ModelKind::Tree => "Decision Tree",
            ModelKind::Bagging => "Bagging",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::Xgb => "XGBoost",
            ModelKind::Gbm => "Gradient Boosting",
        }
    }

    pub fn is_boosting(self) -> bool {
        matches!(self, ModelKind::Gbm | ModelKind::Xgb)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::MENU
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| ModelError::InvalidParam(format!("unknown model `{s}`")))
    }
}

/// Tunable parameter names accepted by [`ModelParams::set`] and grid files.
pub const PARAM_NAMES: [&str; 8] = [
    "n_estimators",
    "max_depth",
    "learning_rate",
    "min_samples_split",
    "min_samples_leaf",
    "max_features",
    "reg_lambda",
    "reg_gamma",
];

/// A grid/parameter value: a number, or `null` for "unlimited"/"all".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamValue(pub Option<f64>);

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: Option<usize>,
    pub reg_lambda: f64,
    pub reg_gamma: f64,
}

impl ModelParams {
    /// Unlimited-depth trees with 100 members for bagging and forests;
    /// 100 depth-3 trees at learning rate 0.1 for boosting (lambda 1, gamma 0).
    pub fn defaults(kind: ModelKind) -> Self {
        let max_depth = if kind.is_boosting() { Some(3) } else { None };
        Self {
            n_estimators: 100,
            max_depth,
            learning_rate: 0.1,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            reg_lambda: 1.0,
            reg_gamma: 0.0,
        }
    }

    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
        }
    }

    pub fn set(&mut self, name: &str, value: ParamValue) -> Result<(), ModelError> {
        fn count(name: &str, v: Option<f64>) -> Result<Option<usize>, ModelError> {
            match v {
                None => Ok(None),
                Some(x) if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 => {
                    Ok(Some(x as usize))
                }
                Some(x) => Err(ModelError::InvalidParam(format!(
                    "{name} must be a non-negative integer, got {x}"
                ))),
            }
        }
        fn required<T>(name: &str, v: Option<T>) -> Result<T, ModelError> {
            v.ok_or_else(|| ModelError::InvalidParam(format!("{name} cannot be null")))
        }
        let v = value.0;
        match name {
            "n_estimators" => self.n_estimators = required(name, count(name, v)?)?,
            "max_depth" => self.max_depth = count(name, v)?,
            "min_samples_split" => self.min_samples_split = required(name, count(name, v)?)?,
            "min_samples_leaf" => self.min_samples_leaf = required(name, count(name, v)?)?,
            "max_features" => self.max_features = count(name, v)?,
            "learning_rate" => self.learning_rate = required(name, v)?,
            "reg_lambda" => self.reg_lambda = required(name, v)?,
            "reg_gamma" => self.reg_gamma = required(name, v)?,
            other => return Err(ModelError::InvalidParam(format!("unknown parameter `{other}`"))),
        }
        Ok(())
    }
}

/// Any fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Linear(LinearModel),
    Tree(RegressionTree),
    Ensemble(EnsembleModel),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.coefficients.len(),
            Model::Tree(t) => t.n_features,
            Model::Ensemble(e) => e.n_features,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64, ModelError> {
        if row.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch { expected: self.n_features(), got: row.len() });
        }
        Ok(match self {
            Model::Linear(m) => m.predict_row(row),
            Model::Tree(t) => t.predict_row(row),
            Model::Ensemble(e) => e.predict_row(row),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        if x.cols() != self.n_features() {
            return Err(ModelError::DimensionMismatch { expected: self.n_features(), got: x.cols() });
        }
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

/// Fits `kind` with `params`. `seed` drives bootstrap and feature sampling;
/// linear and boosting fits ignore it.
pub fn fit_model(
    kind: ModelKind,
    params: &ModelParams,
    x: &Matrix,
    y: &[f64],
    seed: u64,
) -> Result<Model, ModelError> {
    let cfg = params.tree_config();
    Ok(match kind {
        ModelKind::Linear => Model::Linear(fit_ols(x, y)?),
        ModelKind::Tree => Model::Tree(fit_cart(x, y, &cfg, seed)?),
        ModelKind::Bagging => Model::Ensemble(fit_bagging(x, y, params.n_estimators, &cfg, seed)?),
        ModelKind::RandomForest => {
            Model::Ensemble(fit_random_forest(x, y, params.n_estimators, &cfg, seed)?)
        }
        ModelKind::Gbm => {
            Model::Ensemble(fit_gbm(x, y, params.n_estimators, params.learning_rate, &cfg)?)
        }
        ModelKind::Xgb => Model::Ensemble(fit_xgb(
            x,
            y,
            params.n_estimators,
            params.learning_rate,
            &cfg,
            params.reg_lambda,
            params.reg_gamma,
        )?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn menu_order_and_ids() {
        let ids: Vec<&str> = ModelKind::MENU.iter().map(|k| k.id()).collect();
        assert_eq!(ids, vec!["linear", "tree", "bagging", "forest", "xgb", "gbm"]);
        for k in ModelKind::MENU {
            assert_eq!(k.id().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn params_set_validates() {
        let mut p = ModelParams::defaults(ModelKind::Gbm);
        assert_eq!(p.max_depth, Some(3));
        p.set("max_depth", ParamValue(None)).unwrap();
        assert_eq!(p.max_depth, None);
        p.set("n_estimators", ParamValue(Some(50.0))).unwrap();
        assert_eq!(p.n_estimators, 50);
        assert!(p.set("n_estimators", ParamValue(Some(2.5))).is_err());
        assert!(p.set("n_estimators", ParamValue(None)).is_err());
        assert!(p.set("depth", ParamValue(Some(1.0))).is_err());
        assert_eq!(ModelParams::defaults(ModelKind::Tree).max_depth, None);
    }

    #[test]
    fn predict_checks_width() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]);
        let m = fit_model(ModelKind::Linear, &ModelParams::defaults(ModelKind::Linear), &x, &[1.0, 2.0, 3.0], 0)
            .unwrap();
        assert_eq!(m.predict_row(&[1.0, 2.0]), Err(ModelError::DimensionMismatch { expected: 1, got: 2 }));
    }
}
