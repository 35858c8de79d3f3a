//! Tree ensembles: bagging, random forest, gradient boosting and
//! second-order (regularized) boosting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Grower, Presorted, SplitObjective, TreeConfig, TreeNode};
use super::ModelError;
use crate::matrix::Matrix;
use crate::metrics;
use crate::preprocess::mean;
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Bagging,
    RandomForest,
    Gbm,
    Xgb,
}

impl EnsembleKind {
    pub fn is_boosting(self) -> bool {
        matches!(self, EnsembleKind::Gbm | EnsembleKind::Xgb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub kind: EnsembleKind,
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
    /// Boosting only.
    pub learning_rate: Option<f64>,
    /// Boosting only: the constant initial prediction.
    pub init_value: Option<f64>,
    /// Bagging and random forest only.
    pub per_tree_seeds: Vec<u64>,
    /// Second-order boosting only.
    pub reg_lambda: Option<f64>,
    pub reg_gamma: Option<f64>,
}

impl EnsembleModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        if self.kind.is_boosting() {
            self.init_value.unwrap_or(0.0) + self.learning_rate.unwrap_or(1.0) * sum
        } else {
            sum / self.trees.len() as f64
        }
    }
}

fn check_inputs(x: &Matrix, y: &[f64], n_estimators: usize) -> Result<(), ModelError> {
    if x.rows() != y.len() {
        return Err(ModelError::DimensionMismatch { expected: x.rows(), got: y.len() });
    }
    if x.rows() == 0 {
        return Err(ModelError::EmptyData);
    }
    if n_estimators == 0 {
        return Err(ModelError::InvalidParam("n_estimators must be >= 1".into()));
    }
    Ok(())
}

fn fit_bootstrap_trees(
    x: &Matrix,
    y: &[f64],
    n_estimators: usize,
    config: TreeConfig,
    seed: u64,
    kind: EnsembleKind,
) -> Result<EnsembleModel, ModelError> {
    check_inputs(x, y, n_estimators)?;
    config.validate()?;
    let n = x.rows();
    let seeds: Vec<u64> = (0..n_estimators as u64).map(|i| derive_seed(seed, i)).collect();
    let trees: Vec<TreeNode> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = Rng::new(s);
            let sample: Vec<usize> = (0..n).map(|_| rng.below(n as u64) as usize).collect();
            let xs = x.select_rows(&sample);
            let ys: Vec<f64> = sample.iter().map(|&i| y[i]).collect();
            let presorted = Presorted::new(&xs);
            Grower::new(&xs, &ys, config, SplitObjective::Variance, rng).grow(&presorted)
        })
        .collect();
    Ok(EnsembleModel {
        kind,
        n_features: x.cols(),
        trees,
        learning_rate: None,
        init_value: None,
        per_tree_seeds: seeds,
        reg_lambda: None,
        reg_gamma: None,
    })
}

/// Bootstrap aggregation of CART trees. Tree `i` uses seed `derive_seed(seed, i)`
/// for its bootstrap sample; predictions are the mean over trees.
pub fn fit_bagging(
    x: &Matrix,
    y: &[f64],
    n_estimators: usize,
    tree_config: &TreeConfig,
    seed: u64,
) -> Result<EnsembleModel, ModelError> {
    fit_bootstrap_trees(x, y, n_estimators, *tree_config, seed, EnsembleKind::Bagging)
}

/// Default features per split for a random forest: `floor(p / 3)`, at least 1.
pub fn default_forest_max_features(p: usize) -> usize {
    (p / 3).max(1)
}

/// Bagging plus per-split feature subsampling.
pub fn fit_random_forest(
    x: &Matrix,
    y: &[f64],
    n_estimators: usize,
    tree_config: &TreeConfig,
    seed: u64,
) -> Result<EnsembleModel, ModelError> {
    let mut config = *tree_config;
    if config.max_features.is_none() {
        config.max_features = Some(default_forest_max_features(x.cols()));
    }
    fit_bootstrap_trees(x, y, n_estimators, config, seed, EnsembleKind::RandomForest)
}

fn boost(
    x: &Matrix,
    y: &[f64],
    n_estimators: usize,
    learning_rate: f64,
    tree_config: &TreeConfig,
    objective: SplitObjective,
) -> Result<(f64, Vec<TreeNode>), ModelError> {
    check_inputs(x, y, n_estimators)?;
    if !(learning_rate > 0.0 && learning_rate <= 1.0) {
        return Err(ModelError::InvalidParam(format!(
            "learning_rate must be in (0, 1], got {learning_rate}"
        )));
    }
    let config = TreeConfig { max_features: None, ..*tree_config };
    config.validate()?;

    let presorted = Presorted::new(x);
    let init = mean(y);
    // running sum of tree outputs per row; F = init + lr * acc
    let mut acc = vec![0.0; y.len()];
    let mut targets = vec![0.0; y.len()];
    let mut trees = Vec::with_capacity(n_estimators);
    for _ in 0..n_estimators {
        for (i, t) in targets.iter_mut().enumerate() {
            let f = init + learning_rate * acc[i];
            *t = match objective {
                SplitObjective::Variance => y[i] - f,
                SplitObjective::SecondOrder { .. } => f - y[i],
            };
        }
        let tree = Grower::new(x, &targets, config, objective, Rng::new(0)).grow(&presorted);
        for (i, a) in acc.iter_mut().enumerate() {
            *a += tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    Ok((init, trees))
}

/// Gradient boosting with squared loss: each tree fits the current residuals.
pub fn fit_gbm(
    x: &Matrix,
    y: &[f64],
    n_estimators: usize,
    learning_rate: f64,
    tree_config: &TreeConfig,
) -> Result<EnsembleModel, ModelError> {
    let (init, trees) =
        boost(x, y, n_estimators, learning_rate, tree_config, SplitObjective::Variance)?;
    Ok(EnsembleModel {
        kind: EnsembleKind::Gbm,
        n_features: x.cols(),
        trees,
        learning_rate: Some(learning_rate),
        init_value: Some(init),
        per_tree_seeds: Vec::new(),
        reg_lambda: None,
        reg_gamma: None,
    })
}

/// Second-order boosting with squared loss (`g = F - y`, `h = 1`): leaf weight
/// `-G / (H + lambda)`, and a split is kept only if
/// `0.5 * (G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ)) - gamma > 0`.
pub fn fit_xgb(
    x: &Matrix,
    y: &[f64],
    n_estimators: usize,
    learning_rate: f64,
    tree_config: &TreeConfig,
    reg_lambda: f64,
    reg_gamma: f64,
) -> Result<EnsembleModel, ModelError> {
    if !(reg_lambda >= 0.0 && reg_gamma >= 0.0) {
        return Err(ModelError::InvalidParam("reg_lambda and reg_gamma must be >= 0".into()));
    }
    let objective = SplitObjective::SecondOrder { lambda: reg_lambda, gamma: reg_gamma };
    let (init, trees) = boost(x, y, n_estimators, learning_rate, tree_config, objective)?;
    Ok(EnsembleModel {
        kind: EnsembleKind::Xgb,
        n_features: x.cols(),
        trees,
        learning_rate: Some(learning_rate),
        init_value: Some(init),
        per_tree_seeds: Vec::new(),
        reg_lambda: Some(reg_lambda),
        reg_gamma: Some(reg_gamma),
    })
}

/// Training-set R² after 0, 1, ..., M trees of a boosting model.
pub fn staged_train_r2(
    m: &EnsembleModel,
    x: &Matrix,
    y: &[f64],
) -> Result<Vec<(usize, f64)>, ModelError> {
    if !m.kind.is_boosting() {
        return Err(ModelError::NotBoosting);
    }
    if x.cols() != m.n_features {
        return Err(ModelError::DimensionMismatch { expected: m.n_features, got: x.cols() });
    }
    let init = m.init_value.unwrap_or(0.0);
    let lr = m.learning_rate.unwrap_or(1.0);
    let mut acc = vec![0.0; x.rows()];
    let mut curve = Vec::with_capacity(m.trees.len() + 1);
    let staged = |acc: &[f64]| -> Vec<f64> { acc.iter().map(|a| init + lr * a).collect() };
    curve.push((0, metrics::r2(y, &staged(&acc))?));
    for (it, tree) in m.trees.iter().enumerate() {
        for (i, a) in acc.iter_mut().enumerate() {
            *a += tree.predict(x.row(i));
        }
        curve.push((it + 1, metrics::r2(y, &staged(&acc))?));
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[
            [1.0, 0.5],
            [2.0, 0.1],
            [3.0, 0.9],
            [4.0, 0.3],
            [5.0, 0.7],
            [6.0, 0.2],
        ]);
        (x, vec![1.0, 3.0, 2.0, 6.0, 5.0, 9.0])
    }

    fn predict(m: &EnsembleModel, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| m.predict_row(r)).collect()
    }

    #[test]
    fn gbm_two_points() {
        // F0 = 5, residuals -5/+5, depth-1 leaves -5/+5, F1 = 5 -/+ 2.5
        let x = Matrix::from_rows(&[[0.0], [1.0]]);
        let cfg = TreeConfig { max_depth: Some(1), ..Default::default() };
        let m = fit_gbm(&x, &[0.0, 10.0], 1, 0.5, &cfg).unwrap();
        assert_eq!(predict(&m, &x), vec![2.5, 7.5]);
    }

    #[test]
    fn gbm_constant_target() {
        let (x, _) = toy();
        let y = vec![4.0; 6];
        let m = fit_gbm(&x, &y, 5, 0.1, &TreeConfig { max_depth: Some(3), ..Default::default() })
            .unwrap();
        assert!(predict(&m, &x).iter().all(|&p| p == 4.0));
    }

    #[test]
    fn gbm_single_full_tree_fits_exactly() {
        let (x, y) = toy();
        let m = fit_gbm(&x, &y, 1, 1.0, &TreeConfig::default()).unwrap();
        let p = predict(&m, &x);
        assert!((metrics::r2(&y, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boosting_prediction_formula() {
        let m = EnsembleModel {
            kind: EnsembleKind::Gbm,
            n_features: 1,
            trees: vec![TreeNode::Leaf { value: 2.0, n_samples: 1 }],
            learning_rate: Some(0.5),
            init_value: Some(10.0),
            per_tree_seeds: vec![],
            reg_lambda: None,
            reg_gamma: None,
        };
        assert_eq!(m.predict_row(&[0.0]), 11.0);
    }

    #[test]
    fn bagging_mean_of_equal_trees() {
        let m = EnsembleModel {
            kind: EnsembleKind::Bagging,
            n_features: 1,
            trees: vec![TreeNode::Leaf { value: 5.0, n_samples: 1 }; 3],
            learning_rate: None,
            init_value: None,
            per_tree_seeds: vec![1, 2, 3],
            reg_lambda: None,
            reg_gamma: None,
        };
        assert_eq!(m.predict_row(&[0.0]), 5.0);
    }

    #[test]
    fn xgb_leaf_weight_with_lambda() {
        // residuals y - F = [1, 1]: G = -2, H = 2, w = 2 / (2 + 2) = 0.5
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
        let y = [0.0, 0.0, 2.0, 2.0];
        let cfg = TreeConfig { max_depth: Some(1), ..Default::default() };
        let m = fit_xgb(&x, &y, 1, 1.0, &cfg, 2.0, 0.0).unwrap();
        match &m.trees[0] {
            TreeNode::Split { left, right, .. } => {
                assert_eq!(**right, TreeNode::Leaf { value: 0.5, n_samples: 2 });
                assert_eq!(**left, TreeNode::Leaf { value: -0.5, n_samples: 2 });
            }
            t => panic!("expected split, got {t:?}"),
        }
    }

    #[test]
    fn xgb_large_gamma_never_splits() {
        let (x, y) = toy();
        let m = fit_xgb(&x, &y, 10, 0.3, &TreeConfig { max_depth: Some(3), ..Default::default() }, 1.0, 1e12)
            .unwrap();
        assert!(m.trees.iter().all(TreeNode::is_leaf));
    }

    #[test]
    fn xgb_reduces_to_gbm() {
        let (x, y) = toy();
        let cfg = TreeConfig { max_depth: Some(2), ..Default::default() };
        let g = fit_gbm(&x, &y, 20, 0.3, &cfg).unwrap();
        let b = fit_xgb(&x, &y, 20, 0.3, &cfg, 0.0, 0.0).unwrap();
        for (a, c) in predict(&g, &x).iter().zip(predict(&b, &x)) {
            assert!((a - c).abs() < 1e-9);
        }
    }

    #[test]
    fn staged_curve_endpoints() {
        let (x, y) = toy();
        let m = fit_gbm(&x, &y, 15, 0.2, &TreeConfig { max_depth: Some(2), ..Default::default() })
            .unwrap();
        let curve = staged_train_r2(&m, &x, &y).unwrap();
        assert_eq!(curve.len(), 16);
        assert_eq!(curve[0], (0, 0.0));
        let final_r2 = metrics::r2(&y, &predict(&m, &x)).unwrap();
        assert_eq!(curve[15].1, final_r2);
        assert!(curve.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12));
    }

    #[test]
    fn bagging_is_deterministic_and_identical_rows_collapse() {
        let (x, y) = toy();
        let cfg = TreeConfig::default();
        assert_eq!(fit_bagging(&x, &y, 7, &cfg, 3).unwrap(), fit_bagging(&x, &y, 7, &cfg, 3).unwrap());
        let same = Matrix::from_rows(&[[1.0, 2.0]; 5]);
        let m = fit_bagging(&same, &[3.0; 5], 4, &cfg, 9).unwrap();
        assert!(m.trees.iter().all(TreeNode::is_leaf));
        assert_eq!(m.predict_row(&[1.0, 2.0]), 3.0);
    }

    #[test]
    fn forest_with_all_features_equals_bagging() {
        let (x, y) = toy();
        let cfg = TreeConfig { max_features: Some(2), ..Default::default() };
        let f = fit_random_forest(&x, &y, 5, &cfg, 8).unwrap();
        let b = fit_bagging(&x, &y, 5, &cfg, 8).unwrap();
        assert_eq!(f.trees, b.trees);
        assert_eq!(default_forest_max_features(14), 4);
        assert_eq!(default_forest_max_features(2), 1);
    }

    #[test]
    fn staged_rejects_bagging() {
        let (x, y) = toy();
        let m = fit_bagging(&x, &y, 2, &TreeConfig::default(), 1).unwrap();
        assert!(matches!(staged_train_r2(&m, &x, &y), Err(ModelError::NotBoosting)));
    }
}
