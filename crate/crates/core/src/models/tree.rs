//! Binary regression trees.
//!
//! One greedy grower serves both split criteria: plain variance reduction
//! (CART, also used on residuals by gradient boosting) and the second-order
//! gain with an L2 leaf penalty `lambda` and a split threshold `gamma`.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! values. Rows with `x < threshold` go left. Among equally good splits the
//! lowest feature index wins, then the lowest threshold.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Relative tolerance under which two split scores count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        #[serde(rename = "f")]
        feature: usize,
        #[serde(rename = "t")]
        threshold: f64,
        #[serde(rename = "l")]
        left: Box<TreeNode>,
        #[serde(rename = "r")]
        right: Box<TreeNode>,
    },
    Leaf {
        #[serde(rename = "v")]
        value: f64,
        #[serde(rename = "n")]
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

/// Growth limits for one tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until another rule stops.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split. `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: None, min_samples_split: 2, min_samples_leaf: 1, max_features: None }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.min_samples_split < 2 {
            return Err(ModelError::InvalidParam("min_samples_split must be >= 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(ModelError::InvalidParam("min_samples_leaf must be >= 1".into()));
        }
        if self.max_features == Some(0) {
            return Err(ModelError::InvalidParam("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum SplitObjective {
    /// Targets are fitted directly; leaf value is the mean.
    Variance,
    /// Targets are first-order gradients with unit hessians; leaf value is `-G / (H + lambda)`.
    SecondOrder { lambda: f64, gamma: f64 },
}

/// Row indices of a matrix sorted by each feature (ties by row index).
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, j).total_cmp(&x.get(b as usize, j)).then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { order }
    }
}

struct BestSplit {
    score: f64,
    feature: usize,
    position: usize,
    threshold: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if a < t && t <= b {
        t
    } else {
        b
    }
}

pub(crate) struct Grower<'a> {
    x: &'a Matrix,
    targets: &'a [f64],
    config: TreeConfig,
    objective: SplitObjective,
    rng: Rng,
    goes_left: Vec<bool>,
}

impl<'a> Grower<'a> {
    pub(crate) fn new(
        x: &'a Matrix,
        targets: &'a [f64],
        config: TreeConfig,
        objective: SplitObjective,
        rng: Rng,
    ) -> Self {
        Self { x, targets, config, objective, rng, goes_left: vec![false; x.rows()] }
    }

    pub(crate) fn grow(mut self, presorted: &Presorted) -> TreeNode {
        if self.x.rows() == 0 {
            return TreeNode::Leaf { value: 0.0, n_samples: 0 };
        }
        if self.x.cols() == 0 {
            let all: Vec<u32> = (0..self.x.rows() as u32).collect();
            return self.leaf(&all);
        }
        self.grow_node(presorted.order.clone(), 0)
    }

    fn lambda(&self) -> f64 {
        match self.objective {
            SplitObjective::Variance => 0.0,
            SplitObjective::SecondOrder { lambda, .. } => lambda,
        }
    }

    fn leaf(&self, rows: &[u32]) -> TreeNode {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&i| self.targets[i as usize]).sum();
        let value = match self.objective {
            SplitObjective::Variance => sum / n as f64,
            SplitObjective::SecondOrder { lambda, .. } => -sum / (n as f64 + lambda),
        };
        TreeNode::Leaf { value, n_samples: n }
    }

    fn is_pure(&self, rows: &[u32]) -> bool {
        let first = self.targets[rows[0] as usize];
        rows.iter().all(|&i| self.targets[i as usize] == first)
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.cols();
        match self.config.max_features {
            Some(m) if m < p => self.rng.sample_without_replacement(p, m),
            _ => (0..p).collect(),
        }
    }

    fn find_split(&mut self, lists: &[Vec<u32>], total: f64) -> Option<BestSplit> {
        let n = lists[0].len();
        let min_leaf = self.config.min_samples_leaf;
        let lambda = self.lambda();
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features() {
            let list = &lists[f];
            let mut sum_left = 0.0;
            for k in 0..n - 1 {
                let row = list[k] as usize;
                sum_left += self.targets[row];
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < min_leaf {
                    continue;
                }
                if n_right < min_leaf {
                    break;
                }
                let a = self.x.get(row, f);
                let b = self.x.get(list[k + 1] as usize, f);
                if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
                    continue;
                }
                let sum_right = total - sum_left;
                let score = sum_left * sum_left / (n_left as f64 + lambda)
                    + sum_right * sum_right / (n_right as f64 + lambda);
                let better = match &best {
                    None => true,
                    Some(b) => score > b.score + TIE_TOLERANCE * b.score.abs(),
                };
                if better {
                    best = Some(BestSplit { score, feature: f, position: k, threshold: midpoint(a, b) });
                }
            }
        }
        best
    }

    fn grow_node(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> TreeNode {
        let rows = &lists[0];
        let n = rows.len();
        if self.config.max_depth.is_some_and(|d| depth >= d)
            || n < self.config.min_samples_split
            || self.is_pure(rows)
        {
            return self.leaf(rows);
        }
        let total: f64 = rows.iter().map(|&i| self.targets[i as usize]).sum();
        let Some(split) = self.find_split(&lists, total) else {
            return self.leaf(rows);
        };
        if let SplitObjective::SecondOrder { lambda, gamma } = self.objective {
            let gain = 0.5 * (split.score - total * total / (n as f64 + lambda)) - gamma;
            if gain <= 0.0 {
                return self.leaf(rows);
            }
        }

        let chosen = &lists[split.feature];
        for &i in &chosen[..=split.position] {
            self.goes_left[i as usize] = true;
        }
        let n_left = split.position + 1;
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in &lists {
            let mut l = Vec::with_capacity(n_left);
            let mut r = Vec::with_capacity(n - n_left);
            for &i in list {
                if self.goes_left[i as usize] {
                    l.push(i);
                } else {
                    r.push(i);
                }
            }
            left_lists.push(l);
            right_lists.push(r);
        }
        for &i in &chosen[..=split.position] {
            self.goes_left[i as usize] = false;
        }
        drop(lists);

        let left = self.grow_node(left_lists, depth + 1);
        let right = self.grow_node(right_lists, depth + 1);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// A single CART regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub n_features: usize,
    pub root: TreeNode,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.root.predict(row)
    }
}

/// Fits a CART tree minimizing weighted child SSE. `rng_seed` only matters when
/// `config.max_features` is smaller than the feature count.
pub fn fit_cart(
    x: &Matrix,
    y: &[f64],
    config: &TreeConfig,
    rng_seed: u64,
) -> Result<RegressionTree, ModelError> {
    config.validate()?;
    if x.rows() != y.len() {
        return Err(ModelError::DimensionMismatch { expected: x.rows(), got: y.len() });
    }
    if x.rows() == 0 {
        return Err(ModelError::EmptyData);
    }
    let presorted = Presorted::new(x);
    let root = Grower::new(x, y, *config, SplitObjective::Variance, Rng::new(rng_seed))
        .grow(&presorted);
    Ok(RegressionTree { n_features: x.cols(), root })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_columns(&[v.to_vec()])
    }

    #[test]
    fn depth_one_step_function() {
        // brute force over midpoints 0.5, 1.5, 2.5: SSE 2/3, 0, 2/3 -> 1.5 wins
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let cfg = TreeConfig { max_depth: Some(1), ..Default::default() };
        let t = fit_cart(&x, &y, &cfg, 0).unwrap();
        match &t.root {
            TreeNode::Split { feature, threshold, left, right } => {
                assert_eq!((*feature, *threshold), (0, 1.5));
                assert_eq!(**left, TreeNode::Leaf { value: 0.0, n_samples: 2 });
                assert_eq!(**right, TreeNode::Leaf { value: 1.0, n_samples: 2 });
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.predict_row(&[2.9]), 1.0);
        assert_eq!(t.predict_row(&[1.4]), 0.0);
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let x = col(&[3.0, 1.0, 2.0]);
        let t = fit_cart(&x, &[4.0, 4.0, 4.0], &TreeConfig::default(), 0).unwrap();
        assert_eq!(t.root, TreeNode::Leaf { value: 4.0, n_samples: 3 });
    }

    #[test]
    fn unlimited_depth_interpolates() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 3.0], [3.0, 9.0], [4.0, 1.0], [5.0, 2.0]]);
        let y = [3.0, -1.0, 7.5, 2.0, 0.25];
        let t = fit_cart(&x, &y, &TreeConfig::default(), 0).unwrap();
        for (i, &target) in y.iter().enumerate() {
            assert_eq!(t.predict_row(x.row(i)), target);
        }
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x = col(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [0.0, 10.0, 0.0, 0.0, 0.0, 0.0];
        let cfg = TreeConfig { min_samples_leaf: 3, ..Default::default() };
        let t = fit_cart(&x, &y, &cfg, 0).unwrap();
        fn check(n: &TreeNode) {
            match n {
                TreeNode::Leaf { n_samples, .. } => assert!(*n_samples >= 3),
                TreeNode::Split { left, right, .. } => {
                    check(left);
                    check(right);
                }
            }
        }
        check(&t.root);
    }

    #[test]
    fn min_samples_split_stops() {
        let x = col(&[0.0, 1.0, 2.0]);
        let cfg = TreeConfig { min_samples_split: 4, ..Default::default() };
        let t = fit_cart(&x, &[1.0, 2.0, 3.0], &cfg, 0).unwrap();
        assert!(t.root.is_leaf());
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both columns separate y identically
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
        let cfg = TreeConfig { max_depth: Some(1), ..Default::default() };
        let t = fit_cart(&x, &[0.0, 0.0, 5.0, 5.0], &cfg, 0).unwrap();
        assert!(matches!(t.root, TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn duplicate_values_never_split_between() {
        let x = col(&[1.0, 1.0, 1.0, 2.0]);
        let cfg = TreeConfig { max_depth: Some(1), ..Default::default() };
        let t = fit_cart(&x, &[0.0, 5.0, 0.0, 9.0], &cfg, 0).unwrap();
        match t.root {
            TreeNode::Split { threshold, .. } => assert_eq!(threshold, 1.5),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn midpoint_of_adjacent_floats_separates() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(a < t && t <= b);
    }

    #[test]
    fn feature_subsampling_is_seeded() {
        let x = Matrix::from_rows(&[
            [0.0, 3.0, 1.0],
            [1.0, 2.0, 0.0],
            [2.0, 1.0, 1.0],
            [3.0, 0.0, 0.0],
            [4.0, 5.0, 1.0],
        ]);
        let y = [1.0, 4.0, 2.0, 8.0, 5.0];
        let cfg = TreeConfig { max_features: Some(1), ..Default::default() };
        let a = fit_cart(&x, &y, &cfg, 11).unwrap();
        let b = fit_cart(&x, &y, &cfg, 11).unwrap();
        assert_eq!(a, b);
    }
}
