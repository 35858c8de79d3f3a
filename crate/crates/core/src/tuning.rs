//! Deterministic k-fold cross-validation and exhaustive grid search.

use std::fmt;

use rayon::prelude::*;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::metrics;
use crate::models::{fit_model, ModelError, ModelKind, ModelParams, ParamValue, PARAM_NAMES};
use crate::rng::{derive_seed, Rng};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum TuningError {
    #[error("k must satisfy 2 <= k <= n (k = {k}, n = {n})")]
    BadK { k: usize, n: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: ModelError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Shuffles `0..n` and cuts it into `k` folds; the first `n % k` folds hold one extra index.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, TuningError> {
    if k < 2 || k > n {
        return Err(TuningError::BadK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub params: ModelParams,
}

/// R² on each held-out fold. The model for fold `f` is seeded with `derive_seed(seed, f)`.
pub fn cross_val_r2(
    spec: &ModelSpec,
    x: &Matrix,
    y: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<f64>, TuningError> {
    let folds = kfold_indices(x.rows(), k, seed)?;
    let mut in_fold = vec![usize::MAX; x.rows()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_fold[i] = f;
        }
    }
    folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let train: Vec<usize> = (0..x.rows()).filter(|&i| in_fold[i] != f).collect();
            let xt = x.select_rows(&train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let wrap = |source| TuningError::Fold { fold: f, source };
            let model = fit_model(spec.kind, &spec.params, &xt, &yt, derive_seed(seed, f as u64))
                .map_err(wrap)?;
            let xv = x.select_rows(fold);
            let yv: Vec<f64> = fold.iter().map(|&i| y[i]).collect();
            let pred = model.predict(&xv).map_err(wrap)?;
            metrics::r2(&yv, &pred).map_err(|e| wrap(e.into()))
        })
        .collect()
}

/// Ordered parameter axes. Enumeration varies the last axis fastest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamGrid {
    pub axes: Vec<(String, Vec<ParamValue>)>,
}

impl ParamGrid {
    pub fn new(axes: Vec<(String, Vec<ParamValue>)>) -> Result<Self, TuningError> {
        let grid = Self { axes };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), TuningError> {
        if self.axes.is_empty() {
            return Err(TuningError::InvalidGrid("grid is empty".into()));
        }
        for (i, (name, values)) in self.axes.iter().enumerate() {
            if !PARAM_NAMES.contains(&name.as_str()) {
                return Err(TuningError::InvalidGrid(format!("unknown parameter `{name}`")));
            }
            if self.axes[..i].iter().any(|(n, _)| n == name) {
                return Err(TuningError::InvalidGrid(format!("duplicate parameter `{name}`")));
            }
            if values.is_empty() {
                return Err(TuningError::InvalidGrid(format!("`{name}` has no values")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TuningError> {
        let grid: ParamGrid =
            serde_json::from_str(text).map_err(|e| TuningError::InvalidGrid(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn n_combinations(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// Every assignment, in odometer order over the declared axes.
    pub fn combinations(&self) -> Vec<Vec<(String, ParamValue)>> {
        let mut out = Vec::with_capacity(self.n_combinations());
        let mut idx = vec![0usize; self.axes.len()];
        loop {
            out.push(
                self.axes
                    .iter()
                    .zip(&idx)
                    .map(|((name, vals), &i)| (name.clone(), vals[i]))
                    .collect(),
            );
            let mut pos = self.axes.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.axes[pos].1.len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// Built-in grid per model family. Boosting: n_estimators {50,100,200} x
    /// max_depth {2,3,4} x learning_rate {0.05,0.1,0.2}.
    pub fn default_for(kind: ModelKind) -> Option<Self> {
        let v = |xs: &[Option<f64>]| xs.iter().map(|&x| ParamValue(x)).collect::<Vec<_>>();
        let axes = match kind {
            ModelKind::Linear => return None,
            ModelKind::Gbm | ModelKind::Xgb => vec![
                ("n_estimators".to_owned(), v(&[Some(50.0), Some(100.0), Some(200.0)])),
                ("max_depth".to_owned(), v(&[Some(2.0), Some(3.0), Some(4.0)])),
                ("learning_rate".to_owned(), v(&[Some(0.05), Some(0.1), Some(0.2)])),
            ],
            ModelKind::Tree => vec![
                ("max_depth".to_owned(), v(&[Some(5.0), Some(10.0), None])),
                ("min_samples_leaf".to_owned(), v(&[Some(1.0), Some(5.0), Some(10.0)])),
            ],
            ModelKind::Bagging | ModelKind::RandomForest => vec![
                ("n_estimators".to_owned(), v(&[Some(50.0), Some(100.0)])),
                ("min_samples_leaf".to_owned(), v(&[Some(1.0), Some(3.0), Some(5.0)])),
            ],
        };
        Some(Self { axes })
    }
}

impl<'de> Deserialize<'de> for ParamGrid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct GridVisitor;

        impl<'de> Visitor<'de> for GridVisitor {
            type Value = ParamGrid;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping parameter names to arrays of values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<ParamGrid, A::Error> {
                let mut axes = Vec::new();
                while let Some((name, values)) = map.next_entry::<String, Vec<ParamValue>>()? {
                    axes.push((name, values));
                }
                let grid = ParamGrid { axes };
                grid.validate().map_err(de::Error::custom)?;
                Ok(grid)
            }
        }

        deserializer.deserialize_map(GridVisitor)
    }
}

impl Serialize for ParamGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.axes.len()))?;
        for (name, values) in &self.axes {
            map.serialize_entry(name, values)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub params: Vec<(String, ParamValue)>,
    pub fold_scores: Vec<f64>,
    pub mean_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub model: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub entries: Vec<CvEntry>,
    pub best_index: usize,
    pub best_params: Vec<(String, ParamValue)>,
    pub best_score: f64,
}

impl CvResult {
    /// One row per combination: parameter columns, fold columns, mean.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.entries[0].params.iter().map(|(n, _)| n.clone()).collect();
        header.extend((1..=self.k).map(|f| format!("fold_{f}")));
        header.push("mean_r2".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for e in &self.entries {
            let mut row: Vec<String> = e.params.iter().map(|(_, v)| v.to_string()).collect();
            row.extend(e.fold_scores.iter().map(|s| s.to_string()));
            row.push(e.mean_r2.to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// `base` with the winning assignment applied.
    pub fn best_model_params(&self, base: &ModelParams) -> Result<ModelParams, ModelError> {
        apply_params(base, &self.best_params)
    }
}

pub fn apply_params(
    base: &ModelParams,
    assignment: &[(String, ParamValue)],
) -> Result<ModelParams, ModelError> {
    let mut p = *base;
    for (name, value) in assignment {
        p.set(name, *value)?;
    }
    Ok(p)
}

/// Cross-validates every grid combination. The highest mean R² wins; ties go
/// to the earliest combination in enumeration order.
pub fn grid_search(
    kind: ModelKind,
    grid: &ParamGrid,
    x: &Matrix,
    y: &[f64],
    k: usize,
    seed: u64,
) -> Result<CvResult, TuningError> {
    grid.validate()?;
    let base = ModelParams::defaults(kind);
    let entries = grid
        .combinations()
        .into_par_iter()
        .map(|params| {
            let spec = ModelSpec { kind, params: apply_params(&base, &params)? };
            let fold_scores = cross_val_r2(&spec, x, y, k, seed)?;
            let mean_r2 = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            Ok(CvEntry { params, fold_scores, mean_r2 })
        })
        .collect::<Result<Vec<_>, TuningError>>()?;
    let mut best_index = 0;
    for (i, e) in entries.iter().enumerate() {
        if e.mean_r2 > entries[best_index].mean_r2 {
            best_index = i;
        }
    }
    Ok(CvResult {
        model: kind,
        k,
        seed,
        best_params: entries[best_index].params.clone(),
        best_score: entries[best_index].mean_r2,
        best_index,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes_follow_remainder_rule() {
        let sizes: Vec<usize> = kfold_indices(7, 3, 1).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
        let folds = kfold_indices(10, 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(kfold_indices(10, 5, 1).unwrap(), folds);
    }

    #[test]
    fn bad_k() {
        assert_eq!(kfold_indices(3, 4, 0), Err(TuningError::BadK { k: 4, n: 3 }));
        assert_eq!(kfold_indices(3, 1, 0), Err(TuningError::BadK { k: 1, n: 3 }));
    }

    #[test]
    fn grid_json_keeps_declared_order() {
        let g = ParamGrid::from_json(r#"{"n_estimators":[1,2],"learning_rate":[0.1],"max_depth":[null,3]}"#)
            .unwrap();
        let names: Vec<&str> = g.axes.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, vec!["n_estimators", "learning_rate", "max_depth"]);
        assert_eq!(g.n_combinations(), 4);
        let combos = g.combinations();
        assert_eq!(combos[0][2].1, ParamValue(None));
        assert_eq!(combos[1][2].1, ParamValue(Some(3.0)));
        assert_eq!(combos[2][0].1, ParamValue(Some(2.0)));
        let round: ParamGrid = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(round, g);
    }

    #[test]
    fn grid_json_rejects_bad_input() {
        assert!(ParamGrid::from_json(r#"{"depth":[1]}"#).is_err());
        assert!(ParamGrid::from_json(r#"{"max_depth":[]}"#).is_err());
        assert!(ParamGrid::from_json(r#"{"max_depth":[1],"max_depth":[2]}"#).is_err());
        assert!(ParamGrid::from_json(r#"{}"#).is_err());
        assert!(ParamGrid::from_json(r#"[1]"#).is_err());
    }

    fn linear_data(n: usize) -> (Matrix, Vec<f64>) {
        let rows: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, ((i * 7) % 5) as f64]).collect();
        let y = rows.iter().map(|r| 3.0 * r[0] - 2.0 * r[1] + 1.0).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn cv_realizable_linear() {
        let (x, y) = linear_data(30);
        let spec = ModelSpec { kind: ModelKind::Linear, params: ModelParams::defaults(ModelKind::Linear) };
        for s in cross_val_r2(&spec, &x, &y, 5, 3).unwrap() {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cv_smoke_two_folds() {
        let (x, y) = linear_data(4);
        let spec = ModelSpec { kind: ModelKind::Tree, params: ModelParams::defaults(ModelKind::Tree) };
        assert_eq!(cross_val_r2(&spec, &x, &y, 2, 0).unwrap().len(), 2);
    }

    #[test]
    fn grid_cardinality_and_ties() {
        let (x, y) = linear_data(40);
        let grid = ParamGrid::from_json(r#"{"n_estimators":[1,2],"learning_rate":[0.1]}"#).unwrap();
        let cv = grid_search(ModelKind::Gbm, &grid, &x, &y, 5, 1).unwrap();
        assert_eq!(cv.entries.len(), 2);
        let max = cv.entries.iter().map(|e| e.mean_r2).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(cv.best_score, max);

        // identical combinations tie; the first wins
        let dup = ParamGrid::from_json(r#"{"reg_gamma":[0,0]}"#).unwrap();
        let cv = grid_search(ModelKind::Gbm, &dup, &x, &y, 5, 1).unwrap();
        assert_eq!(cv.entries[0].mean_r2, cv.entries[1].mean_r2);
        assert_eq!(cv.best_index, 0);

        let single = ParamGrid::from_json(r#"{"max_depth":[2]}"#).unwrap();
        let cv = grid_search(ModelKind::Gbm, &single, &x, &y, 5, 1).unwrap();
        assert_eq!(cv.best_params, vec![("max_depth".to_string(), ParamValue(Some(2.0)))]);
        assert_eq!(cv.to_csv().lines().count(), 2);
    }

    #[test]
    fn default_grids() {
        assert_eq!(ParamGrid::default_for(ModelKind::Gbm).unwrap().n_combinations(), 27);
        assert!(ParamGrid::default_for(ModelKind::Linear).is_none());
    }
}
