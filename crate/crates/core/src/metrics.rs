//! Regression metrics and the per-split evaluation report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::mean;

/// Targets with `|y| <= MAPE_EPSILON` are excluded from MAPE.
pub const MAPE_EPSILON: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch or too few values (got {actual} and {predicted})")]
    BadLength { actual: usize, predicted: usize },
    #[error("target is constant; R^2 is undefined")]
    ConstantTarget,
    #[error("every target is zero; MAPE is undefined")]
    AllExcluded,
    #[error("log1p undefined for value {0} (must be > -1)")]
    DomainError(f64),
}

fn check(y: &[f64], yhat: &[f64], min: usize) -> Result<(), MetricError> {
    if y.len() != yhat.len() || y.len() < min {
        return Err(MetricError::BadLength { actual: y.len(), predicted: yhat.len() });
    }
    Ok(())
}

pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 2)?;
    let m = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ConstantTarget);
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub percent: f64,
    pub excluded: usize,
}

pub fn mape(y: &[f64], yhat: &[f64]) -> Result<Mape, MetricError> {
    check(y, yhat, 1)?;
    let (mut total, mut used) = (0.0, 0usize);
    for (a, b) in y.iter().zip(yhat) {
        if a.abs() > MAPE_EPSILON {
            total += (a - b).abs() / a.abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricError::AllExcluded);
    }
    Ok(Mape { percent: total / used as f64 * 100.0, excluded: y.len() - used })
}

pub fn msle(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 1)?;
    let mut total = 0.0;
    for (&a, &b) in y.iter().zip(yhat) {
        if a <= -1.0 {
            return Err(MetricError::DomainError(a));
        }
        if b <= -1.0 {
            return Err(MetricError::DomainError(b));
        }
        let d = a.ln_1p() - b.ln_1p();
        total += d * d;
    }
    Ok(total / y.len() as f64)
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 1)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Test,
}

impl SplitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSpace {
    Log,
    Raw,
}

impl TargetSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetSpace::Log => "log",
            TargetSpace::Raw => "raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub split: SplitLabel,
    pub r2: f64,
    pub mape_percent: f64,
    pub mape_excluded: usize,
    pub msle: f64,
    pub mse: f64,
    pub n: usize,
    pub target_space: TargetSpace,
}

pub const REPORT_CSV_HEADER: &str = "model,split,r2,mape_percent,msle,mse,n,target_space";

impl EvalReport {
    /// Scores model-space targets and predictions.
    ///
    /// With `log_target` the inputs are `log1p(gross)`; R², MAPE and MSE are then
    /// computed in log space unless `raw_space` asks for currency units. MSLE is
    /// always computed on currency values, with predictions floored at zero.
    pub fn compute(
        model: &str,
        split: SplitLabel,
        y: &[f64],
        yhat: &[f64],
        log_target: bool,
        raw_space: bool,
    ) -> Result<Self, MetricError> {
        let (y_raw, yhat_raw): (Vec<f64>, Vec<f64>) = if log_target {
            (y.iter().map(|v| v.exp_m1()).collect(), yhat.iter().map(|v| v.exp_m1()).collect())
        } else {
            (y.to_vec(), yhat.to_vec())
        };
        let (ys, yhats, space) = if log_target && !raw_space {
            (y.to_vec(), yhat.to_vec(), TargetSpace::Log)
        } else {
            (y_raw.clone(), yhat_raw.clone(), TargetSpace::Raw)
        };
        let m = mape(&ys, &yhats)?;
        let floored: Vec<f64> = yhat_raw.iter().map(|v| v.max(0.0)).collect();
        Ok(Self {
            model: model.to_owned(),
            split,
            r2: r2(&ys, &yhats)?,
            mape_percent: m.percent,
            mape_excluded: m.excluded,
            msle: msle(&y_raw, &floored)?,
            mse: mse(&ys, &yhats)?,
            n: y.len(),
            target_space: space,
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.model,
            self.split.as_str(),
            self.r2,
            self.mape_percent,
            self.msle,
            self.mse,
            self.n,
            self.target_space.as_str()
        )
    }
}
