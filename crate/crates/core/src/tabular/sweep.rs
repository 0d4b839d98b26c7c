use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::model::{LinearKind, LinearModel};
use super::train::{train_linear, TabularHyper};
use crate::datamodel::{split_dataset, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fraction of the data used for training in every sweep run.
pub const SWEEP_TRAIN_RATIO: f64 = 0.8;

/// Test accuracy per learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub best_rate: f64,
}

impl SweepResult {
    pub fn best_accuracy(&self) -> f64 {
        let i = self.grid.iter().position(|&r| r == self.best_rate).unwrap_or(0);
        self.accuracies[i]
    }

    /// `rate,accuracy` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rate,accuracy\n");
        for (r, a) in self.grid.iter().zip(&self.accuracies) {
            let _ = writeln!(s, "{r},{a}");
        }
        s
    }
}

/// Fraction of labelled samples the model classifies correctly.
pub fn accuracy<T: Scalar>(m: &LinearModel<T>, d: &Dataset<T>) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in d.samples() {
        let (Some(label), Some(x)) = (s.label, s.feature_values()) else {
            continue;
        };
        total += 1;
        if m.predict_label(x)? == label {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(Error::validation("no labelled samples to score"));
    }
    Ok(correct as f64 / total as f64)
}

/// Trains one model per learning rate on a single fixed 80/20 split.
///
/// All runs share `h.seed`, so only the rate varies. Ties on accuracy go to
/// the smaller rate.
pub fn lr_sweep<T: Scalar>(d: &Dataset<T>, grid: &[f64], h: &TabularHyper, kind: LinearKind) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::validation("learning-rate grid is empty"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("learning-rate grid must be strictly increasing"));
    }
    let split = split_dataset(d, SWEEP_TRAIN_RATIO, h.seed)?;
    let mut accuracies = Vec::with_capacity(grid.len());
    for &rate in grid {
        let hr = TabularHyper { learning_rate: rate, ..*h };
        let model = train_linear(&split.train, &hr, kind).map_err(|e| match e {
            e @ Error::Divergence { .. } => e,
            other => Error::Training(format!("learning rate {rate:e}: {other}")),
        })?;
        accuracies.push(accuracy(&model, &split.test)?);
    }
    let mut best = 0;
    for (i, &a) in accuracies.iter().enumerate() {
        if a > accuracies[best] {
            best = i;
        }
    }
    Ok(SweepResult {
        grid: grid.to_vec(),
        best_rate: grid[best],
        accuracies,
    })
}
