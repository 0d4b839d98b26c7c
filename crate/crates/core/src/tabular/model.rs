use serde::{Deserialize, Serialize};

use crate::datamodel::{FeatureVector, Label, ModelProvenance};
use crate::error::{Error, Result};
use crate::scalar::{open_unit, sigmoid, Scalar};

pub const LINEAR_MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    #[serde(rename = "logreg")]
    LogReg,
    LinearSvm,
}

/// Sigmoid fitted over SVM margins: `p = σ(a·margin + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Calibration<T: Scalar> {
    pub a: T,
    pub b: T,
}

/// Trained linear classifier over encoded ADOS features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T: Scalar> {
    kind: LinearKind,
    weights: Vec<T>,
    bias: T,
    calibration: Option<Calibration<T>>,
    provenance: ModelProvenance,
}

impl<T: Scalar> LinearModel<T> {
    pub fn new(
        kind: LinearKind,
        weights: Vec<T>,
        bias: T,
        calibration: Option<Calibration<T>>,
        provenance: ModelProvenance,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("linear model needs at least one weight"));
        }
        let cal_finite = calibration.is_none_or(|c| c.a.is_finite() && c.b.is_finite());
        if !(weights.iter().all(|w| w.is_finite()) && bias.is_finite() && cal_finite) {
            return Err(Error::validation("linear model parameters must be finite"));
        }
        match (kind, calibration.is_some()) {
            (LinearKind::LinearSvm, false) => {
                return Err(Error::validation("a linear SVM needs a calibration pair"))
            }
            (LinearKind::LogReg, true) => {
                return Err(Error::validation("logistic regression carries no calibration"))
            }
            _ => {}
        }
        Ok(LinearModel {
            kind,
            weights,
            bias,
            calibration,
            provenance,
        })
    }

    pub fn kind(&self) -> LinearKind {
        self.kind
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn calibration(&self) -> Option<Calibration<T>> {
        self.calibration
    }

    pub fn provenance(&self) -> ModelProvenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Raw score `w·x + b`.
    pub fn margin(&self, x: &[T]) -> Result<T> {
        if x.len() != self.weights.len() {
            return Err(Error::validation(format!(
                "feature dimension {} does not match model dimension {}",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(dot(&self.weights, x) + self.bias)
    }

    /// ASD probability, strictly inside (0,1).
    pub fn predict_proba(&self, x: &[T]) -> Result<T> {
        let z = self.margin(x)?;
        let z = match self.calibration {
            Some(c) => c.a * z + c.b,
            None => z,
        };
        Ok(open_unit(sigmoid(z)))
    }

    /// ASD iff probability > 0.5.
    pub fn predict_label(&self, x: &[T]) -> Result<Label> {
        let p = self.predict_proba(x)?;
        Ok(if p > T::lit(0.5) { Label::Asd } else { Label::NonAsd })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LinearModelDoc {
            format_version: LINEAR_MODEL_FORMAT_VERSION,
            kind: self.kind,
            weights: self.weights.clone(),
            bias: self.bias,
            calibration: self.calibration,
            provenance: self.provenance,
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LinearModelDoc<T> = serde_json::from_str(text)?;
        if doc.format_version != LINEAR_MODEL_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported linear model format_version {}",
                doc.format_version
            )));
        }
        LinearModel::new(doc.kind, doc.weights, doc.bias, doc.calibration, doc.provenance)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct LinearModelDoc<T: Scalar> {
    format_version: u32,
    kind: LinearKind,
    weights: Vec<T>,
    bias: T,
    calibration: Option<Calibration<T>>,
    provenance: ModelProvenance,
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Free-function form of [`LinearModel::predict_proba`].
pub fn predict_proba<T: Scalar>(m: &LinearModel<T>, x: &FeatureVector<T>) -> Result<T> {
    m.predict_proba(x.values())
}
