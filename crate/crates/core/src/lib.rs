//! Hybrid late-fusion pre-screening classifiers.
//!
//! Two independent modules score each subject with an ASD probability:
//!
//! - [`tabular`]: logistic regression and a linear SVM (Platt-calibrated)
//!   over recoded ADOS item scores;
//! - [`neural`]: a small convolutional network with dense-connectivity blocks
//!   over face images, trained with a plateau-decay / best-checkpoint callback.
//!
//! [`fusion`] combines the two probabilities by a weighted average whose
//! weights are either equal or proportional to each module's training-set
//! size or ASD count. [`evalreport`] turns decisions into confusion matrices,
//! accuracy / sensitivity / precision and serialized run reports.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod datamodel;
pub mod error;
pub mod evalreport;
pub mod fsutil;
pub mod fusion;
pub mod ingest;
pub mod neural;
pub mod scalar;
pub mod tabular;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the generic types.
pub type DatasetF64 = datamodel::Dataset<f64>;
pub type SampleF64 = datamodel::Sample<f64>;
pub type FeatureVectorF64 = datamodel::FeatureVector<f64>;
pub type ImageTensorF64 = datamodel::ImageTensor<f64>;
pub type LinearModelF64 = tabular::LinearModel<f64>;
pub type Tensor4F64 = neural::Tensor4<f64>;
pub type NetworkF64 = neural::Network<f64>;
pub type TrainedNetF64 = neural::TrainedNet<f64>;
pub type PredictionScoreF64 = fusion::PredictionScore<f64>;
pub type FusionWeightsF64 = fusion::FusionWeights<f64>;
pub type FusedDecisionF64 = fusion::FusedDecision<f64>;
pub type MetricTripleF64 = evalreport::MetricTriple<f64>;
