//! Categorical-score module: logistic regression and a linear SVM over
//! encoded ADOS items, with probability outputs and learning-rate sweeps.

mod calibrate;
mod model;
mod sweep;
mod train;

pub use calibrate::calibrate;
pub use model::{predict_proba, Calibration, LinearKind, LinearModel, LINEAR_MODEL_FORMAT_VERSION};
pub use sweep::{accuracy, lr_sweep, SweepResult, SWEEP_TRAIN_RATIO};
pub use train::{
    logreg_objective, svm_objective, train_linear, train_linear_svm, train_logreg, train_logreg_traced,
    DesignMatrix, ObjectiveGrad, TabularHyper, DIVERGENCE_LIMIT,
};
