use serde::{Deserialize, Serialize};

use super::calibrate::calibrate;
use super::model::{dot, LinearKind, LinearModel};
use crate::datamodel::{Dataset, DatasetKind, Label, ModelProvenance};
use crate::error::{Error, Result};
use crate::scalar::{bce_with_logit, sigmoid, Scalar};

/// Loss magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Hyperparameters for both linear learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabularHyper {
    /// Gradient step for logistic regression; multiplier on the `1/(λt)`
    /// schedule for the SVM.
    pub learning_rate: f64,
    /// Full-batch iterations.
    pub epochs: usize,
    /// L2 penalty on logistic-regression weights (bias excluded).
    pub l2: f64,
    /// Hinge regularisation λ.
    pub svm_lambda: f64,
    pub seed: u64,
}

impl Default for TabularHyper {
    fn default() -> Self {
        TabularHyper {
            learning_rate: 1.0,
            epochs: 500,
            l2: 0.0,
            svm_lambda: 0.01,
            seed: 0,
        }
    }
}

impl TabularHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::validation("l2 must be >= 0"));
        }
        if !(self.svm_lambda > 0.0 && self.svm_lambda.is_finite()) {
            return Err(Error::validation("svm_lambda must be positive"));
        }
        Ok(())
    }
}

/// Dense row-major design matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T: Scalar> {
    x: Vec<T>,
    n: usize,
    d: usize,
    labels: Vec<Label>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn new(x: Vec<T>, d: usize, labels: Vec<Label>) -> Result<Self> {
        if d == 0 || x.len() != d * labels.len() {
            return Err(Error::validation(format!(
                "design matrix of {} values does not hold {} rows of width {d}",
                x.len(),
                labels.len()
            )));
        }
        Ok(DesignMatrix {
            n: labels.len(),
            x,
            d,
            labels,
        })
    }

    /// Training view of a fully labelled tabular dataset.
    pub fn from_dataset(ds: &Dataset<T>) -> Result<Self> {
        if ds.kind() != DatasetKind::Tabular {
            return Err(Error::Training("linear models need a tabular dataset".into()));
        }
        if ds.is_empty() {
            return Err(Error::Training("training set is empty".into()));
        }
        let d = ds.feature_dim().unwrap_or(0);
        let mut x = Vec::with_capacity(ds.len() * d);
        let mut labels = Vec::with_capacity(ds.len());
        for s in ds.samples() {
            let label = s
                .label
                .ok_or_else(|| Error::Training(format!("sample {} is unlabeled", s.subject_id)))?;
            x.extend_from_slice(s.feature_values().unwrap_or(&[]));
            labels.push(label);
        }
        DesignMatrix::new(x, d, labels)
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    fn require_both_classes(&self) -> Result<()> {
        let asd = self.labels.iter().filter(|l| l.is_asd()).count();
        if asd == 0 || asd == self.n {
            return Err(Error::Training(
                "training set must contain both ASD and non-ASD samples".into(),
            ));
        }
        Ok(())
    }

    fn provenance(&self) -> ModelProvenance {
        ModelProvenance {
            n_train: self.n,
            n_asd_train: self.labels.iter().filter(|l| l.is_asd()).count(),
        }
    }
}

/// Objective value and gradient with respect to `(weights, bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGrad<T: Scalar> {
    pub value: T,
    pub grad_w: Vec<T>,
    pub grad_b: T,
}

/// Mean binary cross-entropy plus `l2/2·‖w‖²`, and its gradient.
pub fn logreg_objective<T: Scalar>(w: &[T], b: T, data: &DesignMatrix<T>, l2: T) -> ObjectiveGrad<T> {
    let n = T::from_count(data.n);
    let mut value = T::zero();
    let mut grad_w = vec![T::zero(); data.d];
    let mut grad_b = T::zero();
    for (i, &label) in data.labels.iter().enumerate() {
        let x = data.row(i);
        let y = label.target::<T>();
        let z = dot(w, x) + b;
        value += bce_with_logit(z, y);
        let r = sigmoid(z) - y;
        for (g, &xi) in grad_w.iter_mut().zip(x) {
            *g += r * xi;
        }
        grad_b += r;
    }
    let half = T::lit(0.5);
    value = value / n + half * l2 * dot(w, w);
    for (g, &wi) in grad_w.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    ObjectiveGrad {
        value,
        grad_w,
        grad_b: grad_b / n,
    }
}

/// `λ/2·‖w‖² + mean(max(0, 1 − y·(w·x + b)))` with labels in {−1, +1}, and a
/// subgradient that takes 0 from the hinge at margin exactly 1.
pub fn svm_objective<T: Scalar>(w: &[T], b: T, data: &DesignMatrix<T>, lambda: T) -> ObjectiveGrad<T> {
    let n = T::from_count(data.n);
    let mut hinge = T::zero();
    let mut grad_w = vec![T::zero(); data.d];
    let mut grad_b = T::zero();
    for (i, &label) in data.labels.iter().enumerate() {
        let x = data.row(i);
        let y = label.sign::<T>();
        let m = y * (dot(w, x) + b);
        if m < T::one() {
            hinge += T::one() - m;
            for (g, &xi) in grad_w.iter_mut().zip(x) {
                *g -= y * xi;
            }
            grad_b -= y;
        }
    }
    for (g, &wi) in grad_w.iter_mut().zip(w) {
        *g = *g / n + lambda * wi;
    }
    ObjectiveGrad {
        value: hinge / n + T::lit(0.5) * lambda * dot(w, w),
        grad_w,
        grad_b: grad_b / n,
    }
}

fn check_divergence<T: Scalar>(value: T, iteration: usize, rate: f64) -> Result<()> {
    let v = value.as_f64();
    if !v.is_finite() || v > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            stage: "iteration",
            index: iteration,
            loss: v,
            context: format!(" (learning rate {rate:e})"),
        });
    }
    Ok(())
}

/// Logistic regression trained by full-batch gradient descent from zero.
pub fn train_logreg<T: Scalar>(train: &Dataset<T>, h: &TabularHyper) -> Result<LinearModel<T>> {
    train_logreg_traced(train, h).map(|(m, _)| m)
}

/// As [`train_logreg`], also returning the objective before each step and
/// after the last one (`epochs + 1` values).
pub fn train_logreg_traced<T: Scalar>(train: &Dataset<T>, h: &TabularHyper) -> Result<(LinearModel<T>, Vec<T>)> {
    h.validate()?;
    let data = DesignMatrix::from_dataset(train)?;
    data.require_both_classes()?;
    let lr = T::lit(h.learning_rate);
    let l2 = T::lit(h.l2);
    let mut w = vec![T::zero(); data.d];
    let mut b = T::zero();
    let mut trace = Vec::with_capacity(h.epochs + 1);
    for t in 0..h.epochs {
        let og = logreg_objective(&w, b, &data, l2);
        check_divergence(og.value, t, h.learning_rate)?;
        trace.push(og.value);
        for (wi, g) in w.iter_mut().zip(&og.grad_w) {
            *wi -= lr * *g;
        }
        b -= lr * og.grad_b;
    }
    let last = logreg_objective(&w, b, &data, l2).value;
    check_divergence(last, h.epochs, h.learning_rate)?;
    trace.push(last);
    let model = LinearModel::new(LinearKind::LogReg, w, b, None, data.provenance())?;
    Ok((model, trace))
}

/// Linear SVM by deterministic full-batch Pegasos, then Platt calibration on
/// the training margins.
///
/// Step `t` (1-based) uses `η_t = learning_rate / (λ·t)`; weights are
/// projected onto the ball of radius `1/√λ`; the bias is unregularised. The
/// iterate with the lowest primal objective is returned.
pub fn train_linear_svm<T: Scalar>(train: &Dataset<T>, h: &TabularHyper) -> Result<LinearModel<T>> {
    h.validate()?;
    let data = DesignMatrix::from_dataset(train)?;
    data.require_both_classes()?;
    let lambda = T::lit(h.svm_lambda);
    let radius = T::one() / lambda.sqrt();
    let mut w = vec![T::zero(); data.d];
    let mut b = T::zero();
    let mut best: Option<(T, Vec<T>, T)> = None;
    let mut keep_if_better = |value: T, w: &[T], b: T| {
        if best.as_ref().is_none_or(|(v, _, _)| value < *v) {
            best = Some((value, w.to_vec(), b));
        }
    };
    for t in 1..=h.epochs {
        let og = svm_objective(&w, b, &data, lambda);
        check_divergence(og.value, t - 1, h.learning_rate)?;
        keep_if_better(og.value, &w, b);
        let eta = T::lit(h.learning_rate) / (lambda * T::from_count(t));
        for (wi, g) in w.iter_mut().zip(&og.grad_w) {
            *wi -= eta * *g;
        }
        b -= eta * og.grad_b;
        let norm = dot(&w, &w).sqrt();
        if norm > radius {
            let s = radius / norm;
            w.iter_mut().for_each(|wi| *wi *= s);
        }
    }
    let last = svm_objective(&w, b, &data, lambda).value;
    check_divergence(last, h.epochs, h.learning_rate)?;
    keep_if_better(last, &w, b);
    let (_, w, b) = best.expect("at least one iterate evaluated");
    let margins: Vec<T> = (0..data.n).map(|i| dot(&w, data.row(i)) + b).collect();
    let cal = calibrate(&margins, &data.labels)?;
    LinearModel::new(LinearKind::LinearSvm, w, b, Some(cal), data.provenance())
}

/// Trains the requested kind.
pub fn train_linear<T: Scalar>(train: &Dataset<T>, h: &TabularHyper, kind: LinearKind) -> Result<LinearModel<T>> {
    match kind {
        LinearKind::LogReg => train_logreg(train, h),
        LinearKind::LinearSvm => train_linear_svm(train, h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{FeatureVector, Sample};

    fn dataset(rows: &[(&[f64], Label)]) -> Dataset<f64> {
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, (x, l))| Sample::features(format!("s{i}"), FeatureVector::new(x.to_vec()).unwrap(), Some(*l)))
            .collect();
        Dataset::new(DatasetKind::Tabular, samples).unwrap()
    }

    #[test]
    fn zero_epochs_is_the_zero_model() {
        let d = dataset(&[(&[1.0, 0.0], Label::Asd), (&[0.0, 1.0], Label::NonAsd)]);
        let h = TabularHyper { epochs: 0, ..Default::default() };
        let m = train_logreg(&d, &h).unwrap();
        assert_eq!(m.weights(), &[0.0, 0.0]);
        assert_eq!(m.bias(), 0.0);
        assert_eq!(m.predict_proba(&[0.4, 0.9]).unwrap(), 0.5);
    }

    #[test]
    fn first_step_leaves_balanced_bias_unchanged() {
        let d = dataset(&[(&[1.0, 0.0, 0.0], Label::Asd), (&[0.0, 0.0, 0.0], Label::NonAsd)]);
        let h = TabularHyper { epochs: 1, learning_rate: 0.5, ..Default::default() };
        let m = train_logreg(&d, &h).unwrap();
        assert_eq!(m.bias(), 0.0);
        // grad_w[0] = mean((0.5 - y) x0) = -0.25
        assert_eq!(m.weights(), &[0.125, 0.0, 0.0]);
    }

    #[test]
    fn single_class_is_rejected() {
        let d = dataset(&[(&[1.0], Label::Asd), (&[0.0], Label::Asd)]);
        let h = TabularHyper::default();
        assert!(matches!(train_logreg(&d, &h), Err(Error::Training(_))));
        assert!(matches!(train_linear_svm(&d, &h), Err(Error::Training(_))));
    }

    #[test]
    fn loss_is_non_increasing_at_small_rates() {
        let rows: Vec<(Vec<f64>, Label)> = (0..40)
            .map(|i| {
                let a = (i % 4) as f64 / 3.0;
                let b = ((i * 7) % 4) as f64 / 3.0;
                let l = if a + 0.5 * b > 0.9 { Label::Asd } else { Label::NonAsd };
                (vec![a, b], l)
            })
            .collect();
        let refs: Vec<(&[f64], Label)> = rows.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let d = dataset(&refs);
        let h = TabularHyper { learning_rate: 0.5, epochs: 300, ..Default::default() };
        let (_, trace) = train_logreg_traced(&d, &h).unwrap();
        assert_eq!(trace.len(), 301);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn huge_l2_step_diverges_with_context() {
        let d = dataset(&[(&[1.0], Label::Asd), (&[0.0], Label::NonAsd)]);
        let h = TabularHyper { learning_rate: 100.0, l2: 1.0, epochs: 200, ..Default::default() };
        match train_logreg(&d, &h) {
            Err(Error::Divergence { context, .. }) => assert!(context.contains("1e2"), "{context}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn separable_one_dimensional_svm_has_zero_hinge() {
        let d = dataset(&[(&[2.0], Label::Asd), (&[-2.0], Label::NonAsd)]);
        let h = TabularHyper { epochs: 2000, svm_lambda: 0.01, ..Default::default() };
        let m = train_linear_svm(&d, &h).unwrap();
        let data = DesignMatrix::from_dataset(&d).unwrap();
        for (i, l) in data.labels().iter().enumerate() {
            let margin = l.sign::<f64>() * m.margin(data.row(i)).unwrap();
            // The optimum sits exactly on the kink; allow rounding below it.
            assert!(margin >= 1.0 - 1e-9, "margin {margin}");
        }
        let hinge = svm_objective(m.weights(), m.bias(), &data, 0.0).value;
        assert!(hinge < 1e-9, "hinge {hinge}");
        assert!(m.predict_proba(&[2.0]).unwrap() > 0.5);
        assert!(m.predict_proba(&[-2.0]).unwrap() < 0.5);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let d = dataset(&[(&[1.0, 0.2], Label::Asd), (&[0.1, 0.9], Label::NonAsd), (&[0.7, 0.3], Label::Asd)]);
        let h = TabularHyper { epochs: 50, ..Default::default() };
        assert_eq!(train_logreg(&d, &h).unwrap(), train_logreg(&d, &h).unwrap());
        assert_eq!(train_linear_svm(&d, &h).unwrap(), train_linear_svm(&d, &h).unwrap());
    }
}
