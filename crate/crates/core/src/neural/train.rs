use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::NetConfig;
use super::network::Network;
use crate::datamodel::{Dataset, DatasetKind, ImageTensor, Label, ModelProvenance};
use crate::error::{Error, Result};
use crate::scalar::{bce_with_logit, open_unit, sigmoid, Scalar};

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Rate used during this epoch.
    pub lr: f64,
}

/// Mean loss and accuracy of a network over a labelled image set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Network holding its best-checkpoint parameters plus the run that produced them.
#[derive(Debug, Clone)]
pub struct TrainedNet<T: Scalar> {
    pub network: Network<T>,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters are stored (1-based).
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub provenance: ModelProvenance,
    pub validation_augmented: bool,
}

impl<T: Scalar> TrainedNet<T> {
    pub fn config(&self) -> &NetConfig {
        self.network.config()
    }

    pub fn evaluate(&self, data: &Dataset<T>) -> Result<Evaluation> {
        evaluate_net(&self.network, data)
    }

    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }
}

fn predicts_asd<T: Scalar>(logit: T) -> bool {
    open_unit(sigmoid(logit)) > T::lit(0.5)
}

fn labelled_images<'a, T: Scalar>(d: &'a Dataset<T>, what: &str, net: &NetConfig) -> Result<Vec<(&'a [T], Label)>> {
    if d.kind() != DatasetKind::Image {
        return Err(Error::validation(format!("{what} set must contain images")));
    }
    if d.is_empty() {
        return Err(Error::validation(format!("{what} set is empty")));
    }
    let want = net.input.tuple();
    d.samples()
        .iter()
        .map(|s| {
            let img = s.image_tensor().expect("image dataset");
            if img.shape() != want {
                return Err(Error::Shape {
                    layer: 0,
                    message: format!("{what} image {} has shape {:?}, network expects {want:?}", s.subject_id, img.shape()),
                });
            }
            let label = s
                .label
                .ok_or_else(|| Error::validation(format!("{what} sample {} is unlabelled", s.subject_id)))?;
            Ok((img.data(), label))
        })
        .collect()
}

fn evaluate_samples<T: Scalar>(net: &Network<T>, samples: &[(&[T], Label)]) -> (f64, f64) {
    let mut loss = T::zero();
    let mut correct = 0usize;
    for &(x, label) in samples {
        let z = net.logit(x);
        loss += bce_with_logit(z, label.target());
        if predicts_asd(z) == label.is_asd() {
            correct += 1;
        }
    }
    let n = samples.len() as f64;
    (loss.as_f64() / n, correct as f64 / n)
}

/// Mean binary cross-entropy and accuracy (ASD iff p > 0.5).
pub fn evaluate_net<T: Scalar>(net: &Network<T>, data: &Dataset<T>) -> Result<Evaluation> {
    let samples = labelled_images(data, "evaluation", net.config())?;
    let (loss, accuracy) = evaluate_samples(net, &samples);
    Ok(Evaluation { loss, accuracy })
}

/// Mini-batch gradient descent with plateau decay and best-weight checkpointing.
///
/// After each epoch the validation set is scored. Strict improvement of
/// validation accuracy stores a checkpoint (ties keep the earliest epoch);
/// `patience` consecutive epochs without improvement multiply the rate by the
/// decay factor, floored at `min_lr`. The returned network holds the
/// checkpoint, not the last iterate.
pub fn train_net<T: Scalar>(train: &Dataset<T>, val: &Dataset<T>, cfg: &NetConfig) -> Result<TrainedNet<T>> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Err(Error::validation("epochs must be ≥ 1"));
    }
    let train_samples = labelled_images(train, "training", cfg)?;
    let val_samples = labelled_images(val, "validation", cfg)?;

    let mut net = Network::<T>::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_samples.len()).collect();

    let mut lr = cfg.initial_lr;
    let mut wait = 0usize;
    let mut best: Option<(usize, f64, Network<T>)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let step = T::lit(lr);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = net.zero_grads();
            let scale = T::one() / T::from_count(batch.len());
            let (loss, logits) = net.accumulate(batch.iter().map(|&i| train_samples[i]), scale, &mut grads);
            if !loss.is_finite() {
                return Err(divergence(epoch, loss.as_f64()));
            }
            loss_sum += loss.as_f64();
            correct += batch
                .iter()
                .zip(&logits)
                .filter(|(&i, &z)| predicts_asd(z) == train_samples[i].1.is_asd())
                .count();
            for (p, g) in net.params_mut().iter_mut().zip(&grads) {
                for (v, &d) in p.data.iter_mut().zip(g) {
                    *v -= step * d;
                }
            }
        }
        let (val_loss, val_acc) = evaluate_samples(&net, &val_samples);
        if !val_loss.is_finite() {
            return Err(divergence(epoch, val_loss));
        }
        let n = train_samples.len() as f64;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss,
            val_acc,
            lr,
        });
        log::debug!("epoch {epoch}: val_acc {val_acc:.4} val_loss {val_loss:.5} lr {lr}");

        if best.as_ref().is_none_or(|(_, acc, _)| val_acc > *acc) {
            best = Some((epoch, val_acc, net.clone()));
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.callback.patience {
                lr = cfg.callback.decayed(lr);
                wait = 0;
            }
        }
    }

    let (best_epoch, best_val_accuracy, network) = best.expect("at least one epoch ran");
    Ok(TrainedNet {
        network,
        history,
        best_epoch,
        best_val_accuracy,
        provenance: train.provenance().into(),
        validation_augmented: val.provenance().validation_augmented,
    })
}

fn divergence(epoch: usize, loss: f64) -> Error {
    Error::Divergence {
        stage: "epoch",
        index: epoch,
        loss,
        context: String::new(),
    }
}

/// CSV with header `epoch,train_loss,train_acc,val_loss,val_acc,lr`.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc,lr\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr
        );
    }
    s
}

/// Appends `extra` to a validation set and flags the result as augmented.
///
/// Subject ids present in both sets are kept twice and reported as warnings.
pub fn augment_validation<T: Scalar>(val: &Dataset<T>, extra: &Dataset<T>) -> Result<Dataset<T>> {
    if val.kind() != DatasetKind::Image || (!extra.is_empty() && extra.kind() != DatasetKind::Image) {
        return Err(Error::validation("validation augmentation needs image datasets"));
    }
    if let (Some(a), Some(b)) = (val.image_shape(), extra.image_shape()) {
        if a != b {
            return Err(Error::validation(format!(
                "extra images have shape {b:?}, validation images {a:?}"
            )));
        }
    }
    let seen: BTreeSet<&str> = val.samples().iter().map(|s| s.subject_id.as_str()).collect();
    let duplicates: Vec<String> = extra
        .samples()
        .iter()
        .filter(|s| seen.contains(s.subject_id.as_str()))
        .map(|s| s.subject_id.clone())
        .collect();
    let samples = val.samples().iter().chain(extra.samples()).cloned().collect();
    let mut out = Dataset::new(DatasetKind::Image, samples)?;
    for w in val.warnings().iter().chain(extra.warnings()) {
        out.push_warning(w.clone());
    }
    for id in duplicates {
        out.push_warning(format!("subject {id} appears in both the validation set and the extra images"));
    }
    out.set_augmented(true);
    Ok(out)
}

/// ASD probability of one image; identical to a batch-of-one forward pass.
pub fn predict_image<T: Scalar>(net: &TrainedNet<T>, img: &ImageTensor<T>) -> Result<T> {
    net.network.predict(img)
}
