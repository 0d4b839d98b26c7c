//! Seeded stand-ins for the clinical datasets.
//!
//! Tabular records draw each item score from a per-class categorical
//! distribution over 0..=3; image samples are noisy backgrounds where the
//! ASD class carries a Gaussian intensity blob. Every generator is a pure
//! function of its [`SynthesisConfig`].

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datamodel::{AdosModule, AdosRecord, Dataset, DatasetKind, ImageTensor, Label, Sample};
use crate::error::{Error, Result};
use crate::ingest::csv::records_to_dataset;
use crate::scalar::Scalar;

const LABEL_STREAM: u64 = 0;
const TABULAR_STREAM: u64 = 1;
const IMAGE_STREAM: u64 = 2;

/// Background level and per-pixel noise of synthetic images.
const BACKGROUND: f64 = 0.4;
const NOISE_SD: f64 = 0.1;
/// Blob peak contrast per unit of class separation.
const BLOB_GAIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub n_samples: usize,
    pub asd_fraction: f64,
    pub feature_count: usize,
    pub class_separation: f64,
    pub seed: u64,
    pub image_height: usize,
    pub image_width: usize,
    pub image_channels: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            n_samples: 1000,
            asd_fraction: 0.5,
            feature_count: 10,
            class_separation: 2.0,
            seed: 0,
            image_height: 16,
            image_width: 16,
            image_channels: 1,
        }
    }
}

impl SynthesisConfig {
    /// `round(asd_fraction * n_samples)`.
    pub fn n_asd(&self) -> usize {
        (self.asd_fraction * self.n_samples as f64).round() as usize
    }

    fn validate_common(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::validation("n_samples must be positive"));
        }
        if !(0.0..=1.0).contains(&self.asd_fraction) {
            return Err(Error::validation(format!(
                "asd_fraction must lie in [0,1], got {}",
                self.asd_fraction
            )));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::validation("class_separation must be finite and >= 0"));
        }
        Ok(())
    }

    fn validate_tabular(&self) -> Result<AdosModule> {
        self.validate_common()?;
        AdosModule::from_feature_count(self.feature_count)
    }

    fn validate_image(&self) -> Result<()> {
        self.validate_common()?;
        if self.image_height < 8 || self.image_width < 8 {
            return Err(Error::validation(format!(
                "synthetic images need height and width >= 8, got {}x{}",
                self.image_height, self.image_width
            )));
        }
        if self.image_channels != 1 && self.image_channels != 3 {
            return Err(Error::validation("image_channels must be 1 or 3"));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Item codes used for synthetic records.
pub fn default_codebook(feature_count: usize) -> Vec<String> {
    let half = feature_count.div_ceil(2);
    (0..feature_count)
        .map(|i| {
            if i < half {
                format!("A{}", i + 1)
            } else {
                format!("B{}", i - half + 1)
            }
        })
        .collect()
}

/// Zero-padded subject id shared by every generator.
pub fn subject_id(i: usize) -> String {
    format!("s{i:05}")
}

fn synth_labels(cfg: &SynthesisConfig) -> Vec<Label> {
    let n_asd = cfg.n_asd().min(cfg.n_samples);
    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Asd, n_asd)
        .chain(std::iter::repeat_n(Label::NonAsd, cfg.n_samples - n_asd))
        .collect();
    labels.shuffle(&mut cfg.rng(LABEL_STREAM));
    labels
}

/// Per-class score distribution of item `j` out of `f`.
///
/// `p(k) ∝ exp(sign * separation * strength_j * (k - 1.5))`, with item
/// strengths spread over `[0.5, 1]` so items differ in informativeness.
fn score_distribution(label: Label, separation: f64, j: usize, f: usize) -> [f64; 4] {
    let strength = if f > 1 { 0.5 + 0.5 * j as f64 / (f - 1) as f64 } else { 1.0 };
    let sign = if label.is_asd() { 1.0 } else { -1.0 };
    let mut p = [0.0; 4];
    for (k, pk) in p.iter_mut().enumerate() {
        *pk = (sign * separation * strength * (k as f64 - 1.5)).exp();
    }
    let total: f64 = p.iter().sum();
    p.map(|v| v / total)
}

fn draw_category(rng: &mut ChaCha8Rng, p: &[f64; 4]) -> i64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k as i64;
        }
    }
    3
}

fn tabular_records_for(cfg: &SynthesisConfig, labels: &[Label]) -> Result<Vec<AdosRecord>> {
    let module = cfg.validate_tabular()?;
    let book = default_codebook(cfg.feature_count);
    let dists: Vec<[[f64; 4]; 2]> = (0..cfg.feature_count)
        .map(|j| {
            [
                score_distribution(Label::Asd, cfg.class_separation, j, cfg.feature_count),
                score_distribution(Label::NonAsd, cfg.class_separation, j, cfg.feature_count),
            ]
        })
        .collect();
    let mut rng = cfg.rng(TABULAR_STREAM);
    labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let class = usize::from(!label.is_asd());
            let scores: BTreeMap<String, i64> = book
                .iter()
                .zip(&dists)
                .map(|(code, d)| (code.clone(), draw_category(&mut rng, &d[class])))
                .collect();
            AdosRecord::new(subject_id(i), module, scores, Some(label))
        })
        .collect()
}

/// Synthetic ADOS records with scores in 0..=3.
pub fn synth_ados_records(cfg: &SynthesisConfig) -> Result<Vec<AdosRecord>> {
    cfg.validate_tabular()?;
    tabular_records_for(cfg, &synth_labels(cfg))
}

/// Synthetic tabular dataset encoded with [`default_codebook`].
pub fn synth_tabular<T: Scalar>(cfg: &SynthesisConfig) -> Result<Dataset<T>> {
    let records = synth_ados_records(cfg)?;
    records_to_dataset(&records, &default_codebook(cfg.feature_count))
}

fn images_for<T: Scalar>(cfg: &SynthesisConfig, labels: &[Label]) -> Result<Dataset<T>> {
    cfg.validate_image()?;
    let (h, w, c) = (cfg.image_height, cfg.image_width, cfg.image_channels);
    let mut rng = cfg.rng(IMAGE_STREAM);
    let noise = Normal::new(0.0, NOISE_SD).expect("valid normal");
    let sigma = h.max(w) as f64 / 8.0;
    let amplitude = BLOB_GAIN * cfg.class_separation;
    let mut samples = Vec::with_capacity(labels.len());
    for (i, &label) in labels.iter().enumerate() {
        // Jitter is drawn for every sample so both classes consume the stream alike.
        let cy = h as f64 / 2.0 + rng.random_range(-(h as f64) / 8.0..=h as f64 / 8.0);
        let cx = w as f64 / 2.0 + rng.random_range(-(w as f64) / 8.0..=w as f64 / 8.0);
        let a = if label.is_asd() { amplitude } else { 0.0 };
        let mut data = Vec::with_capacity(h * w * c);
        for y in 0..h {
            for x in 0..w {
                let d2 = (y as f64 + 0.5 - cy).powi(2) + (x as f64 + 0.5 - cx).powi(2);
                let blob = a * (-d2 / (2.0 * sigma * sigma)).exp();
                for _ in 0..c {
                    let v: f64 = BACKGROUND + blob + noise.sample(&mut rng);
                    data.push(T::lit(v.clamp(0.0, 1.0)));
                }
            }
        }
        samples.push(Sample::image(subject_id(i), ImageTensor::new(h, w, c, data)?, Some(label)));
    }
    Dataset::new(DatasetKind::Image, samples)
}

/// Synthetic image dataset with a class-dependent blob.
pub fn synth_images<T: Scalar>(cfg: &SynthesisConfig) -> Result<Dataset<T>> {
    cfg.validate_image()?;
    images_for(cfg, &synth_labels(cfg))
}

/// Records and images for the same subjects, sharing one label draw.
pub fn synth_paired<T: Scalar>(cfg: &SynthesisConfig) -> Result<(Vec<AdosRecord>, Dataset<T>)> {
    cfg.validate_tabular()?;
    cfg.validate_image()?;
    let labels = synth_labels(cfg);
    Ok((tabular_records_for(cfg, &labels)?, images_for(cfg, &labels)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reproducibility record written next to generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub kind: String,
    pub seed: u64,
    pub config: SynthesisConfig,
    pub n_asd: usize,
    pub n_nonasd: usize,
    /// Hex SHA-256 of the payload bytes.
    pub sha256: String,
}

impl SynthManifest {
    pub fn new(kind: &str, config: &SynthesisConfig, payload: &[u8]) -> Self {
        let n_asd = config.n_asd().min(config.n_samples);
        SynthManifest {
            kind: kind.to_string(),
            seed: config.seed,
            config: config.clone(),
            n_asd,
            n_nonasd: config.n_samples - n_asd,
            sha256: sha256_hex(payload),
        }
    }
}
