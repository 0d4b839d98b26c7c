//! Domain types shared by both classifier modules: ADOS records, encoded
//! feature vectors, image tensors, labelled datasets and train/test splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Diagnostic label. ASD is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "ASD")]
    Asd,
    #[serde(rename = "NonASD")]
    NonAsd,
}

impl Label {
    pub fn is_asd(self) -> bool {
        self == Label::Asd
    }

    /// 1 for ASD, 0 for NonASD.
    pub fn target<T: Scalar>(self) -> T {
        if self.is_asd() {
            T::one()
        } else {
            T::zero()
        }
    }

    /// +1 for ASD, -1 for NonASD.
    pub fn sign<T: Scalar>(self) -> T {
        if self.is_asd() {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Asd => "ASD",
            Label::NonAsd => "NonASD",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// ADOS module. Only modules 2 and 3 are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdosModule {
    Module2,
    Module3,
}

impl AdosModule {
    /// Number of classifying items analysed for this module.
    pub fn feature_count(self) -> usize {
        match self {
            AdosModule::Module2 => 5,
            AdosModule::Module3 => 10,
        }
    }

    pub fn from_feature_count(n: usize) -> Result<Self> {
        match n {
            5 => Ok(AdosModule::Module2),
            10 => Ok(AdosModule::Module3),
            other => Err(Error::validation(format!(
                "feature count must be 5 (Module 2) or 10 (Module 3), got {other}"
            ))),
        }
    }
}

const VALID_SCORES: [u8; 7] = [0, 1, 2, 3, 7, 8, 9];

fn check_raw_score(raw: i64) -> Result<u8> {
    if raw >= 0 && raw <= 9 && VALID_SCORES.contains(&(raw as u8)) {
        Ok(raw as u8)
    } else {
        Err(Error::validation(format!(
            "ADOS score {raw} is outside the 0-3 and 7-9 bands"
        )))
    }
}

/// Recodes a raw ADOS item score onto the 0-3 severity scale.
///
/// Scores 7, 8 and 9 mark "not applicable / other" and carry no severity,
/// so they map to 0.
pub fn recode_score(raw: i64) -> Result<u8> {
    let raw = check_raw_score(raw)?;
    Ok(if raw <= 3 { raw } else { 0 })
}

/// One patient's categorical ADOS item scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdosRecord {
    subject_id: String,
    module: AdosModule,
    scores: BTreeMap<String, u8>,
    label: Option<Label>,
}

impl AdosRecord {
    pub fn new(
        subject_id: impl Into<String>,
        module: AdosModule,
        scores: BTreeMap<String, i64>,
        label: Option<Label>,
    ) -> Result<Self> {
        if scores.len() != module.feature_count() {
            return Err(Error::validation(format!(
                "{:?} records carry exactly {} feature codes, got {}",
                module,
                module.feature_count(),
                scores.len()
            )));
        }
        let scores = scores
            .into_iter()
            .map(|(code, raw)| check_raw_score(raw).map(|s| (code, s)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(AdosRecord {
            subject_id: subject_id.into(),
            module,
            scores,
            label,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn module(&self) -> AdosModule {
        self.module
    }

    pub fn scores(&self) -> &BTreeMap<String, u8> {
        &self.scores
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }
}

/// Numeric encoding of a record: one finite value per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("feature vector must be non-empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("feature {i} is not finite")));
        }
        Ok(FeatureVector { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Encodes a record in codebook order: recode, then divide by 3.
pub fn encode_record<T: Scalar>(record: &AdosRecord, codebook: &[String]) -> Result<FeatureVector<T>> {
    let book: BTreeSet<&str> = codebook.iter().map(String::as_str).collect();
    let have: BTreeSet<&str> = record.scores.keys().map(String::as_str).collect();
    if book != have || book.len() != codebook.len() {
        let missing: Vec<_> = book.difference(&have).copied().collect();
        let extra: Vec<_> = have.difference(&book).copied().collect();
        return Err(Error::Schema(format!(
            "record {} does not match codebook: missing {:?}, extra {:?}",
            record.subject_id, missing, extra
        )));
    }
    let three = T::lit(3.0);
    let values = codebook
        .iter()
        .map(|code| {
            let raw = record.scores[code.as_str()];
            recode_score(raw as i64).map(|s| T::from_count(s as usize) / three)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureVector::new(values)
}

/// Height x width x channels image, row-major, channel-last, values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T: Scalar> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageTensor<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::validation(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::validation(format!(
                "image data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !(v.is_finite() && *v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::validation(format!("pixel {i} is outside [0,1]")));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    Tabular,
    Image,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleInput<T: Scalar> {
    Features(FeatureVector<T>),
    Image(ImageTensor<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T: Scalar> {
    pub subject_id: String,
    pub input: SampleInput<T>,
    pub label: Option<Label>,
}

impl<T: Scalar> Sample<T> {
    pub fn features(subject_id: impl Into<String>, x: FeatureVector<T>, label: Option<Label>) -> Self {
        Sample {
            subject_id: subject_id.into(),
            input: SampleInput::Features(x),
            label,
        }
    }

    pub fn image(subject_id: impl Into<String>, img: ImageTensor<T>, label: Option<Label>) -> Self {
        Sample {
            subject_id: subject_id.into(),
            input: SampleInput::Image(img),
            label,
        }
    }

    pub fn feature_values(&self) -> Option<&[T]> {
        match &self.input {
            SampleInput::Features(f) => Some(f.values()),
            SampleInput::Image(_) => None,
        }
    }

    pub fn image_tensor(&self) -> Option<&ImageTensor<T>> {
        match &self.input {
            SampleInput::Image(img) => Some(img),
            SampleInput::Features(_) => None,
        }
    }
}

/// Class counts of a dataset, plus the augmented-validation flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub n_total: usize,
    pub n_asd: usize,
    pub n_nonasd: usize,
    #[serde(default)]
    pub validation_augmented: bool,
}

impl Provenance {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a Option<Label>>) -> Self {
        let mut p = Provenance::default();
        for l in labels {
            p.n_total += 1;
            match l {
                Some(Label::Asd) => p.n_asd += 1,
                Some(Label::NonAsd) => p.n_nonasd += 1,
                None => {}
            }
        }
        p
    }

    pub fn fully_labeled(&self) -> bool {
        self.n_asd + self.n_nonasd == self.n_total
    }
}

/// Training-set counts stored with every trained model; the inputs to the
/// count-weighted fusion strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub n_train: usize,
    pub n_asd_train: usize,
}

impl From<Provenance> for ModelProvenance {
    fn from(p: Provenance) -> Self {
        ModelProvenance {
            n_train: p.n_total,
            n_asd_train: p.n_asd,
        }
    }
}

/// A labelled collection of samples of one kind and one input shape.
///
/// Class counts are always derived from the samples; they cannot drift.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    kind: DatasetKind,
    samples: Vec<Sample<T>>,
    provenance: Provenance,
    warnings: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(kind: DatasetKind, samples: Vec<Sample<T>>) -> Result<Self> {
        let mut dim: Option<(usize, usize, usize)> = None;
        for (i, s) in samples.iter().enumerate() {
            let this = match (&s.input, kind) {
                (SampleInput::Features(f), DatasetKind::Tabular) => (f.len(), 0, 0),
                (SampleInput::Image(img), DatasetKind::Image) => img.shape(),
                _ => {
                    return Err(Error::validation(format!(
                        "sample {i} ({}) does not match dataset kind {kind:?}",
                        s.subject_id
                    )))
                }
            };
            match dim {
                None => dim = Some(this),
                Some(d) if d != this => {
                    return Err(Error::validation(format!(
                        "sample {i} ({}) has shape {this:?}, expected {d:?}",
                        s.subject_id
                    )))
                }
                _ => {}
            }
        }
        let provenance = Provenance::from_labels(samples.iter().map(|s| &s.label));
        Ok(Dataset {
            kind,
            samples,
            provenance,
            warnings: Vec::new(),
        })
    }

    pub fn empty(kind: DatasetKind) -> Self {
        Dataset {
            kind,
            samples: Vec::new(),
            provenance: Provenance::default(),
            warnings: Vec::new(),
        }
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample<T>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn set_augmented(&mut self, flag: bool) {
        self.provenance.validation_augmented = flag;
    }

    pub(crate) fn push_warning(&mut self, w: String) {
        log::warn!("{w}");
        self.warnings.push(w);
    }

    /// Recomputes class counts from the samples and compares with the stored ones.
    pub fn provenance_consistent(&self) -> bool {
        let p = Provenance::from_labels(self.samples.iter().map(|s| &s.label));
        p.n_total == self.provenance.n_total
            && p.n_asd == self.provenance.n_asd
            && p.n_nonasd == self.provenance.n_nonasd
    }

    /// Feature dimension for tabular data, `None` when empty or not tabular.
    pub fn feature_dim(&self) -> Option<usize> {
        self.samples.first().and_then(|s| s.feature_values()).map(<[T]>::len)
    }

    /// Image shape for image data, `None` when empty or not an image set.
    pub fn image_shape(&self) -> Option<(usize, usize, usize)> {
        self.samples.first().and_then(|s| s.image_tensor()).map(ImageTensor::shape)
    }

    pub fn labels(&self) -> impl Iterator<Item = Option<Label>> + '_ {
        self.samples.iter().map(|s| s.label)
    }

    fn subset(&self, idx: &[usize]) -> Self {
        let samples = idx.iter().map(|&i| self.samples[i].clone()).collect::<Vec<_>>();
        let mut d = Dataset::new(self.kind, samples).expect("subset of a valid dataset is valid");
        d.provenance.validation_augmented = self.provenance.validation_augmented;
        d
    }
}

/// Options for [`split_dataset_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOptions {
    pub ratio: f64,
    pub seed: u64,
    /// Keep per-class proportions in both halves. Off by default.
    pub stratify: bool,
}

/// Disjoint train/test partition of a dataset.
#[derive(Debug, Clone)]
pub struct SplitPair<T: Scalar> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    pub seed: u64,
    pub ratio: f64,
}

/// Seeded shuffle-and-cut split with `floor(ratio * n)` training samples.
pub fn split_dataset<T: Scalar>(d: &Dataset<T>, ratio: f64, seed: u64) -> Result<SplitPair<T>> {
    split_dataset_with(
        d,
        SplitOptions {
            ratio,
            seed,
            stratify: false,
        },
    )
}

pub fn split_dataset_with<T: Scalar>(d: &Dataset<T>, opts: SplitOptions) -> Result<SplitPair<T>> {
    let SplitOptions { ratio, seed, stratify } = opts;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::validation(format!("split ratio must lie in (0,1), got {ratio}")));
    }
    let n = d.len();
    if n < 2 {
        return Err(Error::validation(format!("cannot split a dataset of {n} samples")));
    }
    let n_train = (ratio * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (train_idx, test_idx) = if stratify {
        stratified_indices(d, ratio, n_train, &mut rng)
    } else {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let test = perm.split_off(n_train);
        (perm, test)
    };

    Ok(SplitPair {
        train: d.subset(&train_idx),
        test: d.subset(&test_idx),
        seed,
        ratio,
    })
}

fn stratified_indices<T: Scalar>(
    d: &Dataset<T>,
    ratio: f64,
    n_train: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    // Group order is fixed: ASD, NonASD, unlabeled.
    let key = |l: Option<Label>| match l {
        Some(Label::Asd) => 0usize,
        Some(Label::NonAsd) => 1,
        None => 2,
    };
    let mut groups: [Vec<usize>; 3] = Default::default();
    for (i, s) in d.samples.iter().enumerate() {
        groups[key(s.label)].push(i);
    }
    for g in groups.iter_mut() {
        g.shuffle(rng);
    }
    // Largest-remainder allocation so the total stays floor(ratio * n).
    let exact: Vec<f64> = groups.iter().map(|g| ratio * g.len() as f64).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut remaining = n_train - take.iter().sum::<usize>();
    for &g in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if take[g] < groups[g].len() {
            take[g] += 1;
            remaining -= 1;
        }
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::new();
    for (g, t) in groups.iter().zip(take) {
        train.extend_from_slice(&g[..t]);
        test.extend_from_slice(&g[t..]);
    }
    train.shuffle(rng);
    test.shuffle(rng);
    (train, test)
}
