//! Late fusion of the two modules' per-subject probabilities.
//!
//! `p_fused = w_tabular·p_tabular + w_image·p_image`, thresholded with ties
//! going to ASD. Weights are equal, or proportional to each module's training
//! count or training ASD count, both read from model provenance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, ModelProvenance};
use crate::evalreport::{ConfusionMatrix, MetricTriple};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Module {
    Tabular,
    Image,
}

impl Module {
    pub fn as_str(self) -> &'static str {
        match self {
            Module::Tabular => "tabular",
            Module::Image => "image",
        }
    }
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Module {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tabular" => Ok(Module::Tabular),
            "image" => Ok(Module::Image),
            other => Err(Error::validation(format!("unknown module {other:?}"))),
        }
    }
}

/// One module's ASD probability for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionScore<T: Scalar> {
    subject_id: String,
    module: Module,
    p: T,
}

impl<T: Scalar> PredictionScore<T> {
    pub fn new(subject_id: impl Into<String>, module: Module, p: T) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::validation(format!("probability {p} outside [0, 1]")));
        }
        Ok(PredictionScore {
            subject_id: subject_id.into(),
            module,
            p,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn module(&self) -> Module {
        self.module
    }

    pub fn p(&self) -> T {
        self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Simple,
    ByTrainCount,
    ByAsdCount,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Simple, Strategy::ByTrainCount, Strategy::ByAsdCount];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Simple => "simple",
            Strategy::ByTrainCount => "by_train_count",
            Strategy::ByAsdCount => "by_asd_count",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown fusion strategy {s:?}")))
    }
}

/// Convex weights for the two modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights<T: Scalar> {
    w_tabular: T,
    w_image: T,
    strategy: Strategy,
}

impl<T: Scalar> FusionWeights<T> {
    pub fn w_tabular(&self) -> T {
        self.w_tabular
    }

    pub fn w_image(&self) -> T {
        self.w_image
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn proportional(a: usize, b: usize, strategy: Strategy, what: &str) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::validation(format!(
                "{what} counts must both be ≥ 1, got ({a}, {b})"
            )));
        }
        let w_tabular = T::from_count(a) / T::from_count(a + b);
        let w = FusionWeights {
            w_tabular,
            w_image: T::one() - w_tabular,
            strategy,
        };
        debug_assert!((w.w_tabular + w.w_image - T::one()).abs().as_f64() <= WEIGHT_SUM_TOL);
        Ok(w)
    }
}

/// Equal weights.
pub fn weights_simple<T: Scalar>() -> FusionWeights<T> {
    let half = T::lit(0.5);
    FusionWeights {
        w_tabular: half,
        w_image: half,
        strategy: Strategy::Simple,
    }
}

/// Weights proportional to the training-set sizes.
pub fn weights_by_train_count<T: Scalar>(n_tabular: usize, n_image: usize) -> Result<FusionWeights<T>> {
    FusionWeights::proportional(n_tabular, n_image, Strategy::ByTrainCount, "training")
}

/// Weights proportional to the ASD counts in the training sets.
pub fn weights_by_asd_count<T: Scalar>(a_tabular: usize, a_image: usize) -> Result<FusionWeights<T>> {
    FusionWeights::proportional(a_tabular, a_image, Strategy::ByAsdCount, "ASD")
}

/// Weights for a strategy, with counts taken from the two models' provenance.
pub fn weights_for<T: Scalar>(
    strategy: Strategy,
    tabular: ModelProvenance,
    image: ModelProvenance,
) -> Result<FusionWeights<T>> {
    match strategy {
        Strategy::Simple => Ok(weights_simple()),
        Strategy::ByTrainCount => weights_by_train_count(tabular.n_train, image.n_train),
        Strategy::ByAsdCount => weights_by_asd_count(tabular.n_asd_train, image.n_asd_train),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedDecision<T: Scalar> {
    pub subject_id: String,
    pub p_tabular: T,
    pub p_image: T,
    pub p_fused: T,
    pub label: Label,
    pub weights: FusionWeights<T>,
    pub threshold: T,
}

fn check_threshold<T: Scalar>(threshold: T) -> Result<()> {
    if !(threshold > T::zero() && threshold < T::one()) {
        return Err(Error::validation(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(())
}

/// Fuses one subject. `p_fused ≥ threshold` is ASD.
pub fn fuse<T: Scalar>(
    p_tab: &PredictionScore<T>,
    p_img: &PredictionScore<T>,
    w: &FusionWeights<T>,
    threshold: T,
) -> Result<FusedDecision<T>> {
    check_threshold(threshold)?;
    if p_tab.module != Module::Tabular || p_img.module != Module::Image {
        return Err(Error::Pairing(format!(
            "expected a tabular and an image score, got {} and {}",
            p_tab.module, p_img.module
        )));
    }
    if p_tab.subject_id != p_img.subject_id {
        return Err(Error::Pairing(format!(
            "subject {} cannot be fused with subject {}",
            p_tab.subject_id, p_img.subject_id
        )));
    }
    let (p1, p2) = (p_tab.p, p_img.p);
    // Rounding can push the sum an ulp outside the inputs; clamp so the
    // result is always between them.
    let p_fused = (w.w_tabular * p1 + w.w_image * p2).max(p1.min(p2)).min(p1.max(p2));
    Ok(FusedDecision {
        subject_id: p_tab.subject_id.clone(),
        p_tabular: p1,
        p_image: p2,
        p_fused,
        label: if p_fused >= threshold { Label::Asd } else { Label::NonAsd },
        weights: *w,
        threshold,
    })
}

/// Componentwise convex combination of two modules' metrics.
///
/// This is the metric-level reading of "averaging the two results"; an
/// undefined component on either side stays undefined.
pub fn aggregate_metrics<T: Scalar>(
    m_tab: &MetricTriple<T>,
    m_img: &MetricTriple<T>,
    w: &FusionWeights<T>,
) -> Result<MetricTriple<T>> {
    let combine = |a: Option<T>, b: Option<T>| -> Result<Option<T>> {
        for v in [a, b].into_iter().flatten() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::validation(format!("metric {v} outside [0, 1]")));
            }
        }
        Ok(match (a, b) {
            (Some(a), Some(b)) => Some(w.w_tabular * a + w.w_image * b),
            _ => None,
        })
    };
    Ok(MetricTriple {
        accuracy: combine(m_tab.accuracy, m_img.accuracy)?,
        sensitivity: combine(m_tab.sensitivity, m_img.sensitivity)?,
        precision: combine(m_tab.precision, m_img.precision)?,
    })
}

fn index_scores<'a, T: Scalar>(
    scores: &'a [PredictionScore<T>],
    module: Module,
) -> Result<BTreeMap<&'a str, &'a PredictionScore<T>>> {
    let mut map = BTreeMap::new();
    for s in scores {
        if s.module != module {
            return Err(Error::Pairing(format!(
                "{} score for {} found among {module} scores",
                s.module, s.subject_id
            )));
        }
        if map.insert(s.subject_id.as_str(), s).is_some() {
            return Err(Error::Pairing(format!("duplicate {module} score for {}", s.subject_id)));
        }
    }
    Ok(map)
}

/// Fuses every subject, ordered by subject id.
///
/// Both score lists must cover the same subjects; otherwise the error lists
/// the ids missing from each side.
pub fn run_hybrid<T: Scalar>(
    tab_scores: &[PredictionScore<T>],
    img_scores: &[PredictionScore<T>],
    strategy: Strategy,
    provenance: (ModelProvenance, ModelProvenance),
    threshold: T,
) -> Result<Vec<FusedDecision<T>>> {
    check_threshold(threshold)?;
    let tab = index_scores(tab_scores, Module::Tabular)?;
    let img = index_scores(img_scores, Module::Image)?;
    let tab_ids: BTreeSet<&str> = tab.keys().copied().collect();
    let img_ids: BTreeSet<&str> = img.keys().copied().collect();
    if tab_ids != img_ids {
        let no_image: Vec<&str> = tab_ids.difference(&img_ids).copied().collect();
        let no_tab: Vec<&str> = img_ids.difference(&tab_ids).copied().collect();
        return Err(Error::Pairing(format!(
            "subject sets differ; missing image scores: [{}]; missing tabular scores: [{}]",
            no_image.join(", "),
            no_tab.join(", ")
        )));
    }
    let w = weights_for(strategy, provenance.0, provenance.1)?;
    tab.iter()
        .map(|(id, t)| fuse(t, img[id], &w, threshold))
        .collect()
}

/// Confusion matrix of fused decisions against ground truth by subject id.
pub fn decision_confusion<T: Scalar>(
    decisions: &[FusedDecision<T>],
    truth: &BTreeMap<String, Label>,
) -> Result<ConfusionMatrix> {
    let mut c = ConfusionMatrix::default();
    for d in decisions {
        let actual = truth
            .get(&d.subject_id)
            .ok_or_else(|| Error::Pairing(format!("no ground-truth label for {}", d.subject_id)))?;
        c.record(d.label, *actual);
    }
    Ok(c)
}

/// CSV `subject_id,module,probability`.
pub fn scores_to_csv<T: Scalar>(scores: &[PredictionScore<T>]) -> String {
    let mut s = String::from("subject_id,module,probability\n");
    for p in scores {
        let _ = writeln!(s, "{},{},{}", p.subject_id, p.module, p.p);
    }
    s
}

/// Parses `subject_id,module,probability` rows. Row numbers in errors count
/// data rows from 1.
pub fn parse_scores_csv<T: Scalar>(text: &str) -> Result<Vec<PredictionScore<T>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Schema("score file is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["subject_id", "module", "probability"] {
        return Err(Error::Schema(format!(
            "expected header subject_id,module,probability, got {header:?}"
        )));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let row = i + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [id, module, p] = fields[..] else {
                return Err(Error::Row {
                    row,
                    message: format!("expected 3 fields, got {}", fields.len()),
                });
            };
            let module: Module = module.parse().map_err(|e: Error| Error::Row {
                row,
                message: e.to_string(),
            })?;
            let p: f64 = p.parse().map_err(|_| Error::Row {
                row,
                message: format!("probability {p:?} is not a number"),
            })?;
            PredictionScore::new(id, module, T::lit(p)).map_err(|e| Error::Row {
                row,
                message: e.to_string(),
            })
        })
        .collect()
}

/// CSV `subject_id,p_tabular,p_image,w_tabular,w_image,p_fused,label`.
pub fn decisions_to_csv<T: Scalar>(decisions: &[FusedDecision<T>]) -> String {
    let mut s = String::from("subject_id,p_tabular,p_image,w_tabular,w_image,p_fused,label\n");
    for d in decisions {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            d.subject_id,
            d.p_tabular,
            d.p_image,
            d.weights.w_tabular,
            d.weights.w_image,
            d.p_fused,
            d.label
        );
    }
    s
}
