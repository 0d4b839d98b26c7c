//! Confusion matrices, the three headline metrics, and run reports.
//!
//! ASD is the positive class. Sensitivity is recall of ASD and precision is
//! positive predictive value. A metric whose denominator is zero is reported
//! as undefined (`None`, `null` in JSON, `n/a` in summaries) rather than 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, Provenance};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::scalar::Scalar;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Tolerance used when checking stored metrics against the embedded matrix.
const CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Asd, Label::Asd) => self.tp += 1,
            (Label::Asd, Label::NonAsd) => self.fp += 1,
            (Label::NonAsd, Label::NonAsd) => self.tn += 1,
            (Label::NonAsd, Label::Asd) => self.fn_ += 1,
        }
    }
}

/// Counts `(predicted, actual)` pairs.
pub fn confusion(decisions: &[(Label, Label)]) -> Result<ConfusionMatrix> {
    if decisions.is_empty() {
        return Err(Error::validation("cannot build a confusion matrix from no decisions"));
    }
    let mut c = ConfusionMatrix::default();
    for &(p, a) in decisions {
        c.record(p, a);
    }
    Ok(c)
}

/// Accuracy, sensitivity and precision; `None` marks an undefined ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MetricTriple<T: Scalar> {
    pub accuracy: Option<T>,
    pub sensitivity: Option<T>,
    pub precision: Option<T>,
}

impl<T: Scalar> MetricTriple<T> {
    pub fn defined(accuracy: T, sensitivity: T, precision: T) -> Self {
        MetricTriple {
            accuracy: Some(accuracy),
            sensitivity: Some(sensitivity),
            precision: Some(precision),
        }
    }

    pub fn as_array(&self) -> [Option<T>; 3] {
        [self.accuracy, self.sensitivity, self.precision]
    }

    pub fn to_f64(&self) -> MetricTriple<f64> {
        MetricTriple {
            accuracy: self.accuracy.map(Scalar::as_f64),
            sensitivity: self.sensitivity.map(Scalar::as_f64),
            precision: self.precision.map(Scalar::as_f64),
        }
    }
}

fn ratio<T: Scalar>(num: usize, den: usize) -> Option<T> {
    (den > 0).then(|| T::from_count(num) / T::from_count(den))
}

pub fn metrics<T: Scalar>(c: &ConfusionMatrix) -> Result<MetricTriple<T>> {
    let total = c.total();
    if total == 0 {
        return Err(Error::validation("metrics of an empty confusion matrix"));
    }
    Ok(MetricTriple {
        accuracy: ratio(c.tp + c.tn, total),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        precision: ratio(c.tp, c.tp + c.fp),
    })
}

/// Fusion parameters recorded in a hybrid report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSummary {
    pub strategy: String,
    pub w_tabular: f64,
    pub w_image: f64,
    pub threshold: f64,
}

/// Wall-clock data. Kept in its own field so determinism checks can drop it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub created_unix_secs: u64,
}

impl ReportMetadata {
    pub fn now() -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ReportMetadata { created_unix_secs: secs }
    }
}

/// Serialized outcome of one train / evaluate / fuse run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub run_id: String,
    /// `logreg`, `svm`, `cnn` or `hybrid`.
    pub subject: String,
    pub train: Provenance,
    pub evaluation: Provenance,
    pub validation_augmented: bool,
    pub hyperparameters: BTreeMap<String, serde_json::Value>,
    pub metrics: MetricTriple<f64>,
    pub confusion: ConfusionMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<FusionSummary>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub metadata: ReportMetadata,
}

impl RunReport {
    /// Report whose metrics are computed from `confusion`.
    pub fn new(
        run_id: impl Into<String>,
        subject: impl Into<String>,
        train: Provenance,
        evaluation: Provenance,
        confusion: ConfusionMatrix,
    ) -> Result<Self> {
        Ok(RunReport {
            format_version: REPORT_FORMAT_VERSION,
            run_id: run_id.into(),
            subject: subject.into(),
            train,
            evaluation,
            validation_augmented: train.validation_augmented || evaluation.validation_augmented,
            hyperparameters: BTreeMap::new(),
            metrics: metrics(&confusion)?,
            confusion,
            fusion: None,
            notes: Vec::new(),
            metadata: ReportMetadata::default(),
        })
    }

    /// Checks the stored metrics against a recomputation from the matrix.
    pub fn check_consistency(&self) -> Result<()> {
        let fresh: MetricTriple<f64> = metrics(&self.confusion)?;
        let names = ["accuracy", "sensitivity", "precision"];
        for ((name, stored), want) in names.iter().zip(self.metrics.as_array()).zip(fresh.as_array()) {
            let ok = match (stored, want) {
                (None, None) => true,
                (Some(a), Some(b)) => (a - b).abs() <= CONSISTENCY_TOL,
                _ => false,
            };
            if !ok {
                return Err(Error::Consistency(format!(
                    "{name} is {stored:?} but the confusion matrix gives {want:?}"
                )));
            }
        }
        Ok(())
    }

    /// Parses a report and verifies its metrics.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunReport = serde_json::from_str(text)?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported report format_version {}",
                r.format_version
            )));
        }
        r.check_consistency()?;
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunReport::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Canonical JSON: fixed field order, sorted maps, trailing newline.
pub fn emit_report(r: &RunReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(r)?;
    s.push('\n');
    Ok(s)
}

/// Emits the report and writes it via temp-file-then-rename.
pub fn write_report(path: &Path, r: &RunReport) -> Result<()> {
    write_atomic(path, emit_report(r)?.as_bytes())
}

/// `83.8%`-style rendering; `n/a` for undefined values.
pub fn format_percent(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.1}%", v * 100.0),
        None => "n/a".to_string(),
    }
}

/// Human-readable summary of one report.
pub fn render_summary(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "run {} ({})", r.run_id, r.subject);
    let _ = writeln!(
        s,
        "  train: {} subjects ({} ASD / {} non-ASD)",
        r.train.n_total, r.train.n_asd, r.train.n_nonasd
    );
    let _ = writeln!(
        s,
        "  evaluated: {} subjects ({} ASD / {} non-ASD)",
        r.evaluation.n_total, r.evaluation.n_asd, r.evaluation.n_nonasd
    );
    if r.validation_augmented {
        let _ = writeln!(s, "  validation set augmented with extra images");
    }
    if let Some(f) = &r.fusion {
        let _ = writeln!(
            s,
            "  fusion: {} (w_tabular {:.5}, w_image {:.5}, threshold {})",
            f.strategy, f.w_tabular, f.w_image, f.threshold
        );
    }
    let c = &r.confusion;
    let _ = writeln!(s, "  confusion: tp {} fp {} tn {} fn {}", c.tp, c.fp, c.tn, c.fn_);
    let _ = writeln!(
        s,
        "  accuracy {}  sensitivity {}  precision {}",
        format_percent(r.metrics.accuracy),
        format_percent(r.metrics.sensitivity),
        format_percent(r.metrics.precision)
    );
    for n in &r.notes {
        let _ = writeln!(s, "  note: {n}");
    }
    s
}

fn csv_metric(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Side-by-side metric table over several runs.
pub fn metrics_table_csv(reports: &[RunReport]) -> String {
    let mut s = String::from(
        "run_id,subject,strategy,n_train,n_asd_train,n_evaluated,accuracy,sensitivity,precision,validation_augmented\n",
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.run_id,
            r.subject,
            r.fusion.as_ref().map(|f| f.strategy.as_str()).unwrap_or(""),
            r.train.n_total,
            r.train.n_asd,
            r.evaluation.n_total,
            csv_metric(r.metrics.accuracy),
            csv_metric(r.metrics.sensitivity),
            csv_metric(r.metrics.precision),
            r.validation_augmented
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Asd, NonAsd};

    fn cm(tp: usize, fp: usize, tn: usize, fn_: usize) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[(Asd, Asd)]).unwrap(), cm(1, 0, 0, 0));
        assert_eq!(confusion(&[(Asd, NonAsd), (NonAsd, Asd)]).unwrap(), cm(0, 1, 0, 1));
        assert!(confusion(&[]).is_err());
    }

    #[test]
    fn metric_examples() {
        let m: MetricTriple<f64> = metrics(&cm(8, 2, 8, 2)).unwrap();
        assert_eq!(m, MetricTriple::defined(0.8, 0.8, 0.8));
        let m: MetricTriple<f64> = metrics(&cm(0, 0, 5, 0)).unwrap();
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.precision, None);
        assert_eq!(m.accuracy, Some(1.0));
        let m: MetricTriple<f32> = metrics(&cm(3, 0, 4, 0)).unwrap();
        assert_eq!(m, MetricTriple::defined(1.0, 1.0, 1.0));
        assert!(metrics::<f64>(&cm(0, 0, 0, 0)).is_err());
    }

    fn report(c: ConfusionMatrix) -> RunReport {
        let p = Provenance {
            n_total: 20,
            n_asd: 10,
            n_nonasd: 10,
            validation_augmented: false,
        };
        RunReport::new("r1", "svm", p, p, c).unwrap()
    }

    #[test]
    fn emit_parse_emit_is_identical() {
        let mut r = report(cm(8, 2, 8, 2));
        r.hyperparameters.insert("lr".into(), serde_json::json!(0.1));
        r.hyperparameters.insert("epochs".into(), serde_json::json!(10));
        let a = emit_report(&r).unwrap();
        let b = emit_report(&RunReport::from_json(&a).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"validation_augmented\": false"));
    }

    #[test]
    fn tampered_accuracy_fails_on_load() {
        let mut r = report(cm(8, 2, 8, 2));
        r.metrics.accuracy = Some(0.9);
        let text = emit_report(&r).unwrap();
        assert!(matches!(RunReport::from_json(&text), Err(Error::Consistency(_))));
    }

    #[test]
    fn undefined_metric_survives_roundtrip() {
        let r = report(cm(0, 0, 5, 0));
        let text = emit_report(&r).unwrap();
        assert!(text.contains("\"sensitivity\": null"));
        assert_eq!(RunReport::from_json(&text).unwrap(), r);
    }

    #[test]
    fn summary_uses_one_decimal_percentages() {
        assert_eq!(format_percent(Some(0.838)), "83.8%");
        assert_eq!(format_percent(None), "n/a");
        let s = render_summary(&report(cm(8, 2, 8, 2)));
        assert!(s.contains("accuracy 80.0%"), "{s}");
    }

    #[test]
    fn table_has_row_per_report() {
        let t = metrics_table_csv(&[report(cm(8, 2, 8, 2)), report(cm(1, 0, 0, 0))]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(1).unwrap().starts_with("r1,svm,,20,10,20,0.8,0.8,0.8,false"));
    }
}
