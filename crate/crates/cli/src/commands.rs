use std::collections::BTreeMap;
use std::path::Path;

use hybridscreen::datamodel::{split_dataset, Dataset, ImageTensor, Label, ModelProvenance, Provenance, SampleInput};
use hybridscreen::evalreport::{
    confusion, metrics_table_csv, render_summary, write_report, FusionSummary, MetricTriple, ReportMetadata,
    RunReport,
};
use hybridscreen::fusion::{
    aggregate_metrics, decision_confusion, decisions_to_csv, parse_scores_csv, run_hybrid, scores_to_csv,
    weights_for, Module, PredictionScore, Strategy,
};
use hybridscreen::ingest::{
    default_codebook, encode_image, parse_ados_csv, read_image_dataset, synth_ados_records, synth_images,
    synth_paired, write_ados_csv, write_image_dataset, CsvSchema, SynthManifest, SynthesisConfig,
};
use hybridscreen::neural::{augment_validation, default_layers, CallbackConfig, InputShape, NetConfig, train_net};
use hybridscreen::datamodel::AdosModule;
use hybridscreen::tabular::{lr_sweep, train_linear, LinearKind, LinearModel, TabularHyper, SWEEP_TRAIN_RATIO};
use hybridscreen::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    FuseArgs, LinearChoice, ModelKind, ReportArgs, StrategyChoice, SweepArgs, SynthArgs, SynthKind, TrainArgs,
};
use crate::output::{require_dir, require_file, require_path, RunDir};

#[derive(Serialize)]
struct RunRecord<'a, A: Serialize> {
    command: &'a str,
    run_id: &'a str,
    args: &'a A,
    outputs: Vec<String>,
}

fn finish<A: Serialize>(dir: &RunDir, command: &str, args: &A, mut outputs: Vec<String>) -> Result<()> {
    outputs.sort();
    dir.write_json(
        "run.json",
        &RunRecord {
            command,
            run_id: &dir.run_id,
            args,
            outputs,
        },
    )?;
    println!("{}", dir.path.display());
    Ok(())
}

fn to_value<V: Serialize>(v: V) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

// ---- synth ----

pub fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthesisConfig {
        n_samples: a.n,
        asd_fraction: a.asd_fraction,
        feature_count: a.features,
        class_separation: a.separation,
        seed: a.seed,
        image_height: a.height,
        image_width: a.width,
        image_channels: a.channels,
    };
    // Generate before touching the output directory so bad configs leave nothing behind.
    let (records, images) = match a.kind {
        SynthKind::Tabular => (Some(synth_ados_records(&cfg)?), None),
        SynthKind::Image => (None, Some(synth_images::<f64>(&cfg)?)),
        SynthKind::Paired => {
            let (r, i) = synth_paired::<f64>(&cfg)?;
            (Some(r), Some(i))
        }
    };
    let dir = RunDir::create("synth", &a.output, a)?;
    let mut payload = Vec::new();
    let mut outputs = vec!["manifest.json".to_string()];
    if let Some(records) = &records {
        let schema = CsvSchema::standard(default_codebook(cfg.feature_count))?;
        let csv = write_ados_csv(records, &schema);
        dir.write("ados.csv", csv.as_bytes())?;
        payload.extend_from_slice(csv.as_bytes());
        outputs.push("ados.csv".into());
    }
    if let Some(images) = &images {
        write_image_dataset(&dir.file("images"), images)?;
        for s in images.samples() {
            if let SampleInput::Image(img) = &s.input {
                payload.extend(encode_image(img)?);
            }
        }
        outputs.push("images/".into());
    }
    let kind = match a.kind {
        SynthKind::Tabular => "tabular",
        SynthKind::Image => "image",
        SynthKind::Paired => "paired",
    };
    dir.write_json("manifest.json", &SynthManifest::new(kind, &cfg, &payload))?;
    finish(&dir, "synth", a, outputs)
}

// ---- shared helpers ----

fn load_tabular(path: &Path) -> Result<Dataset<f64>> {
    require_file("--data", path)?;
    let text = std::fs::read_to_string(path)?;
    let schema = CsvSchema::infer_standard(&text)?;
    let module = AdosModule::from_feature_count(schema.feature_columns().len())?;
    parse_ados_csv(&text, &schema, module)
}

fn load_images(flag: &str, path: &Path) -> Result<Dataset<f64>> {
    require_dir(flag, path)?;
    require_file(flag, &path.join("labels.csv"))?;
    read_image_dataset(path)
}

fn labels_csv(d: &Dataset<f64>) -> String {
    let mut s = String::from("subject_id,label\n");
    for sample in d.samples() {
        s.push_str(&sample.subject_id);
        s.push(',');
        s.push_str(sample.label.map(Label::as_str).unwrap_or(""));
        s.push('\n');
    }
    s
}

fn parse_label_token(row: usize, tok: &str) -> Result<Option<Label>> {
    match tok {
        "ASD" => Ok(Some(Label::Asd)),
        "NonASD" => Ok(Some(Label::NonAsd)),
        "" => Ok(None),
        other => Err(Error::Row {
            row,
            message: format!("unknown label token {other:?}"),
        }),
    }
}

/// Reads `subject_id,label`; unlabelled rows are skipped.
fn parse_labels_csv(text: &str) -> Result<BTreeMap<String, Label>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != "subject_id,label" {
        return Err(Error::Schema(format!("unexpected labels header {header:?}")));
    }
    let mut out = BTreeMap::new();
    for (row, line) in lines.enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))) {
        if line.is_empty() {
            continue;
        }
        let (id, tok) = line.split_once(',').ok_or_else(|| Error::Row {
            row,
            message: "expected 2 cells".into(),
        })?;
        if let Some(label) = parse_label_token(row, tok)? {
            if out.insert(id.to_string(), label).is_some() {
                return Err(Error::Row {
                    row,
                    message: format!("duplicate subject {id}"),
                });
            }
        }
    }
    Ok(out)
}

/// Test-set scores and the confusion matrix of the labelled part.
struct Evaluated {
    scores: Vec<PredictionScore<f64>>,
    pairs: Vec<(Label, Label)>,
}

fn evaluate_with(
    test: &Dataset<f64>,
    module: Module,
    mut prob: impl FnMut(&SampleInput<f64>) -> Result<f64>,
) -> Result<Evaluated> {
    let mut scores = Vec::with_capacity(test.len());
    let mut pairs = Vec::new();
    for s in test.samples() {
        let p = prob(&s.input)?;
        let predicted = if p > 0.5 { Label::Asd } else { Label::NonAsd };
        if let Some(actual) = s.label {
            pairs.push((predicted, actual));
        }
        scores.push(PredictionScore::new(s.subject_id.clone(), module, p)?);
    }
    Ok(Evaluated { scores, pairs })
}

fn build_report(
    dir: &RunDir,
    subject: &str,
    train: Provenance,
    test: Provenance,
    pairs: &[(Label, Label)],
) -> Result<Option<RunReport>> {
    if pairs.is_empty() {
        eprintln!("warning: no labelled evaluation subjects; report.json not written");
        return Ok(None);
    }
    let mut r = RunReport::new(dir.run_id.clone(), subject, train, test, confusion(pairs)?)?;
    r.metadata = ReportMetadata::now();
    Ok(Some(r))
}

// ---- train ----

fn linear_kind(m: ModelKind) -> Option<LinearKind> {
    match m {
        ModelKind::Logreg => Some(LinearKind::LogReg),
        ModelKind::Svm => Some(LinearKind::LinearSvm),
        ModelKind::Cnn => None,
    }
}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Logreg => "logreg",
        ModelKind::Svm => "svm",
        ModelKind::Cnn => "cnn",
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    if !(a.train_ratio > 0.0 && a.train_ratio < 1.0) {
        return Err(Error::Validation(format!("--train-ratio must lie in (0, 1), got {}", a.train_ratio)));
    }
    match linear_kind(a.model) {
        Some(kind) => train_tabular(a, kind),
        None => train_cnn(a),
    }
}

fn train_tabular(a: &TrainArgs, kind: LinearKind) -> Result<()> {
    if a.augment_validation.is_some() {
        return Err(Error::Validation("--augment-validation only applies to --model cnn".into()));
    }
    let data = load_tabular(&a.data)?;
    let h = TabularHyper {
        learning_rate: a.lr.unwrap_or(1.0),
        epochs: a.epochs.unwrap_or(500),
        l2: a.l2,
        svm_lambda: a.svm_lambda,
        seed: a.seed,
    };
    h.validate()?;
    let split = split_dataset(&data, a.train_ratio, a.seed)?;
    let model = train_linear(&split.train, &h, kind)?;
    let eval = evaluate_with(&split.test, Module::Tabular, |input| match input {
        SampleInput::Features(x) => model.predict_proba(x.values()),
        SampleInput::Image(_) => Err(Error::Validation("expected tabular samples".into())),
    })?;

    let dir = RunDir::create("train", &a.output, a)?;
    let mut outputs = vec!["model.json".to_string(), "scores.csv".into(), "labels.csv".into()];
    dir.write("model.json", model.to_json()?.as_bytes())?;
    dir.write("scores.csv", scores_to_csv(&eval.scores).as_bytes())?;
    dir.write("labels.csv", labels_csv(&split.test).as_bytes())?;
    if let Some(mut r) = build_report(
        &dir,
        model_name(a.model),
        split.train.provenance(),
        split.test.provenance(),
        &eval.pairs,
    )? {
        r.hyperparameters = BTreeMap::from([
            ("learning_rate".to_string(), json!(h.learning_rate)),
            ("epochs".into(), json!(h.epochs)),
            ("l2".into(), json!(h.l2)),
            ("svm_lambda".into(), json!(h.svm_lambda)),
            ("seed".into(), json!(h.seed)),
            ("train_ratio".into(), json!(a.train_ratio)),
        ]);
        write_report(&dir.file("report.json"), &r)?;
        outputs.push("report.json".into());
    }
    finish(&dir, "train", a, outputs)
}

fn train_cnn(a: &TrainArgs) -> Result<()> {
    if !(a.val_fraction > 0.0 && a.val_fraction < 1.0) {
        return Err(Error::Validation(format!("--val-fraction must lie in (0, 1), got {}", a.val_fraction)));
    }
    let data = load_images("--data", &a.data)?;
    let extra = match &a.augment_validation {
        Some(p) => Some(load_images("--augment-validation", p)?),
        None => None,
    };
    let (height, width, channels) = data
        .image_shape()
        .ok_or_else(|| Error::Validation("image dataset is empty".into()))?;
    let mut cfg = NetConfig::with_layers(InputShape { height, width, channels }, default_layers());
    cfg.init_seed = a.seed;
    cfg.batch_size = a.batch_size;
    cfg.epochs = a.epochs.unwrap_or(30);
    cfg.initial_lr = a.lr.unwrap_or(0.1);
    cfg.callback = CallbackConfig {
        lr_decay_factor: a.lr_decay,
        patience: a.patience,
        min_lr: a.min_lr,
        ..CallbackConfig::default()
    };
    cfg.validate()?;

    let split = split_dataset(&data, a.train_ratio, a.seed)?;
    let inner = split_dataset(&split.train, 1.0 - a.val_fraction, a.seed)?;
    let val = match &extra {
        Some(extra) => augment_validation(&inner.test, extra)?,
        None => inner.test.clone(),
    };
    for w in val.warnings() {
        eprintln!("warning: {w}");
    }
    let trained = train_net(&inner.train, &val, &cfg)?;
    let eval = evaluate_with(&split.test, Module::Image, |input| match input {
        SampleInput::Image(img) => trained.network.predict(img as &ImageTensor<f64>),
        SampleInput::Features(_) => Err(Error::Validation("expected image samples".into())),
    })?;

    let dir = RunDir::create("train", &a.output, a)?;
    let mut outputs = vec![
        "model.json".to_string(),
        "model.bin".into(),
        "history.csv".into(),
        "scores.csv".into(),
        "labels.csv".into(),
    ];
    trained.save(&dir.file("model.json"))?;
    dir.write("history.csv", trained.history_csv().as_bytes())?;
    dir.write("scores.csv", scores_to_csv(&eval.scores).as_bytes())?;
    dir.write("labels.csv", labels_csv(&split.test).as_bytes())?;
    if let Some(mut r) = build_report(&dir, "cnn", inner.train.provenance(), split.test.provenance(), &eval.pairs)? {
        r.validation_augmented = trained.validation_augmented;
        r.hyperparameters = BTreeMap::from([
            ("initial_lr".to_string(), json!(cfg.initial_lr)),
            ("epochs".into(), json!(cfg.epochs)),
            ("batch_size".into(), json!(cfg.batch_size)),
            ("seed".into(), json!(a.seed)),
            ("train_ratio".into(), json!(a.train_ratio)),
            ("val_fraction".into(), json!(a.val_fraction)),
            ("callback".into(), to_value(cfg.callback)),
            ("n_validation".into(), json!(val.len())),
            ("best_epoch".into(), json!(trained.best_epoch)),
            ("best_val_accuracy".into(), json!(trained.best_val_accuracy)),
        ]);
        if trained.validation_augmented {
            r.notes.push("validation set augmented with extra images; best_val_accuracy is not a clean held-out estimate".into());
        }
        write_report(&dir.file("report.json"), &r)?;
        outputs.push("report.json".into());
    }
    finish(&dir, "train", a, outputs)
}

// ---- sweep ----

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let data = load_tabular(&a.data)?;
    let kind = match a.model {
        LinearChoice::Logreg => LinearKind::LogReg,
        LinearChoice::Svm => LinearKind::LinearSvm,
    };
    let h = TabularHyper {
        learning_rate: 1.0,
        epochs: a.epochs,
        l2: a.l2,
        svm_lambda: a.svm_lambda,
        seed: a.seed,
    };
    for &r in &a.grid {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Validation(format!("grid rate {r} must be positive and finite")));
        }
    }
    let result = lr_sweep(&data, &a.grid, &h, kind)?;
    let split = split_dataset(&data, SWEEP_TRAIN_RATIO, a.seed)?;
    let best_h = TabularHyper {
        learning_rate: result.best_rate,
        ..h
    };
    let model: LinearModel<f64> = train_linear(&split.train, &best_h, kind)?;
    let eval = evaluate_with(&split.test, Module::Tabular, |input| match input {
        SampleInput::Features(x) => model.predict_proba(x.values()),
        SampleInput::Image(_) => Err(Error::Validation("expected tabular samples".into())),
    })?;

    let dir = RunDir::create("sweep", &a.output, a)?;
    let mut outputs = vec!["sweep.csv".to_string(), "sweep.json".into(), "model.json".into()];
    dir.write("sweep.csv", result.to_csv().as_bytes())?;
    dir.write_json("sweep.json", &result)?;
    dir.write("model.json", model.to_json()?.as_bytes())?;
    let subject = match a.model {
        LinearChoice::Logreg => "logreg",
        LinearChoice::Svm => "svm",
    };
    if let Some(mut r) = build_report(&dir, subject, split.train.provenance(), split.test.provenance(), &eval.pairs)? {
        r.hyperparameters = BTreeMap::from([
            ("best_rate".to_string(), json!(result.best_rate)),
            ("grid".into(), json!(result.grid)),
            ("accuracies".into(), json!(result.accuracies)),
            ("epochs".into(), json!(a.epochs)),
            ("l2".into(), json!(a.l2)),
            ("svm_lambda".into(), json!(a.svm_lambda)),
            ("seed".into(), json!(a.seed)),
        ]);
        r.notes.push(format!("best_rate {}", result.best_rate));
        write_report(&dir.file("report.json"), &r)?;
        outputs.push("report.json".into());
    }
    println!("best_rate {} accuracy {}", result.best_rate, result.best_accuracy());
    finish(&dir, "sweep", a, outputs)
}

// ---- fuse ----

fn strategies(choice: StrategyChoice) -> Vec<Strategy> {
    match choice {
        StrategyChoice::Simple => vec![Strategy::Simple],
        StrategyChoice::ByTrainCount => vec![Strategy::ByTrainCount],
        StrategyChoice::ByAsdCount => vec![Strategy::ByAsdCount],
        StrategyChoice::All => Strategy::ALL.to_vec(),
    }
}

/// Reads the `provenance` object of a linear-model file or network manifest.
fn model_provenance(flag: &str, path: &Path) -> Result<ModelProvenance> {
    require_file(flag, path)?;
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let p = doc
        .get("provenance")
        .ok_or_else(|| Error::Schema(format!("{flag}: {} has no provenance field", path.display())))?;
    Ok(serde_json::from_value(p.clone())?)
}

fn load_scores(flag: &str, path: &Path) -> Result<Vec<PredictionScore<f64>>> {
    require_file(flag, path)?;
    parse_scores_csv(&std::fs::read_to_string(path)?)
}

pub fn fuse(a: &FuseArgs) -> Result<()> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(Error::Validation(format!("--threshold must lie in (0, 1), got {}", a.threshold)));
    }
    let tab = load_scores("--tabular-scores", &a.tabular_scores)?;
    let img = load_scores("--image-scores", &a.image_scores)?;
    let tab_prov = model_provenance("--tabular-model", &a.tabular_model)?;
    let img_prov = model_provenance("--image-model", &a.image_model)?;
    let truth = match &a.labels {
        Some(p) => {
            require_file("--labels", p)?;
            Some(parse_labels_csv(&std::fs::read_to_string(p)?)?)
        }
        None => None,
    };

    let mut runs = Vec::new();
    for strategy in strategies(a.strategy) {
        let decisions = run_hybrid(&tab, &img, strategy, (tab_prov, img_prov), a.threshold)?;
        let w = weights_for::<f64>(strategy, tab_prov, img_prov)?;
        let report = match &truth {
            Some(truth) => {
                let c = decision_confusion(&decisions, truth)?;
                let labels: Vec<Option<Label>> =
                    decisions.iter().map(|d| truth.get(&d.subject_id).copied()).collect();
                let train = Provenance {
                    n_total: tab_prov.n_train + img_prov.n_train,
                    n_asd: tab_prov.n_asd_train + img_prov.n_asd_train,
                    n_nonasd: (tab_prov.n_train - tab_prov.n_asd_train.min(tab_prov.n_train))
                        + (img_prov.n_train - img_prov.n_asd_train.min(img_prov.n_train)),
                    validation_augmented: false,
                };
                Some((c, train, Provenance::from_labels(&labels)))
            }
            None => None,
        };
        runs.push((strategy, decisions, w, report));
    }

    let dir = RunDir::create("fuse", &a.output, a)?;
    let mut outputs = Vec::new();
    for (strategy, decisions, w, report) in runs {
        let name = format!("decisions_{}.csv", strategy.as_str());
        dir.write(&name, decisions_to_csv(&decisions).as_bytes())?;
        outputs.push(name);
        let Some((c, train, evaluation)) = report else { continue };
        let mut r = RunReport::new(dir.run_id.clone(), "hybrid", train, evaluation, c)?;
        r.metadata = ReportMetadata::now();
        r.fusion = Some(FusionSummary {
            strategy: strategy.as_str().to_string(),
            w_tabular: w.w_tabular(),
            w_image: w.w_image(),
            threshold: a.threshold,
        });
        r.hyperparameters = BTreeMap::from([
            ("tabular_provenance".to_string(), to_value(tab_prov)),
            ("image_provenance".into(), to_value(img_prov)),
        ]);
        let name = format!("report_{}.json", strategy.as_str());
        write_report(&dir.file(&name), &r)?;
        println!(
            "{}: w_tabular {:.5} w_image {:.5} accuracy {:?}",
            strategy.as_str(),
            w.w_tabular(),
            w.w_image(),
            r.metrics.accuracy
        );
        outputs.push(name);
    }
    if truth.is_none() {
        eprintln!("warning: no --labels given; only decisions were written");
    }
    finish(&dir, "fuse", a, outputs)
}

// ---- report ----

pub fn report(a: &ReportArgs) -> Result<()> {
    let mut reports = Vec::with_capacity(a.reports.len());
    for p in &a.reports {
        require_path("REPORT", p)?;
        reports.push(RunReport::load(p)?);
    }
    if let Some(choice) = a.aggregate {
        if reports.len() != 2 {
            return Err(Error::Validation(format!(
                "--aggregate needs exactly two reports (tabular, image), got {}",
                reports.len()
            )));
        }
        let prov = |r: &RunReport| ModelProvenance::from(r.train);
        for strategy in strategies(choice) {
            let w = weights_for::<f64>(strategy, prov(&reports[0]), prov(&reports[1]))?;
            let m: MetricTriple<f64> = aggregate_metrics(&reports[0].metrics, &reports[1].metrics, &w)?;
            println!(
                "{}: w_tabular {:.5} w_image {:.5} accuracy {} sensitivity {} precision {}",
                strategy.as_str(),
                w.w_tabular(),
                w.w_image(),
                hybridscreen::evalreport::format_percent(m.accuracy),
                hybridscreen::evalreport::format_percent(m.sensitivity),
                hybridscreen::evalreport::format_percent(m.precision)
            );
        }
        return Ok(());
    }
    if a.table {
        print!("{}", metrics_table_csv(&reports));
    } else {
        for r in &reports {
            print!("{}", render_summary(r));
        }
    }
    Ok(())
}
