use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;
use venuetrace_core::ml::{
    evaluate, metrics_table, split, tune, Axis, ClassifierModel, GridSpec, LabeledDataset, MetricsReport, ModelKind,
    DEFAULT_THRESHOLD, FOLDS, TRAIN_FRACTION,
};

use super::load_records;
use crate::error::{data, runtime, usage, CliResult};
use crate::manifest::{ensure_dir, write_json, Recorder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kinds {
    Lr,
    Nb,
    Both,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Kinds::Both)]
    pub model: Kinds,
    /// Hyperparameter draws per model.
    #[arg(long, default_value_t = 8)]
    pub draws: usize,
    /// Seeds the split and the search.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = FOLDS)]
    pub folds: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Fixes the learning rate instead of searching it.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub nb_smoothing: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

impl TrainArgs {
    fn grid(&self) -> GridSpec {
        let mut g = GridSpec::default();
        if let Some(v) = self.learning_rate {
            g.learning_rate = Axis::Points(vec![v]);
        }
        if let Some(v) = self.iterations {
            g.iterations = Axis::Points(vec![v as f64]);
        }
        if let Some(v) = self.l2 {
            g.l2 = Axis::Points(vec![v]);
        }
        if let Some(v) = self.nb_smoothing {
            g.nb_smoothing = Axis::Points(vec![v]);
        }
        g
    }

    fn kinds(&self) -> Vec<ModelKind> {
        match self.model {
            Kinds::Lr => vec![ModelKind::LogisticRegression],
            Kinds::Nb => vec![ModelKind::NaiveBayes],
            Kinds::Both => vec![ModelKind::LogisticRegression, ModelKind::NaiveBayes],
        }
    }
}

fn file_tag(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::LogisticRegression => "lr",
        ModelKind::NaiveBayes => "nb",
    }
}

pub fn run(args: TrainArgs) -> CliResult<()> {
    if args.draws == 0 || args.folds < 2 || !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage("need draws >= 1, folds >= 2 and a threshold in [0, 1]"));
    }
    let grid = args.grid();
    ensure_dir(&args.out_dir)?;
    let config = json!({
        "data": args.data.display().to_string(),
        "models": args.kinds().iter().map(|k| file_tag(*k)).collect::<Vec<_>>(),
        "draws": args.draws,
        "folds": args.folds,
        "threshold": args.threshold,
        "train_fraction": TRAIN_FRACTION,
        "grid": grid,
    });
    let mut rec = Recorder::start("train", &config, Some(args.seed));
    rec.input(&args.data)?;
    let records = load_records(&args.data)?;
    let dataset = LabeledDataset::from_records(&records).map_err(data)?;
    let (train, test) = split(&dataset, TRAIN_FRACTION, args.seed).map_err(data)?;
    if train.len() < args.folds || test.is_empty() {
        return Err(data(format!(
            "{} records are too few for a {}-fold search and a held-out test set",
            dataset.len(),
            args.folds
        )));
    }

    let mut rows: Vec<(ModelKind, MetricsReport)> = Vec::new();
    let mut models = Vec::new();
    let mut touched = std::collections::BTreeSet::new();
    for kind in args.kinds() {
        let search = tune(&train, kind, &grid, args.draws, args.seed, args.folds, args.threshold).map_err(data)?;
        touched.extend(search.touched_ids.iter().copied());
        let model = ClassifierModel::train(kind, &train, &search.best).map_err(data)?;
        let report = evaluate(&model, &test, args.threshold).map_err(runtime)?;
        let path = args.out_dir.join(format!("model-{}.json", file_tag(kind)));
        write_json(&path, &model)?;
        rec.output(&path)?;
        models.push(json!({
            "kind": kind,
            "best": search.best,
            "cv": search.cv,
            "test": report,
            "path": path.display().to_string(),
        }));
        rows.push((kind, report));
    }

    let table: Vec<(&str, &MetricsReport)> = rows.iter().map(|(k, r)| (k.label(), r)).collect();
    let rendered = metrics_table(&table);
    print!("{rendered}");
    let metrics_path = args.out_dir.join("metrics.json");
    write_json(
        &metrics_path,
        &rows.iter().map(|(k, r)| json!({"model": k.label(), "metrics": r})).collect::<Vec<_>>(),
    )?;
    rec.output(&metrics_path)?;

    let mut warnings = Vec::new();
    let acc = |kind| rows.iter().find(|(k, _)| *k == kind).map(|(_, r)| r.accuracy);
    if let (Some(lr), Some(nb)) = (acc(ModelKind::LogisticRegression), acc(ModelKind::NaiveBayes)) {
        if nb >= lr {
            let w = format!("Naive Bayes accuracy {nb:.4} is not below Logistic Regression's {lr:.4}");
            eprintln!("warning: {w}");
            warnings.push(w);
        }
    }
    let test_ids: std::collections::BTreeSet<usize> = test.ids.iter().copied().collect();
    let train_ids: std::collections::BTreeSet<usize> = train.ids.iter().copied().collect();
    let audit = json!({
        "records": dataset.len(),
        "train_size": train.len(),
        "test_size": test.len(),
        "touched_ids": touched.len(),
        "touched_outside_train": touched.difference(&train_ids).count(),
        "touched_in_test": touched.intersection(&test_ids).count(),
    });
    let manifest = rec.finish(&args.out_dir, json!({"models": models, "split_audit": audit, "warnings": warnings}))?;
    println!("manifest: {}", manifest.display());
    Ok(())
}
