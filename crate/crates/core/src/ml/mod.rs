//! Classifier pipeline: splitting, cross-validation, logistic regression,
//! naive Bayes, metrics and random hyperparameter search.

mod dataset;
pub mod logreg;
mod metrics;
pub mod nb;
mod tune;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::FeatureVector;

pub use dataset::{kfold, split, DatasetError, Fold, LabeledDataset};
pub use logreg::{train_logreg, LogisticModel, SparseDesign};
pub use metrics::{auc, metrics_table, Confusion, MetricsReport, METRIC_NAMES};
pub use nb::{train_nb, NaiveBayesModel};
pub use tune::{select_best, tune, Axis, GridSpec, Trial, TuneOutcome};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const TRAIN_FRACTION: f64 = 0.7;
pub const FOLDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    pub nb_smoothing: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams { learning_rate: 0.5, iterations: 400, l2: 1e-3, nb_smoothing: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training set holds a single class")]
    SingleClassTrainingSet,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model expects {expected} features, got {found}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub found: usize,
}

fn require_both_classes(train: &LabeledDataset) -> Result<(), TrainError> {
    let positives = train.positives();
    if positives == 0 || positives == train.len() {
        Err(TrainError::SingleClassTrainingSet)
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    LogisticRegression,
    NaiveBayes,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "Logistic Regression",
            ModelKind::NaiveBayes => "Naive Bayes",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ClassifierModel {
    LogisticRegression(LogisticModel),
    NaiveBayes(NaiveBayesModel),
}

impl ClassifierModel {
    pub fn train(kind: ModelKind, train: &LabeledDataset, hp: &HyperParams) -> Result<Self, TrainError> {
        Ok(match kind {
            ModelKind::LogisticRegression => ClassifierModel::LogisticRegression(train_logreg(train, hp)?),
            ModelKind::NaiveBayes => ClassifierModel::NaiveBayes(train_nb(train, hp.nb_smoothing)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ClassifierModel::LogisticRegression(_) => ModelKind::LogisticRegression,
            ClassifierModel::NaiveBayes(_) => ModelKind::NaiveBayes,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ClassifierModel::LogisticRegression(m) => m.weights.len(),
            ClassifierModel::NaiveBayes(m) => m.layout.len(),
        }
    }
}

pub fn predict_proba(model: &ClassifierModel, features: &FeatureVector) -> Result<f64, DimensionMismatch> {
    if features.len() != model.dim() {
        return Err(DimensionMismatch { expected: model.dim(), found: features.len() });
    }
    Ok(match model {
        ClassifierModel::LogisticRegression(m) => m.predict_active(features.active()),
        ClassifierModel::NaiveBayes(m) => m.predict_active(features.active()),
    })
}

pub fn scores(model: &ClassifierModel, data: &LabeledDataset) -> Result<Vec<f64>, DimensionMismatch> {
    data.features.iter().map(|f| predict_proba(model, f)).collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluateError {
    #[error("test set is empty")]
    Empty,
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

pub fn evaluate(
    model: &ClassifierModel,
    test: &LabeledDataset,
    threshold: f64,
) -> Result<MetricsReport, EvaluateError> {
    if test.is_empty() {
        return Err(EvaluateError::Empty);
    }
    Ok(MetricsReport::from_scores(&scores(model, test)?, &test.labels, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureLayout;

    #[test]
    fn logistic_limits() {
        let zero = ClassifierModel::LogisticRegression(LogisticModel { weights: vec![0.0; 3], bias: 0.0 });
        let x = FeatureVector::from_active(3, [1]);
        assert_eq!(predict_proba(&zero, &x), Ok(0.5));
        let saturated = ClassifierModel::LogisticRegression(LogisticModel { weights: vec![0.0; 3], bias: 50.0 });
        assert!(predict_proba(&saturated, &x).unwrap() > 1.0 - 1e-12);
        let wrong = FeatureVector::from_active(4, [1]);
        assert_eq!(predict_proba(&zero, &wrong), Err(DimensionMismatch { expected: 3, found: 4 }));
    }

    #[test]
    fn single_class_is_rejected() {
        let features = vec![FeatureVector::from_active(2, [0]); 3];
        let data = LabeledDataset::new(FeatureLayout::new(vec![2]), features, vec![1, 1, 1], vec![0, 1, 2]).unwrap();
        for kind in [ModelKind::LogisticRegression, ModelKind::NaiveBayes] {
            assert_eq!(
                ClassifierModel::train(kind, &data, &HyperParams::default()),
                Err(TrainError::SingleClassTrainingSet)
            );
        }
    }

    #[test]
    fn model_serialises() {
        let m = ClassifierModel::LogisticRegression(LogisticModel { weights: vec![0.25, -1.0], bias: 0.5 });
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"kind\":\"LogisticRegression\""));
        assert_eq!(serde_json::from_str::<ClassifierModel>(&text).unwrap(), m);
    }
}
