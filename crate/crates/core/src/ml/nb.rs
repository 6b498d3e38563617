//! Categorical naive Bayes over the one-hot groups of a feature layout.

use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use super::TrainError;
use crate::model::FeatureLayout;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub layout: FeatureLayout,
    /// Log prior of class 0 and class 1.
    pub log_prior: [f64; 2],
    /// `log_likelihood[class][indicator]`: log P(level | class) of the
    /// indicator's group.
    pub log_likelihood: [Vec<f64>; 2],
}

/// Level frequencies per class with `smoothing` added to every count.
pub fn train_nb(train: &LabeledDataset, smoothing: f64) -> Result<NaiveBayesModel, TrainError> {
    super::require_both_classes(train)?;
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(TrainError::InvalidHyperParams("smoothing must be finite and non-negative".into()));
    }
    let dim = train.layout.len();
    let mut counts = [vec![0.0f64; dim], vec![0.0f64; dim]];
    let mut class_totals = [0.0f64; 2];
    for (f, y) in train.features.iter().zip(&train.labels) {
        let class = usize::from(*y);
        class_totals[class] += 1.0;
        for j in f.active() {
            counts[class][j] += 1.0;
        }
    }
    let n = class_totals[0] + class_totals[1];
    let offsets = train.layout.offsets();
    let log_likelihood = [0, 1].map(|class| {
        let mut out = vec![0.0; dim];
        for (off, size) in offsets.iter().zip(train.layout.group_sizes()) {
            let denom = class_totals[class] + smoothing * *size as f64;
            for j in *off..off + size {
                out[j] = ((counts[class][j] + smoothing) / denom).ln();
            }
        }
        out
    });
    Ok(NaiveBayesModel {
        layout: train.layout.clone(),
        log_prior: [(class_totals[0] / n).ln(), (class_totals[1] / n).ln()],
        log_likelihood,
    })
}

impl NaiveBayesModel {
    /// Posterior of class 1 given the active indicators.
    pub fn predict_active(&self, active: impl Iterator<Item = usize>) -> f64 {
        let mut score = self.log_prior;
        for j in active {
            score[0] += self.log_likelihood[0][j];
            score[1] += self.log_likelihood[1][j];
        }
        // Normalise in log space: 1 / (1 + e^(s0 - s1)).
        let diff = score[0] - score[1];
        if diff.is_nan() {
            return 0.5;
        }
        super::logreg::sigmoid(-diff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureVector;

    /// One binary group: class 1 shows level A 9 times in 10, class 0 once.
    fn hand_example() -> LabeledDataset {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (class, a_count) in [(1u8, 9), (0u8, 1)] {
            for i in 0..10 {
                features.push(FeatureVector::from_active(2, [usize::from(i >= a_count)]));
                labels.push(class);
            }
        }
        LabeledDataset::new(FeatureLayout::new(vec![2]), features, labels, (0..20).collect()).unwrap()
    }

    #[test]
    fn hand_posterior() {
        let model = train_nb(&hand_example(), 1e-12).unwrap();
        // 0.9·0.5 / (0.9·0.5 + 0.1·0.5)
        assert!((model.predict_active([0].into_iter()) - 0.9).abs() < 1e-9);
        assert!((model.predict_active([1].into_iter()) - 0.1).abs() < 1e-9);
    }

    #[test]
    fn symmetric_data_is_uninformative() {
        let features = (0..4).map(|i| FeatureVector::from_active(2, [i % 2])).collect();
        let data =
            LabeledDataset::new(FeatureLayout::new(vec![2]), features, vec![0, 0, 1, 1], (0..4).collect()).unwrap();
        let model = train_nb(&data, 1.0).unwrap();
        assert!((model.predict_active([0].into_iter()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smoothing_covers_unseen_levels() {
        let features = (0..4).map(|_| FeatureVector::from_active(3, [0])).collect();
        let data =
            LabeledDataset::new(FeatureLayout::new(vec![3]), features, vec![0, 1, 0, 1], (0..4).collect()).unwrap();
        let model = train_nb(&data, 0.5).unwrap();
        let unseen = model.log_likelihood[1][2];
        assert!(unseen.is_finite());
        assert!(unseen.exp() > 0.0);
        for class in 0..2 {
            let total: f64 = model.log_likelihood[class].iter().map(|l| l.exp()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
