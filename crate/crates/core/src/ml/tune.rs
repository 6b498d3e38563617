//! Random search over hyperparameters scored by k-fold cross-validation.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{kfold, LabeledDataset};
use super::metrics::MetricsReport;
use super::{evaluate, ClassifierModel, HyperParams, ModelKind, TrainError};

/// Values one hyperparameter can take.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Each point equally likely.
    Points(Vec<f64>),
    /// `exp(U[ln lo, ln hi])`.
    LogUniform { lo: f64, hi: f64 },
}

impl Axis {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Axis::Points(points) => points[rng.random_range(0..points.len())],
            Axis::LogUniform { lo, hi } => (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp(),
        }
    }

    fn validate(&self, name: &str) -> Result<(), TrainError> {
        let ok = match self {
            Axis::Points(points) => !points.is_empty() && points.iter().all(|p| p.is_finite()),
            Axis::LogUniform { lo, hi } => *lo > 0.0 && lo <= hi && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidHyperParams(format!("axis `{name}` is empty or invalid")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rate: Axis,
    pub iterations: Axis,
    pub l2: Axis,
    pub nb_smoothing: Axis,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            learning_rate: Axis::LogUniform { lo: 1e-3, hi: 1.0 },
            iterations: Axis::LogUniform { lo: 50.0, hi: 2000.0 },
            l2: Axis::LogUniform { lo: 1e-4, hi: 10.0 },
            nb_smoothing: Axis::LogUniform { lo: 0.1, hi: 10.0 },
        }
    }
}

impl GridSpec {
    /// Every axis fixed to the given point.
    pub fn single(hp: &HyperParams) -> Self {
        GridSpec {
            learning_rate: Axis::Points(vec![hp.learning_rate]),
            iterations: Axis::Points(vec![hp.iterations as f64]),
            l2: Axis::Points(vec![hp.l2]),
            nb_smoothing: Axis::Points(vec![hp.nb_smoothing]),
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        self.learning_rate.validate("learning_rate")?;
        self.iterations.validate("iterations")?;
        self.l2.validate("l2")?;
        self.nb_smoothing.validate("nb_smoothing")
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> HyperParams {
        HyperParams {
            learning_rate: self.learning_rate.sample(rng),
            iterations: self.iterations.sample(rng).round().max(0.0) as usize,
            l2: self.l2.sample(rng),
            nb_smoothing: self.nb_smoothing.sample(rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: HyperParams,
    /// Mean over the folds.
    pub cv: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best: HyperParams,
    pub cv: MetricsReport,
    pub trials: Vec<Trial>,
    /// Ids of every record used for fitting or scoring during the search.
    pub touched_ids: BTreeSet<usize>,
}

/// Index of the highest `(accuracy, f1)`; the earliest wins exact ties.
pub fn select_best(scores: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (acc, f1)) in scores.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let (b_acc, b_f1) = scores[b];
                *acc > b_acc || (*acc == b_acc && *f1 > b_f1)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Draws `n_draws` configurations with `seed`, scores each by mean k-fold
/// accuracy (then F1) on `train`, and returns the winner.
pub fn tune(
    train: &LabeledDataset,
    kind: ModelKind,
    grid: &GridSpec,
    n_draws: usize,
    seed: u64,
    k: usize,
    threshold: f64,
) -> Result<TuneOutcome, TrainError> {
    if n_draws == 0 {
        return Err(TrainError::InvalidHyperParams("n_draws must be at least 1".into()));
    }
    grid.validate()?;
    let folds = kfold(train.len(), k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut touched_ids = BTreeSet::new();
    let mut trials = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let params = grid.draw(&mut rng);
        let mut reports = Vec::with_capacity(folds.len());
        for fold in &folds {
            let fit = train.subset(&fold.fit);
            let holdout = train.subset(&fold.holdout);
            touched_ids.extend(fit.ids.iter().chain(&holdout.ids).copied());
            let model = ClassifierModel::train(kind, &fit, &params)?;
            reports.push(evaluate(&model, &holdout, threshold).expect("holdout folds are non-empty"));
        }
        trials.push(Trial { params, cv: MetricsReport::mean(&reports) });
    }
    let keys: Vec<(f64, f64)> = trials.iter().map(|t| (t.cv.accuracy, t.cv.f1)).collect();
    let best = select_best(&keys).expect("at least one trial");
    Ok(TuneOutcome { best: trials[best].params, cv: trials[best].cv.clone(), trials, touched_ids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureLayout, FeatureVector};

    #[test]
    fn selection_rules() {
        assert_eq!(select_best(&[(0.70, 0.5), (0.60, 0.9)]), Some(0));
        assert_eq!(select_best(&[(0.70, 0.69), (0.70, 0.71)]), Some(1));
        assert_eq!(select_best(&[(0.70, 0.71), (0.70, 0.71)]), Some(0));
        assert_eq!(select_best(&[]), None);
    }

    fn noisy(n: usize) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a = rng.random_range(0..2);
            let p = if a == 1 { 0.8 } else { 0.3 };
            features.push(FeatureVector::from_active(4, [a, 2 + rng.random_range(0..2)]));
            labels.push(u8::from(rng.random::<f64>() < p));
        }
        LabeledDataset::new(FeatureLayout::new(vec![2, 2]), features, labels, (100..100 + n).collect()).unwrap()
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let hp = HyperParams { learning_rate: 0.3, iterations: 20, l2: 0.01, nb_smoothing: 2.0 };
        let out = tune(&noisy(200), ModelKind::LogisticRegression, &GridSpec::single(&hp), 3, 9, 10, 0.5).unwrap();
        assert_eq!(out.best, hp);
        assert_eq!(out.trials.len(), 3);
        assert_eq!(out.touched_ids, (100..300).collect());
    }

    #[test]
    fn deterministic_per_seed() {
        let data = noisy(300);
        let grid = GridSpec { iterations: Axis::Points(vec![10.0, 30.0]), ..GridSpec::default() };
        let a = tune(&data, ModelKind::LogisticRegression, &grid, 4, 1, 5, 0.5).unwrap();
        let b = tune(&data, ModelKind::LogisticRegression, &grid, 4, 1, 5, 0.5).unwrap();
        assert_eq!(a, b);
        for t in &a.trials {
            assert!((1e-3..=1.0).contains(&t.params.learning_rate));
            assert!((1e-4..=10.0).contains(&t.params.l2));
        }
    }

    #[test]
    fn rejects_empty_search() {
        let data = noisy(50);
        assert!(tune(&data, ModelKind::NaiveBayes, &GridSpec::default(), 0, 1, 10, 0.5).is_err());
        let bad = GridSpec { l2: Axis::Points(vec![]), ..GridSpec::default() };
        assert!(tune(&data, ModelKind::NaiveBayes, &bad, 1, 1, 10, 0.5).is_err());
    }
}
