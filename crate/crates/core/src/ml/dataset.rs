use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::levels::Outcome;
use crate::model::{encode_features, EncodeError, ExposureRecord, FeatureLayout, FeatureVector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("record {index}: {source}")]
    Encode { index: usize, source: EncodeError },
    #[error("record {index} has no known outcome")]
    UnknownOutcome { index: usize },
    #[error("features, labels and ids differ in length")]
    Ragged,
    #[error("labels must be 0 or 1")]
    NonBinaryLabel,
    #[error("feature vector {index} does not match the layout")]
    Layout { index: usize },
    #[error("need at least {needed} records, have {have}")]
    TooFewRecords { needed: usize, have: usize },
    #[error("dataset is empty")]
    Empty,
}

/// Encoded features with binary labels. `ids` identify the source records
/// and survive splitting, so partitions can be audited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub layout: FeatureLayout,
    pub features: Vec<FeatureVector>,
    pub labels: Vec<u8>,
    pub ids: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(
        layout: FeatureLayout,
        features: Vec<FeatureVector>,
        labels: Vec<u8>,
        ids: Vec<usize>,
    ) -> Result<Self, DatasetError> {
        if features.len() != labels.len() || labels.len() != ids.len() {
            return Err(DatasetError::Ragged);
        }
        if labels.iter().any(|l| *l > 1) {
            return Err(DatasetError::NonBinaryLabel);
        }
        if let Some(index) = features.iter().position(|f| f.len() != layout.len()) {
            return Err(DatasetError::Layout { index });
        }
        Ok(LabeledDataset { layout, features, labels, ids })
    }

    /// Ids are positions in `records`.
    pub fn from_records(records: &[ExposureRecord]) -> Result<Self, DatasetError> {
        let mut features = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for (index, r) in records.iter().enumerate() {
            features.push(encode_features(r).map_err(|source| DatasetError::Encode { index, source })?);
            labels.push(match r.led_to_contamination {
                Outcome::Yes => 1,
                Outcome::No => 0,
                Outcome::Unknown => return Err(DatasetError::UnknownOutcome { index }),
            });
        }
        Ok(LabeledDataset {
            layout: FeatureLayout::questionnaire(),
            features,
            labels,
            ids: (0..records.len()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l == 1).count()
    }

    /// Rows at `positions`, in that order.
    pub fn subset(&self, positions: &[usize]) -> LabeledDataset {
        LabeledDataset {
            layout: self.layout.clone(),
            features: positions.iter().map(|&i| self.features[i].clone()).collect(),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            ids: positions.iter().map(|&i| self.ids[i]).collect(),
        }
    }
}

/// Shuffles with `seed` and puts the first `round(fraction · n)` rows in the
/// training partition.
pub fn split(
    dataset: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), DatasetError> {
    if dataset.is_empty() {
        return Err(DatasetError::Empty);
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((fraction.clamp(0.0, 1.0) * dataset.len() as f64).round() as usize).min(dataset.len());
    Ok((dataset.subset(&order[..cut]), dataset.subset(&order[cut..])))
}

/// Positions of one cross-validation round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub fit: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// Contiguous holdout blocks in dataset order; the first `n mod k` blocks
/// are one row longer.
pub fn kfold(n: usize, k: usize) -> Result<Vec<Fold>, DatasetError> {
    if k == 0 || n < k {
        return Err(DatasetError::TooFewRecords { needed: k.max(1), have: n });
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let end = start + base + usize::from(i < extra);
            let fold = Fold { fit: (0..start).chain(end..n).collect(), holdout: (start..end).collect() };
            start = end;
            fold
        })
        .collect())
}
