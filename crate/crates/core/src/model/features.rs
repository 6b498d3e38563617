//! One-hot feature encoding of the questionnaire fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{validate_record, ExposureRecord, Field, Violation};

/// Sizes of the consecutive one-hot groups in a feature vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureLayout {
    group_sizes: Vec<usize>,
}

impl FeatureLayout {
    pub fn new(group_sizes: Vec<usize>) -> Self {
        FeatureLayout { group_sizes }
    }

    /// Layout of [`encode_features`]: one group per questionnaire field.
    pub fn questionnaire() -> Self {
        FeatureLayout::new(Field::ALL.iter().map(|f| f.level_count()).collect())
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn len(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset of the first indicator of each group.
    pub fn offsets(&self) -> Vec<usize> {
        self.group_sizes
            .iter()
            .scan(0, |acc, size| {
                let start = *acc;
                *acc += size;
                Some(start)
            })
            .collect()
    }

    /// Names of all indicators, `Field=level`.
    pub fn questionnaire_names() -> Vec<String> {
        Field::ALL
            .iter()
            .flat_map(|f| f.level_labels().into_iter().map(move |l| format!("{}={l}", f.column_name())))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<u8>,
}

impl FeatureVector {
    pub fn from_active(len: usize, active: impl IntoIterator<Item = usize>) -> Self {
        let mut values = vec![0; len];
        for i in active {
            values[i] = 1;
        }
        FeatureVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| **v != 0).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("record is invalid: {0:?}")]
    InvalidRecord(Vec<Violation>),
    #[error("expected {expected} indicators, found {found}")]
    Length { expected: usize, found: usize },
    #[error("group {group} does not have exactly one active indicator")]
    NotOneHot { group: usize },
}

/// Encodes the 18 questionnaire fields. Timestamp, user id, outcome and risk
/// are not part of the encoding.
pub fn encode_features(record: &ExposureRecord) -> Result<FeatureVector, EncodeError> {
    let violations = validate_record(record);
    if !violations.is_empty() {
        return Err(EncodeError::InvalidRecord(violations));
    }
    Ok(encode_unchecked(record))
}

fn encode_unchecked(record: &ExposureRecord) -> FeatureVector {
    let layout = FeatureLayout::questionnaire();
    let offsets = layout.offsets();
    FeatureVector::from_active(layout.len(), Field::ALL.iter().zip(offsets).map(|(f, off)| off + record.level(*f)))
}

/// Recovers the level index of every questionnaire field, in [`Field::ALL`] order.
pub fn decode_features(features: &FeatureVector) -> Result<Vec<usize>, EncodeError> {
    let layout = FeatureLayout::questionnaire();
    if features.len() != layout.len() {
        return Err(EncodeError::Length { expected: layout.len(), found: features.len() });
    }
    layout
        .offsets()
        .iter()
        .zip(layout.group_sizes())
        .enumerate()
        .map(|(group, (off, size))| {
            let slice = &features.values[*off..off + size];
            match slice.iter().filter(|v| **v != 0).count() {
                1 => Ok(slice.iter().position(|v| *v != 0).unwrap()),
                _ => Err(EncodeError::NotOneHot { group }),
            }
        })
        .collect()
}
