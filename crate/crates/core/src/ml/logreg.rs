//! L2-regularised logistic regression by full-batch gradient descent.
//!
//! The objective is `(1/n)·[Σ NLL + (l2/2)·‖w‖²]`; the bias is not
//! regularised. Features are 0/1 so rows are stored as active indices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use super::{HyperParams, TrainError};

const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Active-index rows of a dataset.
#[derive(Clone, Debug)]
pub struct SparseDesign {
    pub dim: usize,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    labels: Vec<f64>,
}

impl SparseDesign {
    pub fn from_dataset(data: &LabeledDataset) -> Self {
        let mut offsets = Vec::with_capacity(data.len() + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for f in &data.features {
            indices.extend(f.active().map(|i| i as u32));
            offsets.push(indices.len());
        }
        SparseDesign {
            dim: data.layout.len(),
            offsets,
            indices,
            labels: data.labels.iter().map(|l| f64::from(*l)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    fn margin(&self, i: usize, model: &LogisticModel) -> f64 {
        model.bias + self.row(i).iter().map(|&j| model.weights[j as usize]).sum::<f64>()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Row ranges summed independently and combined in order, so results do not
/// depend on scheduling.
fn chunks(rows: usize) -> Vec<std::ops::Range<usize>> {
    (0..rows.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(rows)).collect()
}

pub fn objective(model: &LogisticModel, design: &SparseDesign, l2: f64) -> f64 {
    let partial: Vec<f64> = chunks(design.rows())
        .into_par_iter()
        .map(|range| {
            range
                .map(|i| {
                    let z = design.margin(i, model);
                    softplus(z) - design.labels[i] * z
                })
                .sum()
        })
        .collect();
    let nll: f64 = partial.iter().sum();
    let penalty = 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    (nll + penalty) / design.rows() as f64
}

/// Gradient of [`objective`] with respect to `(weights, bias)`.
pub fn gradient(model: &LogisticModel, design: &SparseDesign, l2: f64) -> (Vec<f64>, f64) {
    let partial: Vec<(Vec<f64>, f64)> = chunks(design.rows())
        .into_par_iter()
        .map(|range| {
            let mut gw = vec![0.0; design.dim];
            let mut gb = 0.0;
            for i in range {
                let residual = sigmoid(design.margin(i, model)) - design.labels[i];
                for &j in design.row(i) {
                    gw[j as usize] += residual;
                }
                gb += residual;
            }
            (gw, gb)
        })
        .collect();
    let mut gw = vec![0.0; design.dim];
    let mut gb = 0.0;
    for (w, b) in partial {
        gw.iter_mut().zip(w).for_each(|(x, y)| *x += y);
        gb += b;
    }
    let n = design.rows() as f64;
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = (*g + l2 * w) / n;
    }
    (gw, gb / n)
}

pub fn train_logreg(train: &LabeledDataset, hp: &HyperParams) -> Result<LogisticModel, TrainError> {
    super::require_both_classes(train)?;
    let design = SparseDesign::from_dataset(train);
    let mut model = LogisticModel { weights: vec![0.0; design.dim], bias: 0.0 };
    for _ in 0..hp.iterations {
        step(&mut model, &design, hp);
    }
    Ok(model)
}

/// One gradient-descent update.
pub fn step(model: &mut LogisticModel, design: &SparseDesign, hp: &HyperParams) {
    let (gw, gb) = gradient(model, design, hp.l2);
    for (w, g) in model.weights.iter_mut().zip(gw) {
        *w -= hp.learning_rate * g;
    }
    model.bias -= hp.learning_rate * gb;
}

impl LogisticModel {
    pub fn predict_active(&self, active: impl Iterator<Item = usize>) -> f64 {
        sigmoid(self.bias + active.map(|j| self.weights[j]).sum::<f64>())
    }
}
