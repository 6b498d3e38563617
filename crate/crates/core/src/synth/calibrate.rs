use serde::{Deserialize, Serialize};

use super::archetype::Archetype;
use super::modulation::{risk_score, worst_case_record, ModulationTable};
use super::oracle::bayes_oracle_accuracy;
use super::GeneratorConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub accuracy: f64,
    /// Largest scale tried.
    pub max_alpha: f64,
    pub iterations: usize,
}

impl Default for CalibrationTarget {
    fn default() -> Self {
        CalibrationTarget { accuracy: 0.72, max_alpha: 0.05, iterations: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub alpha: f64,
    pub table: ModulationTable,
    pub accuracy: f64,
    /// Noise-free score of `worst_case_record`.
    pub worst_case: f64,
}

fn evaluate(alpha: f64, archetypes: &[Archetype], config: &GeneratorConfig) -> Calibration {
    let table = ModulationTable::from_shape(alpha);
    let accuracy = bayes_oracle_accuracy(&table, archetypes, config);
    let worst_case = risk_score(&worst_case_record(), &table, config, 0.0);
    Calibration { alpha, table, accuracy, worst_case }
}

/// Bisects the shape scale until the Bayes accuracy reaches the target,
/// assuming accuracy grows with the scale. The returned alpha is rounded to
/// 1e-4 and the table is re-quantised from it.
pub fn calibrate_alpha(archetypes: &[Archetype], config: &GeneratorConfig, target: &CalibrationTarget) -> Calibration {
    let (mut lo, mut hi) = (0.0, target.max_alpha);
    for _ in 0..target.iterations {
        let mid = 0.5 * (lo + hi);
        if evaluate(mid, archetypes, config).accuracy < target.accuracy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = (0.5 * (lo + hi) * 1e4).round() / 1e4;
    evaluate(alpha, archetypes, config)
}
