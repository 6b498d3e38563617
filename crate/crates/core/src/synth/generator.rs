use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;
use uuid::{Builder, Uuid};

use super::archetype::{categorical, sample_answers, validate_archetypes, Archetype, ArchetypeError};
use super::laplace::laplace_sample;
use super::modulation::{risk_score, ModulationTable, SignViolation};
use super::{ConfigError, GeneratorConfig};
use crate::model::levels::Outcome;
use crate::model::{ExposureRecord, Timestamp};

/// Upper bound on draws per requested record when filling balanced quotas.
const BALANCING_DRAW_FACTOR: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Archetype(#[from] ArchetypeError),
    #[error("modulation table invalid: {0:?}")]
    Table(Vec<SignViolation>),
    #[error("cannot balance: {positives} positive and {negatives} negative outcomes in {draws} draws")]
    BalancingImpossible { positives: usize, negatives: usize, draws: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedDataset {
    pub records: Vec<ExposureRecord>,
    pub positives: usize,
    pub negatives: usize,
    /// Records drawn, including those discarded by balancing.
    pub draws: usize,
}

/// Pseudonymous user `index` of the pool of a run seeded with `seed`.
pub fn user_id_for(seed: u64, index: usize) -> Uuid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - index as u64);
    Builder::from_random_bytes(rng.random()).into_uuid()
}

fn record_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws one labelled record and reports which archetype produced it.
pub fn sample_with_context<R: Rng + ?Sized>(
    rng: &mut R,
    config: &GeneratorConfig,
    archetypes: &[Archetype],
    table: &ModulationTable,
) -> (usize, ExposureRecord) {
    let priors: Vec<f64> = archetypes.iter().map(|a| a.prior).collect();
    let context = categorical(rng, &priors);
    let mut record = sample_answers(rng, &archetypes[context]);
    record.timestamp = Timestamp(config.horizon_start.0 + rng.random_range(0..config.horizon_minutes));
    record.user_id = user_id_for(config.seed, rng.random_range(0..config.user_pool));
    let eps = if config.effective_noise_weight() > 0.0 {
        laplace_sample(rng, config.noise_location, config.noise_scale)
    } else {
        0.0
    };
    let risk = risk_score(&record, table, config, eps);
    record.risk_of_contamination = Some(risk);
    record.led_to_contamination = if rng.random::<f64>() < risk { Outcome::Yes } else { Outcome::No };
    (context, record)
}

pub fn sample_record<R: Rng + ?Sized>(
    rng: &mut R,
    config: &GeneratorConfig,
    archetypes: &[Archetype],
    table: &ModulationTable,
) -> ExposureRecord {
    sample_with_context(rng, config, archetypes, table).1
}

fn draw_range(
    config: &GeneratorConfig,
    archetypes: &[Archetype],
    table: &ModulationTable,
    range: std::ops::Range<usize>,
) -> Vec<ExposureRecord> {
    range.into_par_iter().map(|i| sample_record(&mut record_rng(config.seed, i), config, archetypes, table)).collect()
}

/// Record `i` is a function of `(seed, i)` alone, so output does not depend on
/// the thread count. Balanced runs keep the first `n/2` records of each class
/// in draw order.
pub fn generate_dataset(
    config: &GeneratorConfig,
    archetypes: &[Archetype],
    table: &ModulationTable,
) -> Result<GeneratedDataset, GenerateError> {
    config.validate()?;
    validate_archetypes(archetypes)?;
    table.check().map_err(GenerateError::Table)?;
    let n = config.n_records;

    if !config.balanced {
        let records = draw_range(config, archetypes, table, 0..n);
        let positives = records.iter().filter(|r| r.led_to_contamination == Outcome::Yes).count();
        return Ok(GeneratedDataset { positives, negatives: n - positives, draws: n, records });
    }

    let quota = n / 2;
    let cap = n.saturating_mul(BALANCING_DRAW_FACTOR);
    let (mut pos, mut neg) = (Vec::with_capacity(quota), Vec::with_capacity(quota));
    let (mut seen_pos, mut seen_neg) = (0usize, 0usize);
    let mut draws = 0;
    while pos.len() < quota || neg.len() < quota {
        if draws >= cap || (draws >= n && (seen_pos == 0 || seen_neg == 0)) {
            return Err(GenerateError::BalancingImpossible { positives: seen_pos, negatives: seen_neg, draws });
        }
        let batch_end = (draws + n).min(cap);
        for (offset, record) in draw_range(config, archetypes, table, draws..batch_end).into_iter().enumerate() {
            let index = draws + offset;
            if record.led_to_contamination == Outcome::Yes {
                seen_pos += 1;
                if pos.len() < quota {
                    pos.push((index, record));
                }
            } else {
                seen_neg += 1;
                if neg.len() < quota {
                    neg.push((index, record));
                }
            }
            if pos.len() == quota && neg.len() == quota {
                draws = index + 1;
                break;
            }
        }
        if pos.len() < quota || neg.len() < quota {
            draws = batch_end;
        }
    }

    let mut kept: Vec<(usize, ExposureRecord)> = pos.into_iter().chain(neg).collect();
    kept.sort_by_key(|(i, _)| *i);
    Ok(GeneratedDataset {
        records: kept.into_iter().map(|(_, r)| r).collect(),
        positives: quota,
        negatives: quota,
        draws,
    })
}
