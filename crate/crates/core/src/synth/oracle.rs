//! Exact Bayes-optimal accuracy of the balanced generator.
//!
//! The label depends on the answers only through the modulation sum `s`, so
//! the oracle works on the distribution of `s`. Within an archetype the
//! answers are independent except where a question is conditional on an
//! earlier one; those fields are enumerated jointly.

use std::collections::BTreeMap;

use super::archetype::Archetype;
use super::modulation::ModulationTable;
use super::GeneratorConfig;
use crate::model::levels::{Cleaning, Setting, YesNo, YesNoNa};
use crate::model::{Field, VenueType};

/// Modulation sums are binned on this grid; shipped tables are exact on it.
const BIN: f64 = 1e-4;

type Dist = BTreeMap<i64, f64>;

fn key(delta: f64) -> i64 {
    (delta / BIN).round() as i64
}

fn point(k: i64) -> Dist {
    BTreeMap::from([(k, 1.0)])
}

fn convolve(a: &Dist, b: &Dist) -> Dist {
    let mut out = Dist::new();
    for (ka, pa) in a {
        for (kb, pb) in b {
            *out.entry(ka + kb).or_insert(0.0) += pa * pb;
        }
    }
    out
}

fn add_scaled(into: &mut Dist, from: &Dist, weight: f64) {
    for (k, p) in from {
        *into.entry(*k).or_insert(0.0) += weight * p;
    }
}

fn field_dist(archetype: &Archetype, table: &ModulationTable, field: Field) -> Dist {
    let mut d = Dist::new();
    for (level, p) in archetype.distribution(field).iter().enumerate() {
        if *p > 0.0 {
            *d.entry(key(table.get(field, level))).or_insert(0.0) += p;
        }
    }
    d
}

fn forced(table: &ModulationTable, field: Field, level: usize) -> Dist {
    point(key(table.get(field, level)))
}

fn venue_group(a: &Archetype, t: &ModulationTable) -> Dist {
    let mut out = Dist::new();
    for (index, pv) in a.distribution(Field::LocationType).iter().enumerate() {
        if *pv == 0.0 {
            continue;
        }
        let venue = VenueType::from_code(index as u8 + 1).expect("19 venue levels");
        let venue_delta = forced(t, Field::LocationType, index);
        let cleaning = if venue.asks_cleaning() {
            field_dist(a, t, Field::Cleaning)
        } else {
            forced(t, Field::Cleaning, Cleaning::NotApplicable.index())
        };
        let base = convolve(&venue_delta, &cleaning);
        let settings: Vec<(Setting, f64)> = if venue.asks_setting() {
            Setting::ALL.iter().map(|s| (*s, a.distribution(Field::Setting)[s.index()])).collect()
        } else {
            vec![(Setting::Indoor, 1.0)]
        };
        for (setting, ps) in settings {
            if ps == 0.0 {
                continue;
            }
            let mut branch = convolve(&base, &forced(t, Field::Setting, setting.index()));
            for field in [Field::Contact, Field::PhysicalActivity] {
                let d = if setting == Setting::Outdoor {
                    field_dist(a, t, field)
                } else {
                    forced(t, field, YesNoNa::NotApplicable.index())
                };
                branch = convolve(&branch, &d);
            }
            add_scaled(&mut out, &branch, pv * ps);
        }
    }
    out
}

fn mask_group(a: &Archetype, t: &ModulationTable) -> Dist {
    let na = YesNoNa::NotApplicable.index();
    let mut out = Dist::new();
    let p = a.distribution(Field::MasksWorn);
    let no = convolve(
        &forced(t, Field::MasksWorn, YesNo::No.index()),
        &convolve(&field_dist(a, t, Field::StaffPpe), &forced(t, Field::PeoplePpe, na)),
    );
    let yes = convolve(
        &forced(t, Field::MasksWorn, YesNo::Yes.index()),
        &convolve(&forced(t, Field::StaffPpe, na), &field_dist(a, t, Field::PeoplePpe)),
    );
    add_scaled(&mut out, &no, p[YesNo::No.index()]);
    add_scaled(&mut out, &yes, p[YesNo::Yes.index()]);
    out
}

fn household_group(a: &Archetype, t: &ModulationTable) -> Dist {
    let mut out = Dist::new();
    let p = a.distribution(Field::AllHousehold);
    let no = convolve(&forced(t, Field::AllHousehold, YesNo::No.index()), &field_dist(a, t, Field::SupportBubble));
    let yes = convolve(
        &forced(t, Field::AllHousehold, YesNo::Yes.index()),
        &forced(t, Field::SupportBubble, YesNoNa::NotApplicable.index()),
    );
    add_scaled(&mut out, &no, p[YesNo::No.index()]);
    add_scaled(&mut out, &yes, p[YesNo::Yes.index()]);
    out
}

const INDEPENDENT: [Field; 8] = [
    Field::PeoplePresent,
    Field::TimeSpent,
    Field::SocialDistancing,
    Field::AdditionalMeasures,
    Field::PartySize,
    Field::Airflow,
    Field::Temperature,
    Field::Humidity,
];

/// Distribution of `baseline + Σ deltas` (noise excluded) over the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreDistribution {
    /// `(score, probability)`, ascending by score.
    pub atoms: Vec<(f64, f64)>,
}

pub fn score_distribution(
    table: &ModulationTable,
    archetypes: &[Archetype],
    config: &GeneratorConfig,
) -> ScoreDistribution {
    let mut total = Dist::new();
    for a in archetypes {
        let mut d = convolve(&venue_group(a, table), &mask_group(a, table));
        d = convolve(&d, &household_group(a, table));
        for field in INDEPENDENT {
            d = convolve(&d, &field_dist(a, table, field));
        }
        add_scaled(&mut total, &d, a.prior);
    }
    let atoms =
        total.into_iter().filter(|(_, p)| *p > 0.0).map(|(k, p)| (config.baseline + k as f64 * BIN, p)).collect();
    ScoreDistribution { atoms }
}

/// `E[clamp(X, 0, 1)]` for `X ~ Laplace(m, beta)`; `beta = 0` is a point mass.
pub fn expected_clamped(m: f64, beta: f64) -> f64 {
    if beta <= 0.0 {
        return m.clamp(0.0, 1.0);
    }
    // E[clamp(X)] = ∫_0^1 P(X > t) dt, split at the median.
    if m <= 0.0 {
        0.5 * beta * ((m / beta).exp() - ((m - 1.0) / beta).exp())
    } else if m >= 1.0 {
        1.0 - 0.5 * beta * (((1.0 - m) / beta).exp() - (-m / beta).exp())
    } else {
        let below = m - 0.5 * beta * (1.0 - (-m / beta).exp());
        let above = 0.5 * beta * (1.0 - (-(1.0 - m) / beta).exp());
        below + above
    }
}

fn outcome_probabilities(dist: &ScoreDistribution, config: &GeneratorConfig) -> Vec<(f64, f64)> {
    let w = config.effective_noise_weight();
    dist.atoms
        .iter()
        .map(|(s, p)| (*p, expected_clamped(s + w * config.noise_location, w * config.noise_scale)))
        .collect()
}

/// Positive rate of the unbalanced generator.
pub fn positive_rate(table: &ModulationTable, archetypes: &[Archetype], config: &GeneratorConfig) -> f64 {
    let dist = score_distribution(table, archetypes, config);
    outcome_probabilities(&dist, config).iter().map(|(p, q)| p * q).sum()
}

/// Accuracy of the Bayes-optimal classifier when positives and negatives are
/// equally frequent. 0.5 when either class has zero probability.
pub fn bayes_oracle_accuracy(table: &ModulationTable, archetypes: &[Archetype], config: &GeneratorConfig) -> f64 {
    let dist = score_distribution(table, archetypes, config);
    let qs = outcome_probabilities(&dist, config);
    let pi1: f64 = qs.iter().map(|(p, q)| p * q).sum();
    let pi0 = 1.0 - pi1;
    if pi1 <= 0.0 || pi0 <= 0.0 {
        return 0.5;
    }
    0.5 * qs.iter().map(|(p, q)| p * f64::max(q / pi1, (1.0 - q) / pi0)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{shipped_archetypes, NoiseMode};

    /// Composite Simpson over a wide window of the Laplace density.
    fn quadrature(m: f64, beta: f64) -> f64 {
        let (lo, hi, n) = (m - 60.0 * beta, m + 60.0 * beta, 400_000);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| x.clamp(0.0, 1.0) * (-(x - m).abs() / beta).exp() / (2.0 * beta);
        let mut sum = f(lo) + f(hi);
        for i in 1..n {
            sum += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for (m, beta) in [(0.1, 0.025), (0.0, 0.5), (-0.3, 0.5), (0.97, 0.2), (1.4, 0.5), (0.5, 2.0)] {
            let exact = expected_clamped(m, beta);
            assert!((exact - quadrature(m, beta)).abs() < 1e-7, "m={m} beta={beta}");
        }
        assert_eq!(expected_clamped(0.3, 0.0), 0.3);
        assert_eq!(expected_clamped(-1.0, 0.0), 0.0);
    }

    #[test]
    fn zero_table_is_uninformative() {
        let a = shipped_archetypes();
        let acc = bayes_oracle_accuracy(&ModulationTable::zero(), &a, &GeneratorConfig::default());
        assert!((acc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn separable_single_field() {
        let a = shipped_archetypes();
        let mut t = ModulationTable::zero();
        t.set(Field::MasksWorn, YesNo::No.index(), 1.0);
        let config = GeneratorConfig { baseline: 0.0, noise_mode: NoiseMode::Off, ..Default::default() };
        assert!((bayes_oracle_accuracy(&t, &a, &config) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_is_normalised() {
        let a = shipped_archetypes();
        let d = score_distribution(&ModulationTable::shipped(), &a, &GeneratorConfig::default());
        let total: f64 = d.atoms.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(d.atoms.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn shipped_calibration_band() {
        let acc =
            bayes_oracle_accuracy(&ModulationTable::shipped(), &shipped_archetypes(), &GeneratorConfig::default());
        assert!((acc - 0.72).abs() <= 0.02, "{acc}");
    }
}
