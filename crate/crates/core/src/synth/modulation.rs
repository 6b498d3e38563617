use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use super::GeneratorConfig;
use crate::model::levels::*;
use crate::model::{Answers, ExposureRecord, Field, Timestamp, VenueType};

/// Relative risk of every level, indexed like `Field::level_labels`. Protective
/// answers are negative so safe visits can fall below the baseline. The
/// shipped table is these units times `SHIPPED_ALPHA`, rounded to 1e-3.
pub const SHAPE_UNITS: [&[f64]; 18] = [
    // venue codes 1..=19
    &[0.0, 0.0, 0.0, 1.0, -1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 1.0, 0.0, -1.0, 1.0, 1.0, -1.0, 1.0, 0.0, -1.0],
    &[1.0, -2.0],
    &[-2.0, -0.5, 1.0, 2.5],
    &[-3.0, -2.5, -2.0, -1.5, -0.5, 0.0, 1.0, 2.0, 3.0],
    &[-3.0, 2.0],
    &[0.0, 1.0, 0.0],
    &[0.0, 1.5, 0.0],
    &[-2.0, 1.5],
    &[-1.5, 0.5],
    &[-0.5, 0.0, 1.0, 2.0],
    &[-0.5, 1.0],
    &[0.0, 0.5, 0.0],
    &[-3.0, 0.5, 1.0, 2.5],
    &[0.5, 0.0, 0.5],
    &[0.0, 0.5, 0.5],
    &[-0.5, 1.0, 0.0, 0.0],
    &[2.0, 0.0, 0.0],
    &[2.0, 0.0, 0.0],
];

/// Found by `calibrate_alpha` against the shipped archetypes and default
/// generator config.
pub const SHIPPED_ALPHA: f64 = 0.0238;

const GRID: f64 = 1e-3;

/// Additive probability delta for every (field, level).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationTable {
    /// `deltas[field.index()][level]`.
    pub deltas: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignViolation {
    #[error("{field}: `{riskier}` must not carry less risk than `{safer}`")]
    Order { field: Field, riskier: &'static str, safer: &'static str },
    #[error("{field}: expected {expected} levels, found {found}")]
    Coverage { field: Field, expected: usize, found: usize },
    #[error("{field}: non-finite delta")]
    NonFinite { field: Field },
}

/// (field, riskier level, safer level).
fn sign_constraints() -> Vec<(Field, usize, usize)> {
    let mut pairs = vec![
        (Field::Setting, Setting::Indoor.index(), Setting::Outdoor.index()),
        (Field::MasksWorn, YesNo::No.index(), YesNo::Yes.index()),
        (Field::StaffPpe, YesNoNa::No.index(), YesNoNa::Yes.index()),
        (Field::PeoplePpe, YesNoNa::No.index(), YesNoNa::Yes.index()),
        (Field::SocialDistancing, YesNo::No.index(), YesNo::Yes.index()),
        (Field::AdditionalMeasures, YesNo::No.index(), YesNo::Yes.index()),
        (Field::AllHousehold, YesNo::No.index(), YesNo::Yes.index()),
        (Field::SupportBubble, YesNoNa::No.index(), YesNoNa::Yes.index()),
        (Field::Contact, YesNoNa::Yes.index(), YesNoNa::No.index()),
        (Field::PhysicalActivity, YesNoNa::Yes.index(), YesNoNa::No.index()),
        (Field::Cleaning, Cleaning::No.index(), Cleaning::Often.index()),
        (Field::Cleaning, Cleaning::Often.index(), Cleaning::Yes.index()),
        (Field::Temperature, Temperature::Warm.index(), Temperature::Normal.index()),
        (Field::Temperature, Temperature::Cold.index(), Temperature::Normal.index()),
        (Field::Humidity, Humidity::Dryer.index(), Humidity::SameAsOutside.index()),
        (Field::Humidity, Humidity::MoreHumid.index(), Humidity::SameAsOutside.index()),
        (Field::Airflow, Airflow::Confined.index(), Airflow::UnknownCirculation.index()),
        (Field::Airflow, Airflow::Confined.index(), Airflow::MechanicalOnly.index()),
        (Field::Airflow, Airflow::UnknownCirculation.index(), Airflow::WellVentilated.index()),
        (Field::Airflow, Airflow::MechanicalOnly.index(), Airflow::WellVentilated.index()),
    ];
    // Ordered levels: more people, larger parties and longer stays.
    for field in [Field::PeoplePresent, Field::PartySize, Field::TimeSpent] {
        for level in 1..field.level_count() {
            pairs.push((field, level, level - 1));
        }
    }
    pairs
}

impl ModulationTable {
    pub fn zero() -> Self {
        ModulationTable { deltas: Field::ALL.iter().map(|f| vec![0.0; f.level_count()]).collect() }
    }

    /// `alpha · SHAPE_UNITS`, rounded to the 1e-3 grid.
    pub fn from_shape(alpha: f64) -> Self {
        let deltas =
            SHAPE_UNITS.iter().map(|units| units.iter().map(|u| (alpha * u / GRID).round() * GRID).collect()).collect();
        ModulationTable { deltas }
    }

    pub fn shipped() -> Self {
        Self::from_shape(SHIPPED_ALPHA)
    }

    pub fn get(&self, field: Field, level: usize) -> f64 {
        self.deltas[field.index()][level]
    }

    pub fn set(&mut self, field: Field, level: usize, delta: f64) {
        self.deltas[field.index()][level] = delta;
    }

    /// Sum of the deltas of the record's answers.
    pub fn modulation(&self, record: &ExposureRecord) -> f64 {
        Field::ALL.iter().map(|f| self.get(*f, record.level(*f))).sum()
    }

    pub fn check(&self) -> Result<(), Vec<SignViolation>> {
        let mut violations = Vec::new();
        for field in Field::ALL {
            let row = self.deltas.get(field.index()).map_or(&[][..], Vec::as_slice);
            if row.len() != field.level_count() {
                violations.push(SignViolation::Coverage { field, expected: field.level_count(), found: row.len() });
            } else if row.iter().any(|d| !d.is_finite()) {
                violations.push(SignViolation::NonFinite { field });
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        for (field, riskier, safer) in sign_constraints() {
            if self.get(field, riskier) < self.get(field, safer) {
                let labels = field.level_labels();
                violations.push(SignViolation::Order { field, riskier: labels[riskier], safer: labels[safer] });
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}

/// `clamp(baseline + Σ deltas + w·ε, 0, 1)` with `w` from the noise mode.
pub fn risk_score(record: &ExposureRecord, table: &ModulationTable, config: &GeneratorConfig, eps: f64) -> f64 {
    let raw = config.baseline + table.modulation(record) + config.effective_noise_weight() * eps;
    raw.clamp(0.0, 1.0)
}

/// Confined, unmasked, crowded, long, outdoor contact sport with strangers.
pub fn worst_case_record() -> ExposureRecord {
    ExposureRecord::from_answers(
        Timestamp(0),
        Uuid::nil(),
        VenueType::Restaurant,
        Answers {
            setting: Setting::Outdoor,
            people_present: Crowd::ElevenPlus,
            time_spent: StayLength::Over2Hours,
            masks_worn: YesNo::No,
            staff_ppe_correct: YesNoNa::No,
            people_ppe_correct: YesNoNa::NotApplicable,
            social_distancing: YesNo::No,
            additional_measures: YesNo::No,
            party_size: PartySize::FourPlus,
            all_household: YesNo::No,
            all_support_bubble: YesNoNa::No,
            airflow_quality: Airflow::Confined,
            temperature: Temperature::Warm,
            humidity: Humidity::Dryer,
            cleaned_after_use: Cleaning::No,
            contact_between_members: YesNoNa::Yes,
            physical_activity: YesNoNa::Yes,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures::restaurant_visit, validate_record};
    use proptest::prelude::*;

    #[test]
    fn shipped_table_satisfies_constraints() {
        ModulationTable::shipped().check().unwrap();
        ModulationTable::zero().check().unwrap();
        for (units, field) in SHAPE_UNITS.iter().zip(Field::ALL) {
            assert_eq!(units.len(), field.level_count(), "{field}");
        }
    }

    #[test]
    fn shipped_deltas_are_on_grid() {
        for row in ModulationTable::shipped().deltas {
            for d in row {
                assert!(((d / GRID).round() * GRID - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn detects_violations() {
        let mut t = ModulationTable::zero();
        t.set(Field::MasksWorn, YesNo::Yes.index(), 0.1);
        let errs = t.check().unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(matches!(errs[0], SignViolation::Order { field: Field::MasksWorn, .. }));
        t.deltas[3].pop();
        assert!(matches!(t.check().unwrap_err()[0], SignViolation::Coverage { .. }));
    }

    #[test]
    fn baseline_and_clamp() {
        let config = GeneratorConfig::default();
        let zero = ModulationTable::zero();
        let r = restaurant_visit();
        assert_eq!(risk_score(&r, &zero, &config, 0.0), 0.10);
        assert_eq!(risk_score(&r, &zero, &config, -10.0), 0.0);
        assert_eq!(risk_score(&r, &zero, &config, 1000.0), 1.0);
    }

    #[test]
    fn worst_case_band() {
        let w = worst_case_record();
        assert!(validate_record(&w).is_empty());
        let s = risk_score(&w, &ModulationTable::shipped(), &GeneratorConfig::default(), 0.0);
        assert!((0.55..=0.85).contains(&s), "{s}");
    }

    fn arb_record() -> impl Strategy<Value = ExposureRecord> {
        let levels: Vec<_> = Field::ALL.iter().map(|f| 0..f.level_count()).collect();
        levels.prop_map(|levels| {
            let mut r = restaurant_visit();
            for (field, level) in Field::ALL.iter().zip(levels) {
                r.set_level(*field, level).unwrap();
            }
            r
        })
    }

    proptest! {
        #[test]
        fn score_is_a_probability(r in arb_record(), eps in -50.0f64..50.0) {
            let s = risk_score(&r, &ModulationTable::shipped(), &GeneratorConfig::default(), eps);
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn riskier_answers_never_lower_the_score(r in arb_record(), eps in -5.0f64..5.0) {
            let table = ModulationTable::shipped();
            let config = GeneratorConfig::default();
            for (field, riskier, safer) in sign_constraints() {
                let mut lo = r.clone();
                lo.set_level(field, safer).unwrap();
                let mut hi = r.clone();
                hi.set_level(field, riskier).unwrap();
                prop_assert!(risk_score(&hi, &table, &config, eps) >= risk_score(&lo, &table, &config, eps));
            }
        }
    }
}
