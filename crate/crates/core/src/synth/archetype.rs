//! Latent venue contexts.
//!
//! Each record is drawn by first picking a hidden context (a crowded bar, an
//! office, a park, ...) and then answering every question independently from
//! that context's conditional distributions. Follow-up questions that do not
//! apply are forced to "N/A" exactly as the questionnaire would skip them.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::levels::{Cleaning, Setting, YesNo, YesNoNa};
use crate::model::{ExposureRecord, Field, Timestamp, VenueType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArchetypeError {
    #[error("archetype `{archetype}`: {field} has {found} weights, expected {expected}")]
    Arity { archetype: String, field: Field, found: usize, expected: usize },
    #[error("archetype `{archetype}`: {field} weights do not sum to 1")]
    NotNormalised { archetype: String, field: Field },
    #[error("archetype `{archetype}`: {field} puts weight on N/A, which is only ever forced")]
    WeightOnNotApplicable { archetype: String, field: Field },
    #[error("archetype priors do not sum to 1")]
    Prior,
    #[error("no archetypes")]
    Empty,
}

/// A hidden venue context with a categorical distribution for every field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    pub prior: f64,
    /// `conditionals[field.index()][level]`.
    pub conditionals: Vec<Vec<f64>>,
}

/// Fields whose N/A level is decided by earlier answers rather than drawn.
pub const FORCED_NA_FIELDS: [Field; 6] =
    [Field::StaffPpe, Field::PeoplePpe, Field::SupportBubble, Field::Cleaning, Field::Contact, Field::PhysicalActivity];

fn na_level(field: Field) -> Option<usize> {
    match field {
        Field::Cleaning => Some(Cleaning::NotApplicable.index()),
        f if FORCED_NA_FIELDS.contains(&f) => Some(YesNoNa::NotApplicable.index()),
        _ => None,
    }
}

fn population_defaults(field: Field) -> Vec<f64> {
    match field {
        Field::LocationType => vec![1.0; 19],
        Field::Setting => vec![0.6, 0.4],
        Field::PeoplePresent => vec![0.1, 0.35, 0.3, 0.25],
        Field::TimeSpent => vec![0.08, 0.1, 0.1, 0.1, 0.15, 0.12, 0.15, 0.1, 0.1],
        Field::MasksWorn => vec![0.6, 0.4],
        Field::StaffPpe => vec![0.5, 0.5, 0.0],
        Field::PeoplePpe => vec![0.7, 0.3, 0.0],
        Field::SocialDistancing => vec![0.6, 0.4],
        Field::AdditionalMeasures => vec![0.5, 0.5],
        Field::PartySize => vec![0.3, 0.3, 0.25, 0.15],
        Field::AllHousehold => vec![0.55, 0.45],
        Field::SupportBubble => vec![0.5, 0.5, 0.0],
        Field::Airflow => vec![0.35, 0.3, 0.15, 0.2],
        Field::Temperature => vec![0.3, 0.5, 0.2],
        Field::Humidity => vec![0.5, 0.25, 0.25],
        Field::Cleaning => vec![0.4, 0.25, 0.35, 0.0],
        Field::Contact => vec![0.4, 0.6, 0.0],
        Field::PhysicalActivity => vec![0.3, 0.7, 0.0],
    }
}

fn normalise(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    }
}

impl Archetype {
    /// Starts from population-wide answer frequencies.
    pub fn new(name: &str, prior: f64) -> Self {
        let conditionals = Field::ALL
            .iter()
            .map(|f| {
                let mut w = population_defaults(*f);
                normalise(&mut w);
                w
            })
            .collect();
        Archetype { name: name.to_owned(), prior, conditionals }
    }

    pub fn venues(mut self, weights: &[(u8, f64)]) -> Self {
        let mut dist = vec![0.0; 19];
        for (code, w) in weights {
            dist[usize::from(*code) - 1] = *w;
        }
        normalise(&mut dist);
        self.conditionals[Field::LocationType.index()] = dist;
        self
    }

    /// Sets the answer weights of `field`. For forced-N/A fields only the
    /// answerable levels are given.
    pub fn answers(mut self, field: Field, weights: &[f64]) -> Self {
        let mut dist = weights.to_vec();
        if na_level(field).is_some() {
            dist.push(0.0);
        }
        normalise(&mut dist);
        self.conditionals[field.index()] = dist;
        self
    }

    pub fn distribution(&self, field: Field) -> &[f64] {
        &self.conditionals[field.index()]
    }

    fn validate(&self) -> Result<(), ArchetypeError> {
        for field in Field::ALL {
            let dist = self.distribution(field);
            if dist.len() != field.level_count() {
                return Err(ArchetypeError::Arity {
                    archetype: self.name.clone(),
                    field,
                    found: dist.len(),
                    expected: field.level_count(),
                });
            }
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > 1e-9 || dist.iter().any(|w| *w < 0.0 || !w.is_finite()) {
                return Err(ArchetypeError::NotNormalised { archetype: self.name.clone(), field });
            }
            if let Some(na) = na_level(field) {
                if dist[na] != 0.0 {
                    return Err(ArchetypeError::WeightOnNotApplicable { archetype: self.name.clone(), field });
                }
            }
        }
        Ok(())
    }
}

pub fn validate_archetypes(archetypes: &[Archetype]) -> Result<(), ArchetypeError> {
    if archetypes.is_empty() {
        return Err(ArchetypeError::Empty);
    }
    archetypes.iter().try_for_each(Archetype::validate)?;
    let total: f64 = archetypes.iter().map(|a| a.prior).sum();
    if (total - 1.0).abs() > 1e-9 || archetypes.iter().any(|a| a.prior < 0.0) {
        return Err(ArchetypeError::Prior);
    }
    Ok(())
}

pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding slack: fall back to the last level with weight.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Draws one set of answers from `archetype`. Timestamp, user and outcome are
/// left at neutral values for the caller to fill in.
pub fn sample_answers<R: Rng + ?Sized>(rng: &mut R, archetype: &Archetype) -> ExposureRecord {
    let mut record = crate::synth::neutral_record();
    let draw = |rng: &mut R, record: &mut ExposureRecord, field: Field| {
        let level = categorical(rng, archetype.distribution(field));
        record.set_level(field, level).expect("validated archetype arity");
    };

    draw(rng, &mut record, Field::LocationType);
    let venue = record.location_type;
    if venue.asks_setting() {
        draw(rng, &mut record, Field::Setting);
    } else {
        record.setting = Setting::Indoor;
    }
    for field in [Field::PeoplePresent, Field::TimeSpent, Field::MasksWorn] {
        draw(rng, &mut record, field);
    }
    // Staff PPE is asked when masks were not worn, correct use when they were.
    record.staff_ppe_correct = YesNoNa::NotApplicable;
    record.people_ppe_correct = YesNoNa::NotApplicable;
    match record.masks_worn {
        YesNo::No => draw(rng, &mut record, Field::StaffPpe),
        YesNo::Yes => draw(rng, &mut record, Field::PeoplePpe),
    }
    for field in [Field::SocialDistancing, Field::AdditionalMeasures, Field::PartySize, Field::AllHousehold] {
        draw(rng, &mut record, field);
    }
    record.all_support_bubble = YesNoNa::NotApplicable;
    if record.all_household == YesNo::No {
        draw(rng, &mut record, Field::SupportBubble);
    }
    for field in [Field::Airflow, Field::Temperature, Field::Humidity] {
        draw(rng, &mut record, field);
    }
    record.cleaned_after_use = Cleaning::NotApplicable;
    if venue.asks_cleaning() {
        draw(rng, &mut record, Field::Cleaning);
    }
    record.contact_between_members = YesNoNa::NotApplicable;
    record.physical_activity = YesNoNa::NotApplicable;
    if record.setting == Setting::Outdoor {
        draw(rng, &mut record, Field::Contact);
        draw(rng, &mut record, Field::PhysicalActivity);
    }
    record.timestamp = Timestamp(0);
    debug_assert!(VenueType::from_code(record.location_type.code()).is_some());
    record
}

/// The shipped context inventory. Illustrative: frequencies are plausible
/// answer patterns, not fitted values.
pub fn shipped_archetypes() -> Vec<Archetype> {
    use Field::*;
    vec![
        Archetype::new("crowded-indoor-bar", 0.18)
            .venues(&[(15, 0.7), (11, 0.15), (12, 0.15)])
            .answers(Setting, &[0.85, 0.15])
            .answers(PeoplePresent, &[0.0, 0.1, 0.3, 0.6])
            .answers(TimeSpent, &[0.0, 0.0, 0.05, 0.05, 0.1, 0.15, 0.25, 0.25, 0.15])
            .answers(MasksWorn, &[0.2, 0.8])
            .answers(StaffPpe, &[0.3, 0.7])
            .answers(PeoplePpe, &[0.4, 0.6])
            .answers(SocialDistancing, &[0.2, 0.8])
            .answers(AdditionalMeasures, &[0.3, 0.7])
            .answers(PartySize, &[0.05, 0.25, 0.4, 0.3])
            .answers(AllHousehold, &[0.3, 0.7])
            .answers(SupportBubble, &[0.3, 0.7])
            .answers(Airflow, &[0.1, 0.25, 0.25, 0.4])
            .answers(Temperature, &[0.6, 0.35, 0.05])
            .answers(Humidity, &[0.3, 0.4, 0.3])
            .answers(Cleaning, &[0.2, 0.4, 0.4])
            .answers(Contact, &[0.7, 0.3])
            .answers(PhysicalActivity, &[0.4, 0.6]),
        Archetype::new("ventilated-museum", 0.14)
            .venues(&[(12, 0.6), (7, 0.3), (10, 0.1)])
            .answers(Setting, &[0.9, 0.1])
            .answers(PeoplePresent, &[0.05, 0.3, 0.4, 0.25])
            .answers(TimeSpent, &[0.0, 0.05, 0.1, 0.1, 0.2, 0.2, 0.25, 0.1, 0.0])
            .answers(MasksWorn, &[0.85, 0.15])
            .answers(StaffPpe, &[0.7, 0.3])
            .answers(PeoplePpe, &[0.85, 0.15])
            .answers(SocialDistancing, &[0.85, 0.15])
            .answers(AdditionalMeasures, &[0.8, 0.2])
            .answers(PartySize, &[0.3, 0.4, 0.25, 0.05])
            .answers(AllHousehold, &[0.7, 0.3])
            .answers(SupportBubble, &[0.7, 0.3])
            .answers(Airflow, &[0.7, 0.2, 0.05, 0.05])
            .answers(Temperature, &[0.1, 0.8, 0.1])
            .answers(Humidity, &[0.7, 0.2, 0.1])
            .answers(Cleaning, &[0.6, 0.1, 0.3])
            .answers(Contact, &[0.2, 0.8])
            .answers(PhysicalActivity, &[0.05, 0.95]),
        Archetype::new("outdoor-park", 0.16)
            .venues(&[(17, 0.3), (19, 0.35), (13, 0.15), (7, 0.1), (4, 0.1)])
            .answers(Setting, &[0.0, 1.0])
            .answers(PeoplePresent, &[0.15, 0.4, 0.25, 0.2])
            .answers(TimeSpent, &[0.05, 0.05, 0.1, 0.1, 0.2, 0.15, 0.2, 0.1, 0.05])
            .answers(MasksWorn, &[0.2, 0.8])
            .answers(StaffPpe, &[0.4, 0.6])
            .answers(PeoplePpe, &[0.5, 0.5])
            .answers(SocialDistancing, &[0.7, 0.3])
            .answers(AdditionalMeasures, &[0.2, 0.8])
            .answers(PartySize, &[0.2, 0.3, 0.3, 0.2])
            .answers(AllHousehold, &[0.5, 0.5])
            .answers(SupportBubble, &[0.5, 0.5])
            .answers(Airflow, &[0.85, 0.05, 0.1, 0.0])
            .answers(Temperature, &[0.4, 0.4, 0.2])
            .answers(Humidity, &[0.8, 0.1, 0.1])
            .answers(Cleaning, &[0.2, 0.5, 0.3])
            .answers(Contact, &[0.5, 0.5])
            .answers(PhysicalActivity, &[0.5, 0.5]),
        Archetype::new("office", 0.18)
            .venues(&[(8, 0.7), (5, 0.3)])
            .answers(PeoplePresent, &[0.05, 0.3, 0.45, 0.2])
            .answers(TimeSpent, &[0.0, 0.0, 0.0, 0.0, 0.05, 0.05, 0.1, 0.2, 0.6])
            .answers(MasksWorn, &[0.5, 0.5])
            .answers(StaffPpe, &[0.5, 0.5])
            .answers(PeoplePpe, &[0.7, 0.3])
            .answers(SocialDistancing, &[0.6, 0.4])
            .answers(AdditionalMeasures, &[0.6, 0.4])
            .answers(PartySize, &[0.7, 0.2, 0.08, 0.02])
            .answers(AllHousehold, &[0.1, 0.9])
            .answers(SupportBubble, &[0.1, 0.9])
            .answers(Airflow, &[0.15, 0.55, 0.15, 0.15])
            .answers(Temperature, &[0.3, 0.6, 0.1])
            .answers(Humidity, &[0.3, 0.5, 0.2])
            .answers(Cleaning, &[0.4, 0.3, 0.3]),
        Archetype::new("gym", 0.10)
            .venues(&[(17, 0.85), (9, 0.15)])
            .answers(Setting, &[0.8, 0.2])
            .answers(PeoplePresent, &[0.05, 0.3, 0.4, 0.25])
            .answers(TimeSpent, &[0.0, 0.0, 0.0, 0.05, 0.2, 0.3, 0.35, 0.1, 0.0])
            .answers(MasksWorn, &[0.15, 0.85])
            .answers(SocialDistancing, &[0.5, 0.5])
            .answers(PartySize, &[0.6, 0.3, 0.08, 0.02])
            .answers(AllHousehold, &[0.3, 0.7])
            .answers(SupportBubble, &[0.2, 0.8])
            .answers(Airflow, &[0.25, 0.35, 0.2, 0.2])
            .answers(Temperature, &[0.7, 0.25, 0.05])
            .answers(Humidity, &[0.2, 0.3, 0.5])
            .answers(Cleaning, &[0.5, 0.2, 0.3])
            .answers(Contact, &[0.5, 0.5])
            .answers(PhysicalActivity, &[0.95, 0.05]),
        Archetype::new("errand", 0.14)
            .venues(&[(16, 0.5), (6, 0.15), (5, 0.1), (18, 0.15), (9, 0.1)])
            .answers(PeoplePresent, &[0.05, 0.5, 0.3, 0.15])
            .answers(TimeSpent, &[0.35, 0.3, 0.15, 0.1, 0.05, 0.03, 0.02, 0.0, 0.0])
            .answers(MasksWorn, &[0.9, 0.1])
            .answers(StaffPpe, &[0.6, 0.4])
            .answers(PeoplePpe, &[0.85, 0.15])
            .answers(SocialDistancing, &[0.75, 0.25])
            .answers(AdditionalMeasures, &[0.75, 0.25])
            .answers(PartySize, &[0.7, 0.2, 0.08, 0.02])
            .answers(AllHousehold, &[0.8, 0.2])
            .answers(SupportBubble, &[0.6, 0.4])
            .answers(Airflow, &[0.3, 0.45, 0.15, 0.1])
            .answers(Temperature, &[0.2, 0.7, 0.1])
            .answers(Humidity, &[0.6, 0.3, 0.1])
            .answers(Cleaning, &[0.4, 0.3, 0.3]),
        Archetype::new("private-gathering", 0.10)
            .venues(&[(11, 0.5), (1, 0.2), (14, 0.15), (2, 0.15)])
            .answers(PeoplePresent, &[0.1, 0.5, 0.3, 0.1])
            .answers(TimeSpent, &[0.0, 0.0, 0.0, 0.0, 0.05, 0.1, 0.25, 0.3, 0.3])
            .answers(MasksWorn, &[0.1, 0.9])
            .answers(StaffPpe, &[0.2, 0.8])
            .answers(PeoplePpe, &[0.4, 0.6])
            .answers(SocialDistancing, &[0.15, 0.85])
            .answers(AdditionalMeasures, &[0.15, 0.85])
            .answers(PartySize, &[0.05, 0.15, 0.4, 0.4])
            .answers(AllHousehold, &[0.35, 0.65])
            .answers(SupportBubble, &[0.4, 0.6])
            .answers(Airflow, &[0.2, 0.3, 0.15, 0.35])
            .answers(Temperature, &[0.45, 0.45, 0.1])
            .answers(Humidity, &[0.3, 0.35, 0.35])
            .answers(Cleaning, &[0.2, 0.5, 0.3]),
    ]
}
