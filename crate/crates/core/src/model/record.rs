use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use super::levels::*;
use super::time::Timestamp;
use super::venue::{IndoorClass, VenueType};

/// The categorical questionnaire fields, in record order. These are exactly the
/// fields that enter the feature encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "Location_Type")]
    LocationType,
    #[serde(rename = "Location_Inside_or_Outside")]
    Setting,
    #[serde(rename = "Number_of_People_Present")]
    PeoplePresent,
    #[serde(rename = "Time_Spent_on_Location")]
    TimeSpent,
    #[serde(rename = "Wearing_Masks")]
    MasksWorn,
    #[serde(rename = "Staff_Properly_Wearing_PPE")]
    StaffPpe,
    #[serde(rename = "People_Properly_Wearing_PPE")]
    PeoplePpe,
    #[serde(rename = "Social_Distancing")]
    SocialDistancing,
    #[serde(rename = "Additional_Measures_in_Place")]
    AdditionalMeasures,
    #[serde(rename = "Number_of_People_in_the_Party")]
    PartySize,
    #[serde(rename = "All_Members_of_Household")]
    AllHousehold,
    #[serde(rename = "All_Members_of_Support_Bubble")]
    SupportBubble,
    #[serde(rename = "Quality_of_the_Airflow")]
    Airflow,
    #[serde(rename = "Temperature_in_Venue")]
    Temperature,
    #[serde(rename = "Humidity_in_Venue")]
    Humidity,
    #[serde(rename = "Clean_after_Every_Usage")]
    Cleaning,
    #[serde(rename = "Any_Contact_Between_Members")]
    Contact,
    #[serde(rename = "Physical_Activity")]
    PhysicalActivity,
}

const VENUE_CODE_LABELS: [&str; 19] =
    ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14", "15", "16", "17", "18", "19"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a categorical questionnaire field")]
pub struct UnknownField(pub String);

impl Field {
    pub const ALL: [Field; 18] = [
        Field::LocationType,
        Field::Setting,
        Field::PeoplePresent,
        Field::TimeSpent,
        Field::MasksWorn,
        Field::StaffPpe,
        Field::PeoplePpe,
        Field::SocialDistancing,
        Field::AdditionalMeasures,
        Field::PartySize,
        Field::AllHousehold,
        Field::SupportBubble,
        Field::Airflow,
        Field::Temperature,
        Field::Humidity,
        Field::Cleaning,
        Field::Contact,
        Field::PhysicalActivity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn column_name(self) -> &'static str {
        match self {
            Field::LocationType => "Location_Type",
            Field::Setting => "Location_Inside_or_Outside",
            Field::PeoplePresent => "Number_of_People_Present",
            Field::TimeSpent => "Time_Spent_on_Location",
            Field::MasksWorn => "Wearing_Masks",
            Field::StaffPpe => "Staff_Properly_Wearing_PPE",
            Field::PeoplePpe => "People_Properly_Wearing_PPE",
            Field::SocialDistancing => "Social_Distancing",
            Field::AdditionalMeasures => "Additional_Measures_in_Place",
            Field::PartySize => "Number_of_People_in_the_Party",
            Field::AllHousehold => "All_Members_of_Household",
            Field::SupportBubble => "All_Members_of_Support_Bubble",
            Field::Airflow => "Quality_of_the_Airflow",
            Field::Temperature => "Temperature_in_Venue",
            Field::Humidity => "Humidity_in_Venue",
            Field::Cleaning => "Clean_after_Every_Usage",
            Field::Contact => "Any_Contact_Between_Members",
            Field::PhysicalActivity => "Physical_Activity",
        }
    }

    /// Answer strings of every level, in level-index order.
    pub fn level_labels(self) -> Vec<&'static str> {
        fn labels<T: Copy>(all: &[T], label: fn(T) -> &'static str) -> Vec<&'static str> {
            all.iter().map(|l| label(*l)).collect()
        }
        match self {
            Field::LocationType => VENUE_CODE_LABELS.to_vec(),
            Field::Setting => labels(Setting::ALL, Setting::label),
            Field::PeoplePresent => labels(Crowd::ALL, Crowd::label),
            Field::TimeSpent => labels(StayLength::ALL, StayLength::label),
            Field::MasksWorn | Field::SocialDistancing | Field::AdditionalMeasures | Field::AllHousehold => {
                labels(YesNo::ALL, YesNo::label)
            }
            Field::StaffPpe | Field::PeoplePpe | Field::SupportBubble | Field::Contact | Field::PhysicalActivity => {
                labels(YesNoNa::ALL, YesNoNa::label)
            }
            Field::PartySize => labels(PartySize::ALL, PartySize::label),
            Field::Airflow => labels(Airflow::ALL, Airflow::label),
            Field::Temperature => labels(Temperature::ALL, Temperature::label),
            Field::Humidity => labels(Humidity::ALL, Humidity::label),
            Field::Cleaning => labels(Cleaning::ALL, Cleaning::label),
        }
    }

    pub fn level_count(self) -> usize {
        self.level_labels().len()
    }

    pub fn level_index(self, label: &str) -> Option<usize> {
        self.level_labels().iter().position(|l| *l == label)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

impl FromStr for Field {
    type Err = UnknownField;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL.into_iter().find(|f| f.column_name() == s).ok_or_else(|| UnknownField(s.to_owned()))
    }
}

/// Questionnaire answers for one visit, excluding the venue type which comes
/// from the scanned poster.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Answers {
    #[serde(rename = "Location_Inside_or_Outside")]
    pub setting: Setting,
    #[serde(rename = "Number_of_People_Present")]
    pub people_present: Crowd,
    #[serde(rename = "Time_Spent_on_Location")]
    pub time_spent: StayLength,
    #[serde(rename = "Wearing_Masks")]
    pub masks_worn: YesNo,
    #[serde(rename = "Staff_Properly_Wearing_PPE")]
    pub staff_ppe_correct: YesNoNa,
    #[serde(rename = "People_Properly_Wearing_PPE")]
    pub people_ppe_correct: YesNoNa,
    #[serde(rename = "Social_Distancing")]
    pub social_distancing: YesNo,
    #[serde(rename = "Additional_Measures_in_Place")]
    pub additional_measures: YesNo,
    #[serde(rename = "Number_of_People_in_the_Party")]
    pub party_size: PartySize,
    #[serde(rename = "All_Members_of_Household")]
    pub all_household: YesNo,
    #[serde(rename = "All_Members_of_Support_Bubble")]
    pub all_support_bubble: YesNoNa,
    #[serde(rename = "Quality_of_the_Airflow")]
    pub airflow_quality: Airflow,
    #[serde(rename = "Temperature_in_Venue")]
    pub temperature: Temperature,
    #[serde(rename = "Humidity_in_Venue")]
    pub humidity: Humidity,
    #[serde(rename = "Clean_after_Every_Usage")]
    pub cleaned_after_use: Cleaning,
    #[serde(rename = "Any_Contact_Between_Members")]
    pub contact_between_members: YesNoNa,
    #[serde(rename = "Physical_Activity")]
    pub physical_activity: YesNoNa,
}

/// One venue check-in with its questionnaire answers and outcome. Column names
/// follow the exposure record table verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureRecord {
    #[serde(rename = "TIMESTAMP")]
    pub timestamp: Timestamp,
    #[serde(rename = "UserID")]
    pub user_id: Uuid,
    #[serde(rename = "Location_Type")]
    pub location_type: VenueType,
    #[serde(rename = "Location_Inside_or_Outside")]
    pub setting: Setting,
    #[serde(rename = "Number_of_People_Present")]
    pub people_present: Crowd,
    #[serde(rename = "Time_Spent_on_Location")]
    pub time_spent: StayLength,
    #[serde(rename = "Wearing_Masks")]
    pub masks_worn: YesNo,
    #[serde(rename = "Staff_Properly_Wearing_PPE")]
    pub staff_ppe_correct: YesNoNa,
    #[serde(rename = "People_Properly_Wearing_PPE")]
    pub people_ppe_correct: YesNoNa,
    #[serde(rename = "Social_Distancing")]
    pub social_distancing: YesNo,
    #[serde(rename = "Additional_Measures_in_Place")]
    pub additional_measures: YesNo,
    #[serde(rename = "Number_of_People_in_the_Party")]
    pub party_size: PartySize,
    #[serde(rename = "All_Members_of_Household")]
    pub all_household: YesNo,
    #[serde(rename = "All_Members_of_Support_Bubble")]
    pub all_support_bubble: YesNoNa,
    #[serde(rename = "Quality_of_the_Airflow")]
    pub airflow_quality: Airflow,
    #[serde(rename = "Temperature_in_Venue")]
    pub temperature: Temperature,
    #[serde(rename = "Humidity_in_Venue")]
    pub humidity: Humidity,
    #[serde(rename = "Clean_after_Every_Usage")]
    pub cleaned_after_use: Cleaning,
    #[serde(rename = "Any_Contact_Between_Members")]
    pub contact_between_members: YesNoNa,
    #[serde(rename = "Physical_Activity")]
    pub physical_activity: YesNoNa,
    #[serde(rename = "Exposure_Led_to_Contamination")]
    pub led_to_contamination: Outcome,
    #[serde(rename = "Risk_of_Contamination")]
    pub risk_of_contamination: Option<f64>,
}

/// Column header of the CSV and JSON record encodings.
pub const RECORD_COLUMNS: [&str; 22] = [
    "TIMESTAMP",
    "UserID",
    "Location_Type",
    "Location_Inside_or_Outside",
    "Number_of_People_Present",
    "Time_Spent_on_Location",
    "Wearing_Masks",
    "Staff_Properly_Wearing_PPE",
    "People_Properly_Wearing_PPE",
    "Social_Distancing",
    "Additional_Measures_in_Place",
    "Number_of_People_in_the_Party",
    "All_Members_of_Household",
    "All_Members_of_Support_Bubble",
    "Quality_of_the_Airflow",
    "Temperature_in_Venue",
    "Humidity_in_Venue",
    "Clean_after_Every_Usage",
    "Any_Contact_Between_Members",
    "Physical_Activity",
    "Exposure_Led_to_Contamination",
    "Risk_of_Contamination",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("level {level} out of range for {field}")]
pub struct LevelOutOfRange {
    pub field: Field,
    pub level: usize,
}

impl ExposureRecord {
    pub fn from_answers(timestamp: Timestamp, user_id: Uuid, location_type: VenueType, answers: Answers) -> Self {
        ExposureRecord {
            timestamp,
            user_id,
            location_type,
            setting: answers.setting,
            people_present: answers.people_present,
            time_spent: answers.time_spent,
            masks_worn: answers.masks_worn,
            staff_ppe_correct: answers.staff_ppe_correct,
            people_ppe_correct: answers.people_ppe_correct,
            social_distancing: answers.social_distancing,
            additional_measures: answers.additional_measures,
            party_size: answers.party_size,
            all_household: answers.all_household,
            all_support_bubble: answers.all_support_bubble,
            airflow_quality: answers.airflow_quality,
            temperature: answers.temperature,
            humidity: answers.humidity,
            cleaned_after_use: answers.cleaned_after_use,
            contact_between_members: answers.contact_between_members,
            physical_activity: answers.physical_activity,
            led_to_contamination: Outcome::Unknown,
            risk_of_contamination: None,
        }
    }

    pub fn answers(&self) -> Answers {
        Answers {
            setting: self.setting,
            people_present: self.people_present,
            time_spent: self.time_spent,
            masks_worn: self.masks_worn,
            staff_ppe_correct: self.staff_ppe_correct,
            people_ppe_correct: self.people_ppe_correct,
            social_distancing: self.social_distancing,
            additional_measures: self.additional_measures,
            party_size: self.party_size,
            all_household: self.all_household,
            all_support_bubble: self.all_support_bubble,
            airflow_quality: self.airflow_quality,
            temperature: self.temperature,
            humidity: self.humidity,
            cleaned_after_use: self.cleaned_after_use,
            contact_between_members: self.contact_between_members,
            physical_activity: self.physical_activity,
        }
    }

    /// Level index of a categorical field.
    pub fn level(&self, field: Field) -> usize {
        match field {
            Field::LocationType => self.location_type.index(),
            Field::Setting => self.setting.index(),
            Field::PeoplePresent => self.people_present.index(),
            Field::TimeSpent => self.time_spent.index(),
            Field::MasksWorn => self.masks_worn.index(),
            Field::StaffPpe => self.staff_ppe_correct.index(),
            Field::PeoplePpe => self.people_ppe_correct.index(),
            Field::SocialDistancing => self.social_distancing.index(),
            Field::AdditionalMeasures => self.additional_measures.index(),
            Field::PartySize => self.party_size.index(),
            Field::AllHousehold => self.all_household.index(),
            Field::SupportBubble => self.all_support_bubble.index(),
            Field::Airflow => self.airflow_quality.index(),
            Field::Temperature => self.temperature.index(),
            Field::Humidity => self.humidity.index(),
            Field::Cleaning => self.cleaned_after_use.index(),
            Field::Contact => self.contact_between_members.index(),
            Field::PhysicalActivity => self.physical_activity.index(),
        }
    }

    pub fn set_level(&mut self, field: Field, level: usize) -> Result<(), LevelOutOfRange> {
        let err = LevelOutOfRange { field, level };
        match field {
            Field::LocationType => self.location_type = VenueType::ALL.get(level).copied().ok_or(err)?,
            Field::Setting => self.setting = Setting::from_index(level).ok_or(err)?,
            Field::PeoplePresent => self.people_present = Crowd::from_index(level).ok_or(err)?,
            Field::TimeSpent => self.time_spent = StayLength::from_index(level).ok_or(err)?,
            Field::MasksWorn => self.masks_worn = YesNo::from_index(level).ok_or(err)?,
            Field::StaffPpe => self.staff_ppe_correct = YesNoNa::from_index(level).ok_or(err)?,
            Field::PeoplePpe => self.people_ppe_correct = YesNoNa::from_index(level).ok_or(err)?,
            Field::SocialDistancing => self.social_distancing = YesNo::from_index(level).ok_or(err)?,
            Field::AdditionalMeasures => self.additional_measures = YesNo::from_index(level).ok_or(err)?,
            Field::PartySize => self.party_size = PartySize::from_index(level).ok_or(err)?,
            Field::AllHousehold => self.all_household = YesNo::from_index(level).ok_or(err)?,
            Field::SupportBubble => self.all_support_bubble = YesNoNa::from_index(level).ok_or(err)?,
            Field::Airflow => self.airflow_quality = Airflow::from_index(level).ok_or(err)?,
            Field::Temperature => self.temperature = Temperature::from_index(level).ok_or(err)?,
            Field::Humidity => self.humidity = Humidity::from_index(level).ok_or(err)?,
            Field::Cleaning => self.cleaned_after_use = Cleaning::from_index(level).ok_or(err)?,
            Field::Contact => self.contact_between_members = YesNoNa::from_index(level).ok_or(err)?,
            Field::PhysicalActivity => self.physical_activity = YesNoNa::from_index(level).ok_or(err)?,
        }
        Ok(())
    }

    pub fn level_label(&self, field: Field) -> &'static str {
        field.level_labels()[self.level(field)]
    }
}

/// A broken record invariant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    #[error("forced indoor: venue type {venue_code} is always indoor")]
    ForcedIndoor { venue_code: u8 },
    #[error("cleaning question not applicable to venue type {venue_code}")]
    CleaningNotApplicable { venue_code: u8 },
    #[error("{field} only applies to outdoor visits")]
    OutdoorOnlyQuestion { field: Field },
    #[error("support bubble question only applies when not all members are from the household")]
    SupportBubbleNotApplicable,
    #[error("risk of contamination {value} outside [0, 1]")]
    RiskOutOfRange { value: String },
    #[error("timestamp precedes the epoch")]
    NegativeTimestamp,
}

/// Every violated invariant of `record`; empty iff the record is valid.
pub fn validate_record(record: &ExposureRecord) -> Vec<Violation> {
    let mut violations = Vec::new();
    let venue = record.location_type;
    if record.timestamp.0 < 0 {
        violations.push(Violation::NegativeTimestamp);
    }
    if venue.indoor_class() == IndoorClass::AlwaysIndoor && record.setting != Setting::Indoor {
        violations.push(Violation::ForcedIndoor { venue_code: venue.code() });
    }
    if !venue.asks_cleaning() && record.cleaned_after_use != Cleaning::NotApplicable {
        violations.push(Violation::CleaningNotApplicable { venue_code: venue.code() });
    }
    if record.setting != Setting::Outdoor {
        if record.contact_between_members != YesNoNa::NotApplicable {
            violations.push(Violation::OutdoorOnlyQuestion { field: Field::Contact });
        }
        if record.physical_activity != YesNoNa::NotApplicable {
            violations.push(Violation::OutdoorOnlyQuestion { field: Field::PhysicalActivity });
        }
    }
    if record.all_household != YesNo::No && record.all_support_bubble != YesNoNa::NotApplicable {
        violations.push(Violation::SupportBubbleNotApplicable);
    }
    if let Some(risk) = record.risk_of_contamination {
        if !(0.0..=1.0).contains(&risk) {
            violations.push(Violation::RiskOutOfRange { value: risk.to_string() });
        }
    }
    violations
}


#[cfg(test)]
mod tests {
    use super::fixtures::restaurant_visit;
    use super::*;

    #[test]
    fn valid_restaurant_record() {
        assert!(validate_record(&restaurant_visit()).is_empty());
    }

    #[test]
    fn education_cannot_be_outdoor() {
        let mut r = restaurant_visit();
        r.location_type = VenueType::Education;
        r.cleaned_after_use = Cleaning::NotApplicable;
        r.setting = Setting::Outdoor;
        let v = validate_record(&r);
        assert_eq!(v, vec![Violation::ForcedIndoor { venue_code: 3 }]);
        assert!(v[0].to_string().starts_with("forced indoor"));
    }

    #[test]
    fn cleaning_only_for_listed_venues() {
        let mut r = restaurant_visit();
        r.location_type = VenueType::Medical;
        r.cleaned_after_use = Cleaning::Yes;
        let v = validate_record(&r);
        assert_eq!(v, vec![Violation::CleaningNotApplicable { venue_code: 6 }]);
        assert!(v[0].to_string().contains("cleaning question not applicable"));
    }

    #[test]
    fn outdoor_questions_and_bubble() {
        let mut r = restaurant_visit();
        r.contact_between_members = YesNoNa::Yes;
        r.physical_activity = YesNoNa::No;
        r.all_household = YesNo::Yes;
        let v = validate_record(&r);
        assert_eq!(v.len(), 3);
        assert!(v.contains(&Violation::SupportBubbleNotApplicable));

        r.setting = Setting::Outdoor;
        r.all_support_bubble = YesNoNa::NotApplicable;
        assert!(validate_record(&r).is_empty());
    }

    #[test]
    fn risk_range_checked() {
        let mut r = restaurant_visit();
        r.risk_of_contamination = Some(1.5);
        assert_eq!(validate_record(&r).len(), 1);
        r.risk_of_contamination = Some(f64::NAN);
        assert_eq!(validate_record(&r).len(), 1);
    }

    #[test]
    fn json_uses_column_names() {
        let r = restaurant_visit();
        let json = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected = RECORD_COLUMNS.to_vec();
        expected.sort_unstable();
        let mut keys_sorted = keys.clone();
        keys_sorted.sort_unstable();
        assert_eq!(keys_sorted, expected);
        assert_eq!(json["Time_Spent_on_Location"], "1h");
        assert_eq!(json["Location_Type"], 15);
        let back: ExposureRecord = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn level_accessors_agree() {
        let r = restaurant_visit();
        let mut copy = r.clone();
        for field in Field::ALL {
            assert!(r.level(field) < field.level_count());
            copy.set_level(field, r.level(field)).unwrap();
            assert_eq!(field.column_name().parse::<Field>().unwrap(), field);
        }
        assert_eq!(copy, r);
        assert!(copy.set_level(Field::Airflow, 4).is_err());
        assert_eq!(r.level_label(Field::PartySize), "2-4");
    }
}
