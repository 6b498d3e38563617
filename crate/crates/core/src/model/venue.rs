use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Whether a venue type is always indoor or asks the respondent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndoorClass {
    AlwaysIndoor,
    IndoorOrOutdoor,
    /// Listed in neither questionnaire group. Asked like [`IndoorClass::IndoorOrOutdoor`].
    Unclassified,
}

/// The 19 venue types of the poster scheme, numbered 1 to 19.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VenueType {
    Accommodation = 1,
    Childcare,
    Education,
    EventsAndConference,
    FinanceAndProfessional,
    Medical,
    NonResidentialInstitution,
    Office,
    PersonalCare,
    PlaceOfWorship,
    PrivateEvent,
    RecreationAndLeisure,
    RentalHire,
    ResidentialCare,
    Restaurant,
    Retail,
    SportsAndFitness,
    Transport,
    Other,
}

/// Venue types whose questionnaire includes the surface-cleaning question.
pub const CLEANING_VENUE_CODES: [u8; 8] = [1, 4, 5, 8, 10, 15, 17, 18];

impl VenueType {
    pub const ALL: [VenueType; 19] = [
        VenueType::Accommodation,
        VenueType::Childcare,
        VenueType::Education,
        VenueType::EventsAndConference,
        VenueType::FinanceAndProfessional,
        VenueType::Medical,
        VenueType::NonResidentialInstitution,
        VenueType::Office,
        VenueType::PersonalCare,
        VenueType::PlaceOfWorship,
        VenueType::PrivateEvent,
        VenueType::RecreationAndLeisure,
        VenueType::RentalHire,
        VenueType::ResidentialCare,
        VenueType::Restaurant,
        VenueType::Retail,
        VenueType::SportsAndFitness,
        VenueType::Transport,
        VenueType::Other,
    ];

    pub fn from_code(code: u8) -> Option<Self> {
        (1..=19).contains(&code).then(|| Self::ALL[usize::from(code) - 1])
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            VenueType::Accommodation => "Accommodation",
            VenueType::Childcare => "Childcare",
            VenueType::Education => "Education",
            VenueType::EventsAndConference => "Events and conference space",
            VenueType::FinanceAndProfessional => "Finance and professional service",
            VenueType::Medical => "Medical facility",
            VenueType::NonResidentialInstitution => "Non-residential institution",
            VenueType::Office => "Office location and workspace",
            VenueType::PersonalCare => "Personal care",
            VenueType::PlaceOfWorship => "Place of worship",
            VenueType::PrivateEvent => "Private event",
            VenueType::RecreationAndLeisure => "Recreation and leisure",
            VenueType::RentalHire => "Rental / hire locations",
            VenueType::ResidentialCare => "Residential care",
            VenueType::Restaurant => "Restaurant, cafe, pub or bar",
            VenueType::Retail => "Retail shops",
            VenueType::SportsAndFitness => "Sports and fitness facilities",
            VenueType::Transport => "Transport",
            VenueType::Other => "Other",
        }
    }

    pub fn indoor_class(self) -> IndoorClass {
        match self.code() {
            1 | 2 | 3 | 5 | 6 | 8 | 9 | 10 | 11 | 12 | 14 | 16 | 18 => IndoorClass::AlwaysIndoor,
            7 | 13 | 15 | 17 | 19 => IndoorClass::IndoorOrOutdoor,
            _ => IndoorClass::Unclassified,
        }
    }

    /// True when the respondent is asked whether the visit was inside or outside.
    pub fn asks_setting(self) -> bool {
        self.indoor_class() != IndoorClass::AlwaysIndoor
    }

    pub fn asks_cleaning(self) -> bool {
        CLEANING_VENUE_CODES.contains(&self.code())
    }

    /// Zero-based position, used as the feature level index.
    pub fn index(self) -> usize {
        usize::from(self.code()) - 1
    }
}

impl fmt::Display for VenueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for VenueType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for VenueType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Code {
            Number(u64),
            Text(String),
        }
        let code = match Code::deserialize(deserializer)? {
            Code::Number(n) => n,
            Code::Text(s) => s.trim().parse().map_err(de::Error::custom)?,
        };
        u8::try_from(code)
            .ok()
            .and_then(VenueType::from_code)
            .ok_or_else(|| de::Error::custom(format!("venue type code {code} outside 1..=19")))
    }
}
