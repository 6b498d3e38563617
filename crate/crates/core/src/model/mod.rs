//! Questionnaire data model: venue taxonomy, answer domains, the exposure
//! record, user risk profiles, feature encoding and timestamp coarsening.

mod features;
pub mod levels;
mod profile;
mod record;
mod time;
mod venue;

pub use features::{decode_features, encode_features, EncodeError, FeatureLayout, FeatureVector};
pub use profile::{derive_risk_profile, RiskProfile};
pub use record::{
    validate_record, Answers, ExposureRecord, Field, LevelOutOfRange, UnknownField, Violation, RECORD_COLUMNS,
};
pub use time::{coarsen_timestamp, CoarseWindow, DayWindow, Timestamp, TimestampError, MINUTES_PER_DAY};
pub use venue::{IndoorClass, VenueType, CLEANING_VENUE_CODES};

#[cfg(test)]
pub(crate) use record::fixtures;
