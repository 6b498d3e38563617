//! Core of the venue check-in exposure platform.
//!
//! * [`model`] holds the questionnaire data model, validation and feature encoding.
//! * [`qr`] turns scanned venue posters into venue identifiers and types.
//! * [`risk`] computes the time-decayed combined exposure score and its level.
//! * [`synth`] generates labelled synthetic exposure datasets.
//! * [`ml`] trains and evaluates the contamination classifiers.

pub mod ml;
pub mod model;
pub mod qr;
pub mod risk;
pub mod synth;

pub use model::{ExposureRecord, FeatureVector, RiskProfile, Timestamp, VenueType};
