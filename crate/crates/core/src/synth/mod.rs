//! Synthetic exposure datasets.
//!
//! A record is produced in three steps: a hidden venue context is drawn, the
//! questionnaire is answered from that context, and the contamination
//! probability is the 10% baseline plus the modulation deltas of the chosen
//! answers plus scaled Laplace noise, clamped to `[0, 1]`. The outcome is a
//! Bernoulli draw of that probability.

mod archetype;
mod calibrate;
mod generator;
mod histories;
mod io;
mod laplace;
mod modulation;
mod oracle;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::model::levels::*;
use crate::model::{ExposureRecord, Timestamp, VenueType, MINUTES_PER_DAY};

pub use archetype::{
    categorical, sample_answers, shipped_archetypes, validate_archetypes, Archetype, ArchetypeError, FORCED_NA_FIELDS,
};
pub use calibrate::{calibrate_alpha, Calibration, CalibrationTarget};
pub use generator::{generate_dataset, sample_record, sample_with_context, user_id_for, GeneratedDataset};
pub use histories::{build_histories, HistoryConfig};
pub use io::{read_csv, write_csv, CsvError};
pub use laplace::{laplace_inverse_cdf, laplace_sample};
pub use modulation::{risk_score, worst_case_record, ModulationTable, SignViolation, SHAPE_UNITS, SHIPPED_ALPHA};
pub use oracle::{bayes_oracle_accuracy, expected_clamped, positive_rate, score_distribution, ScoreDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// `noise_weight · ε`.
    #[default]
    Scaled,
    /// `ε` added unscaled.
    Raw,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub baseline: f64,
    pub noise_location: f64,
    pub noise_scale: f64,
    pub noise_mode: NoiseMode,
    pub noise_weight: f64,
    pub n_records: usize,
    pub seed: u64,
    pub balanced: bool,
    pub user_pool: usize,
    pub horizon_start: Timestamp,
    pub horizon_minutes: i64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let start =
            NaiveDate::from_ymd_opt(2021, 3, 1).and_then(|d| d.and_hms_opt(0, 0, 0)).expect("valid date").and_utc();
        GeneratorConfig {
            baseline: 0.10,
            noise_location: 0.0,
            noise_scale: 0.5,
            noise_mode: NoiseMode::Scaled,
            noise_weight: 0.05,
            n_records: 150_000,
            seed: 0,
            balanced: true,
            user_pool: 20_000,
            horizon_start: Timestamp::from_datetime(start),
            horizon_minutes: 28 * MINUTES_PER_DAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("baseline must lie in [0, 1], got {0}")]
    Baseline(f64),
    #[error("noise scale must be positive, got {0}")]
    NoiseScale(f64),
    #[error("noise location and weight must be finite, weight non-negative")]
    NoiseParameters,
    #[error("n_records must be positive")]
    Empty,
    #[error("balanced datasets need an even record count, got {0}")]
    OddBalanced(usize),
    #[error("user pool must be positive")]
    UserPool,
    #[error("horizon must be positive and start at or after the epoch")]
    Horizon,
    #[error("invalid config file: {0}")]
    Parse(String),
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.baseline) {
            return Err(ConfigError::Baseline(self.baseline));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(ConfigError::NoiseScale(self.noise_scale));
        }
        if !self.noise_location.is_finite() || !(self.noise_weight >= 0.0 && self.noise_weight.is_finite()) {
            return Err(ConfigError::NoiseParameters);
        }
        if self.n_records == 0 {
            return Err(ConfigError::Empty);
        }
        if self.balanced && self.n_records % 2 == 1 {
            return Err(ConfigError::OddBalanced(self.n_records));
        }
        if self.user_pool == 0 {
            return Err(ConfigError::UserPool);
        }
        if self.horizon_minutes <= 0 || self.horizon_start.0 < 0 {
            return Err(ConfigError::Horizon);
        }
        Ok(())
    }

    /// Multiplier applied to the Laplace draw.
    pub fn effective_noise_weight(&self) -> f64 {
        match self.noise_mode {
            NoiseMode::Scaled => self.noise_weight,
            NoiseMode::Raw => 1.0,
            NoiseMode::Off => 0.0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: GeneratorConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

/// Standard dataset sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetSize {
    #[serde(rename = "150k")]
    K150,
    #[serde(rename = "250k")]
    K250,
    #[serde(rename = "500k")]
    K500,
    #[serde(rename = "750k")]
    K750,
    #[serde(rename = "1m")]
    M1,
}

impl DatasetSize {
    pub const ALL: [DatasetSize; 5] =
        [DatasetSize::K150, DatasetSize::K250, DatasetSize::K500, DatasetSize::K750, DatasetSize::M1];

    pub fn records(self) -> usize {
        match self {
            DatasetSize::K150 => 150_000,
            DatasetSize::K250 => 250_000,
            DatasetSize::K500 => 500_000,
            DatasetSize::K750 => 750_000,
            DatasetSize::M1 => 1_000_000,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DatasetSize::K150 => "150k",
            DatasetSize::K250 => "250k",
            DatasetSize::K500 => "500k",
            DatasetSize::K750 => "750k",
            DatasetSize::M1 => "1m",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim().to_ascii_lowercase();
        Self::ALL.into_iter().find(|s| s.label() == text || s.records().to_string() == text)
    }
}

/// Placeholder answers that every sampler overwrites.
pub fn neutral_record() -> ExposureRecord {
    ExposureRecord::from_answers(
        Timestamp(0),
        Uuid::nil(),
        VenueType::Other,
        crate::model::Answers {
            setting: Setting::Indoor,
            people_present: Crowd::None,
            time_spent: StayLength::Min5,
            masks_worn: YesNo::Yes,
            staff_ppe_correct: YesNoNa::NotApplicable,
            people_ppe_correct: YesNoNa::NotApplicable,
            social_distancing: YesNo::Yes,
            additional_measures: YesNo::Yes,
            party_size: PartySize::JustMe,
            all_household: YesNo::Yes,
            all_support_bubble: YesNoNa::NotApplicable,
            airflow_quality: Airflow::WellVentilated,
            temperature: Temperature::Normal,
            humidity: Humidity::SameAsOutside,
            cleaned_after_use: Cleaning::NotApplicable,
            contact_between_members: YesNoNa::NotApplicable,
            physical_activity: YesNoNa::NotApplicable,
        },
    )
}
