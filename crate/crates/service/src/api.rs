//! Request and response bodies. Questionnaire fields keep the exposure
//! record column names; timestamps are ISO-8601 strings.

use serde::{Deserialize, Serialize};
use uuid::Uuid;
use venuetrace_core::model::levels::Outcome;
use venuetrace_core::model::{Answers, CoarseWindow};
use venuetrace_core::risk::{Palette, RiskLevel};
use venuetrace_ledger::silo::SiloHealth;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    User,
    Investigator,
    Researcher,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Investigator => "investigator",
            Role::Researcher => "researcher",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    /// Hex-encoded ephemeral public value chosen by the client.
    pub client_key: String,
    #[serde(default)]
    pub role: Role,
    /// Self-generated pseudonymous identity; required for the User role.
    #[serde(default)]
    pub user_id: Option<Uuid>,
    /// Required for the Investigator and Researcher roles.
    #[serde(default)]
    pub credential: Option<String>,
    /// Clinically extremely vulnerable.
    #[serde(default)]
    pub high_risk: bool,
    /// Moderate-risk health condition.
    #[serde(default)]
    pub moderate_risk: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChallengeResponse {
    /// Hex-encoded 128-bit server nonce; also identifies the challenge.
    pub challenge_id: String,
    pub client_key: String,
    pub difficulty: u32,
    pub expires_at: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProveRequest {
    pub challenge_id: String,
    pub nonce: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenResponse {
    pub token: String,
    pub role: Role,
    pub expires_in_secs: i64,
    /// Left out for researchers, who never receive instants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expires_at: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRequest {
    pub qr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanAck {
    pub handle: Uuid,
    pub window: CoarseWindow,
    /// `window` as shown to the user, e.g. `2021-03-01 08-12`.
    pub display_window: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireRequest {
    pub handle: Uuid,
    pub answers: Answers,
    #[serde(rename = "Exposure_Led_to_Contamination", default = "unknown_outcome")]
    pub outcome: Outcome,
}

fn unknown_outcome() -> Outcome {
    Outcome::Unknown
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireAck {
    pub accepted: bool,
    /// Earlier answers for the same handle were superseded.
    pub replaced: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PaletteParam {
    #[serde(default)]
    pub palette: Palette,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskResponse {
    /// Rounded to four decimals.
    pub score: f64,
    pub level: RiskLevel,
    pub colour: String,
    pub as_of: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactRow {
    pub user_id: Uuid,
    pub window: CoarseWindow,
    pub display_window: String,
    pub risk_score: f64,
    pub risk_level: RiskLevel,
    pub colour: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Contacts,
    EmptyWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvestigateResponse {
    pub venue_id: String,
    pub status: SearchStatus,
    pub contacts: Vec<ContactRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateParams {
    pub group_by: String,
    /// Comma-separated `Field:Level` pairs.
    #[serde(default)]
    pub filters: Option<String>,
    #[serde(default)]
    pub outcome_split: bool,
    /// `json` (default) or `csv`.
    #[serde(default)]
    pub format: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    /// `ok` when every silo can reach a quorum, `degraded` otherwise.
    pub status: String,
    pub silos: Vec<SiloHealth>,
}

/// Rounds a score for display.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}
