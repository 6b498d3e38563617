//! Venue poster QR codes.
//!
//! A poster encodes colon-separated clear-text particles followed by a compact
//! JWS (RFC 7515). Only the `id` and `vt` members of the JWS payload are read.
//! The signature is not verified.

use base64::alphabet;
use base64::engine::{DecodePaddingMode, GeneralPurpose, GeneralPurposeConfig};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::VenueType;

const BASE64URL: GeneralPurpose = GeneralPurpose::new(
    &alphabet::URL_SAFE,
    GeneralPurposeConfig::new().with_decode_padding_mode(DecodePaddingMode::Indifferent),
);

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QrPayload {
    #[serde(rename = "id")]
    pub venue_id: String,
    #[serde(rename = "vt")]
    pub venue_type_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QrError {
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(&'static str),
    #[error("malformed JWS: {0}")]
    MalformedJws(String),
    #[error("JWS payload has no `{0}` member")]
    MissingField(&'static str),
}

pub fn parse_qr(text: &str) -> Result<QrPayload, QrError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(QrError::MalformedEnvelope("empty input"));
    }
    let (prefix, jws) = text.rsplit_once(':').ok_or(QrError::MalformedEnvelope("no colon-separated particles"))?;
    if prefix.is_empty() || jws.is_empty() {
        return Err(QrError::MalformedEnvelope("empty particle"));
    }

    let mut segments = jws.split('.');
    let (Some(header), Some(payload), Some(_signature), None) =
        (segments.next(), segments.next(), segments.next(), segments.next())
    else {
        return Err(QrError::MalformedJws("expected three dot-separated segments".into()));
    };
    BASE64URL.decode(header).map_err(|e| QrError::MalformedJws(format!("header: {e}")))?;
    let payload = BASE64URL.decode(payload).map_err(|e| QrError::MalformedJws(format!("payload: {e}")))?;
    let payload: Value =
        serde_json::from_slice(&payload).map_err(|e| QrError::MalformedJws(format!("payload is not JSON: {e}")))?;
    let object = payload.as_object().ok_or_else(|| QrError::MalformedJws("payload is not a JSON object".into()))?;

    let member = |name: &'static str| -> Result<String, QrError> {
        match object.get(name) {
            Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
            Some(Value::Number(n)) => Ok(n.to_string()),
            _ => Err(QrError::MissingField(name)),
        }
    };
    Ok(QrPayload { venue_id: member("id")?, venue_type_code: member("vt")? })
}

/// Maps a poster venue-type code onto the 19 venue types. Codes are compared
/// numerically ("015" and "15" agree); anything unrecognised is `Other`.
pub fn map_venue_type(vt_code: &str) -> VenueType {
    let digits = vt_code.trim();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return VenueType::Other;
    }
    let trimmed = digits.trim_start_matches('0');
    trimmed.parse::<u8>().ok().and_then(VenueType::from_code).unwrap_or(VenueType::Other)
}
