use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Timelike, Utc};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MINUTES_PER_DAY: i64 = 1440;
const MINUTES_PER_WINDOW: i64 = 240;

/// Minutes since the Unix epoch. Records keep full minute resolution; only
/// research-facing output is coarsened.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Timestamp(pub i64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimestampError {
    #[error("invalid ISO-8601 timestamp `{0}`")]
    Parse(String),
    #[error("timestamp precedes the epoch")]
    BeforeEpoch,
}

impl Timestamp {
    pub fn from_minutes(minutes: i64) -> Self {
        Timestamp(minutes)
    }

    pub fn minutes(self) -> i64 {
        self.0
    }

    pub fn from_datetime(at: DateTime<Utc>) -> Self {
        Timestamp(at.timestamp().div_euclid(60))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0 * 60, 0).expect("minute timestamp within chrono range")
    }

    pub fn now() -> Self {
        Self::from_datetime(Utc::now())
    }

    pub fn to_iso8601(self) -> String {
        self.to_datetime().format("%Y-%m-%dT%H:%M:00Z").to_string()
    }

    pub fn parse_iso8601(text: &str) -> Result<Self, TimestampError> {
        let at =
            DateTime::parse_from_rfc3339(text).map_err(|_| TimestampError::Parse(text.to_owned()))?.with_timezone(&Utc);
        let ts = Self::from_datetime(at.with_second(0).unwrap_or(at));
        if ts.0 < 0 {
            return Err(TimestampError::BeforeEpoch);
        }
        Ok(ts)
    }

    pub fn minute_of_day(self) -> i64 {
        self.0.rem_euclid(MINUTES_PER_DAY)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso8601())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_iso8601())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Timestamp::parse_iso8601(&text).map_err(de::Error::custom)
    }
}

/// One of the six four-hour bins of a day, half-open `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DayWindow {
    H00To04,
    H04To08,
    H08To12,
    H12To16,
    H16To20,
    H20To24,
}

impl DayWindow {
    pub const ALL: [DayWindow; 6] = [
        DayWindow::H00To04,
        DayWindow::H04To08,
        DayWindow::H08To12,
        DayWindow::H12To16,
        DayWindow::H16To20,
        DayWindow::H20To24,
    ];

    pub fn from_minute_of_day(minute: i64) -> Self {
        Self::ALL[(minute.rem_euclid(MINUTES_PER_DAY) / MINUTES_PER_WINDOW) as usize]
    }

    pub fn start_minute(self) -> i64 {
        self as i64 * MINUTES_PER_WINDOW
    }

    pub fn end_minute(self) -> i64 {
        self.start_minute() + MINUTES_PER_WINDOW
    }

    pub fn label(self) -> &'static str {
        match self {
            DayWindow::H00To04 => "00-04",
            DayWindow::H04To08 => "04-08",
            DayWindow::H08To12 => "08-12",
            DayWindow::H12To16 => "12-16",
            DayWindow::H16To20 => "16-20",
            DayWindow::H20To24 => "20-24",
        }
    }
}

impl fmt::Display for DayWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DayWindow {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|w| w.label() == s).ok_or_else(|| TimestampError::Parse(s.to_owned()))
    }
}

impl Serialize for DayWindow {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for DayWindow {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(de::Error::custom)
    }
}

/// A calendar day and one of its four-hour bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoarseWindow {
    pub date: NaiveDate,
    pub window: DayWindow,
}

impl CoarseWindow {
    /// First minute of the bin.
    pub fn start(self) -> Timestamp {
        let day = self.date.signed_duration_since(NaiveDate::default()).num_days();
        Timestamp(day * MINUTES_PER_DAY + self.window.start_minute())
    }

    /// First minute after the bin.
    pub fn end(self) -> Timestamp {
        Timestamp(self.start().0 + MINUTES_PER_WINDOW)
    }
}

impl fmt::Display for CoarseWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.date, self.window)
    }
}

pub fn coarsen_timestamp(t: Timestamp) -> CoarseWindow {
    let day = t.0.div_euclid(MINUTES_PER_DAY);
    CoarseWindow {
        date: NaiveDate::default().checked_add_signed(chrono::TimeDelta::days(day)).unwrap_or(if day < 0 {
            NaiveDate::MIN
        } else {
            NaiveDate::MAX
        }),
        window: DayWindow::from_minute_of_day(t.minute_of_day()),
    }
}
