//! Cross-silo queries: investigator contact search and coarsened research
//! aggregates.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;
use venuetrace_core::model::{coarsen_timestamp, CoarseWindow, ExposureRecord, Field, Timestamp, MINUTES_PER_DAY};

use crate::silo::{AnswerSubmission, ScanEvent, SiloCluster, SiloPayload};

pub const DEFAULT_K_MIN: u64 = 5;
pub const DEFAULT_RETENTION_MINUTES: i64 = 28 * MINUTES_PER_DAY;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FederatedConfig {
    /// Smallest aggregate cell that is released.
    pub k_min: u64,
    /// Scans older than this, relative to the query time, are not searched.
    pub retention_minutes: i64,
}

impl Default for FederatedConfig {
    fn default() -> Self {
        FederatedConfig { k_min: DEFAULT_K_MIN, retention_minutes: DEFAULT_RETENTION_MINUTES }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("no scan was ever recorded at venue `{0}`")]
    UnknownVenue(String),
    #[error("query window is empty")]
    InvalidWindow,
    #[error("`{0}` cannot be grouped on")]
    InvalidGroupField(String),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryWindow {
    Coarse(CoarseWindow),
    Explicit { from: Timestamp, to: Timestamp },
}

impl QueryWindow {
    /// Half-open minute range.
    pub fn bounds(&self) -> Result<(Timestamp, Timestamp), QueryError> {
        let (from, to) = match *self {
            QueryWindow::Coarse(w) => (w.start(), w.end()),
            QueryWindow::Explicit { from, to } => (from, to),
        };
        if from < to {
            Ok((from, to))
        } else {
            Err(QueryError::InvalidWindow)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactQuery {
    pub venue_id: String,
    pub window: QueryWindow,
}

/// A pseudonymous visitor and the bin of their first scan in the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub user_id: Uuid,
    pub window: CoarseWindow,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchOutcome {
    /// Distinct visitors, ordered by user id.
    Contacts(Vec<Contact>),
    /// The venue is known but nobody scanned in the window.
    EmptyWindow,
}

impl SearchOutcome {
    pub fn contacts(&self) -> &[Contact] {
        match self {
            SearchOutcome::Contacts(c) => c,
            SearchOutcome::EmptyWindow => &[],
        }
    }
}

/// Contacts from an arbitrary collection of scans; the venue filter is applied
/// here, so callers may pass every scan they hold.
pub fn contacts_in<'a>(
    scans: impl IntoIterator<Item = &'a ScanEvent>,
    q: &ContactQuery,
    now: Timestamp,
    cfg: &FederatedConfig,
) -> Result<SearchOutcome, QueryError> {
    let (from, to) = q.window.bounds()?;
    let from = from.max(Timestamp(now.0 - cfg.retention_minutes));
    let mut known = false;
    let mut first: BTreeMap<Uuid, Timestamp> = BTreeMap::new();
    for s in scans.into_iter().filter(|s| s.venue_id == q.venue_id) {
        known = true;
        if from <= s.timestamp && s.timestamp < to {
            let t = first.entry(s.user_id).or_insert(s.timestamp);
            *t = (*t).min(s.timestamp);
        }
    }
    if !known {
        return Err(QueryError::UnknownVenue(q.venue_id.clone()));
    }
    if first.is_empty() {
        return Ok(SearchOutcome::EmptyWindow);
    }
    Ok(SearchOutcome::Contacts(
        first.into_iter().map(|(user_id, t)| Contact { user_id, window: coarsen_timestamp(t) }).collect(),
    ))
}

fn scans(payloads: &[SiloPayload]) -> impl Iterator<Item = &ScanEvent> {
    payloads.iter().filter_map(|p| match p {
        SiloPayload::Scan(s) => Some(s),
        SiloPayload::Answers(_) => None,
    })
}

/// Searches the venue's silo only.
pub fn search_contacts(
    cluster: &SiloCluster,
    q: &ContactQuery,
    now: Timestamp,
    cfg: &FederatedConfig,
) -> Result<SearchOutcome, QueryError> {
    contacts_in(cluster.venue_scans(&q.venue_id), q, now, cfg)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub field: String,
    pub level: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateQuery {
    /// Column name of a categorical questionnaire field.
    pub group_by: String,
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default)]
    pub outcome_split: bool,
}

/// One released cell. `window` is a four-hour bin label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub level: String,
    pub window: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub group_by: String,
    pub k_min: u64,
    pub rows: Vec<AggregateRow>,
    /// Cells withheld for falling below `k_min`.
    pub suppressed_cells: u64,
}

impl AggregateTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.group_by.as_str(), "window", "outcome", "count"]).expect("in-memory write");
        for r in &self.rows {
            let count = r.count.to_string();
            w.write_record([r.level.as_str(), &r.window, r.outcome.as_deref().unwrap_or(""), &count])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

fn parse_filters(filters: &[Filter]) -> Result<Vec<(Field, usize)>, QueryError> {
    filters
        .iter()
        .map(|f| {
            let field: Field =
                f.field.parse().map_err(|_| QueryError::InvalidFilter(format!("unknown field `{}`", f.field)))?;
            let level = field
                .level_index(&f.level)
                .ok_or_else(|| QueryError::InvalidFilter(format!("`{}` is not a level of {}", f.level, f.field)))?;
            Ok((field, level))
        })
        .collect()
}

/// Counts records per `(level, bin, outcome?)` and suppresses small cells.
pub fn aggregate_records(
    records: &[ExposureRecord],
    q: &AggregateQuery,
    k_min: u64,
) -> Result<AggregateTable, QueryError> {
    let group: Field = q.group_by.parse().map_err(|_| QueryError::InvalidGroupField(q.group_by.clone()))?;
    let filters = parse_filters(&q.filters)?;
    let mut cells: BTreeMap<(usize, CoarseWindow, Option<&'static str>), u64> = BTreeMap::new();
    for r in records {
        if filters.iter().any(|(f, level)| r.level(*f) != *level) {
            continue;
        }
        let outcome = q.outcome_split.then(|| r.led_to_contamination.label());
        *cells.entry((r.level(group), coarsen_timestamp(r.timestamp), outcome)).or_default() += 1;
    }
    let labels = group.level_labels();
    let mut rows = Vec::new();
    let mut suppressed_cells = 0;
    for ((level, window, outcome), count) in cells {
        if count < k_min {
            suppressed_cells += 1;
            continue;
        }
        rows.push(AggregateRow {
            level: labels[level].to_owned(),
            window: window.to_string(),
            outcome: outcome.map(str::to_owned),
            count,
        });
    }
    Ok(AggregateTable { group_by: group.column_name().to_owned(), k_min, rows, suppressed_cells })
}

/// Scans joined with their latest answers, across every silo. Unanswered
/// scans are left out.
pub fn joined_records(cluster: &SiloCluster) -> Vec<ExposureRecord> {
    let mut out = Vec::new();
    for silo in 0..cluster.n_silos() {
        let payloads = cluster.payloads(silo).expect("silo exists");
        let mut latest: HashMap<Uuid, &AnswerSubmission> = HashMap::new();
        for p in payloads {
            if let SiloPayload::Answers(a) = p {
                latest.insert(a.handle, a);
            }
        }
        for s in scans(payloads) {
            if let Some(a) = latest.get(&s.handle) {
                let mut r = ExposureRecord::from_answers(s.timestamp, s.user_id, s.venue_type, a.answers.clone());
                r.led_to_contamination = a.outcome;
                out.push(r);
            }
        }
    }
    out
}

pub fn research_aggregate(
    cluster: &SiloCluster,
    q: &AggregateQuery,
    cfg: &FederatedConfig,
) -> Result<AggregateTable, QueryError> {
    // Validate before touching the silos.
    q.group_by.parse::<Field>().map_err(|_| QueryError::InvalidGroupField(q.group_by.clone()))?;
    parse_filters(&q.filters)?;
    aggregate_records(&joined_records(cluster), q, cfg.k_min)
}
