use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::model::{ExposureRecord, RiskProfile, Timestamp, MINUTES_PER_DAY};
use crate::risk::{combined_risk, DecayParams, ExposureEvent, UserHistory, DEFAULT_LAMBDA};

/// How per-user test outcomes are simulated from a record set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistoryConfig {
    /// Decay rate under which outcomes are drawn.
    pub true_lambda: f64,
    /// Tests happen uniformly within this many minutes after the last visit.
    pub max_test_delay: i64,
    pub profile: RiskProfile,
    pub seed: u64,
}

impl Default for HistoryConfig {
    fn default() -> Self {
        HistoryConfig {
            true_lambda: DEFAULT_LAMBDA,
            max_test_delay: 14 * MINUTES_PER_DAY,
            profile: RiskProfile::Low,
            seed: 0,
        }
    }
}

/// Groups records by user and draws one test outcome per user from the
/// combined risk at the test time. Records without a risk value are skipped.
pub fn build_histories(records: &[ExposureRecord], config: &HistoryConfig) -> Vec<UserHistory> {
    let mut by_user: BTreeMap<Uuid, Vec<ExposureEvent>> = BTreeMap::new();
    for r in records {
        if let Some(p) = r.risk_of_contamination {
            by_user.entry(r.user_id).or_default().push(ExposureEvent::new(r.timestamp, p));
        }
    }
    let params = DecayParams::with_lambda(config.true_lambda);
    by_user
        .into_values()
        .enumerate()
        .map(|(i, mut events)| {
            events.sort_by_key(|e| e.at);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let last = events.last().expect("non-empty group").at;
            let assessed_at = Timestamp(last.0 + rng.random_range(0..=config.max_test_delay));
            let risk = combined_risk(&events, assessed_at, &params).expect("events precede the test");
            let positive = rng.random::<f64>() < risk;
            UserHistory { profile: config.profile, events, assessed_at, positive }
        })
        .collect()
}
