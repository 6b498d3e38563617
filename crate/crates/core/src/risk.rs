//! Time-decayed exposure risk.
//!
//! A user's score at time `t` over exposures `(t_n, p_n)` is
//!
//! ```text
//! score(t) = 1 - prod_n (1 - p_n * exp(-lambda * delta(t, t_n)))
//! ```
//!
//! where `delta` is zero during a two-day grace window and grows linearly after
//! it. The score is the probability of at least one effective exposure, even
//! though the original formulation labels it "not exposed".

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RiskProfile, Timestamp, MINUTES_PER_DAY};

/// Minutes in two days: the shortest incubation period.
pub const GRACE_MINUTES: i64 = 2880;
pub const DEFAULT_LAMBDA: f64 = 0.0001;
pub const LAMBDA_RANGE: (f64, f64) = (0.00005, 0.0005);
pub const DEFAULT_HORIZON_MINUTES: i64 = 28 * MINUTES_PER_DAY;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("negative gap: {later} precedes {earlier}")]
    NegativeGap { later: i64, earlier: i64 },
    #[error("exposure at minute {event} is after the query time {now}")]
    FutureEvent { event: i64, now: i64 },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid threshold table: {0}")]
    InvalidThresholds(String),
    #[error("invalid decay parameters: {0}")]
    InvalidDecay(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    /// Decay constant per minute.
    pub lambda: f64,
    /// Minutes during which an exposure keeps its full weight.
    pub grace: i64,
    /// Age beyond which stored exposures are pruned. At the default decay the
    /// pruned weight is below `exp(-3.74)`.
    pub horizon: i64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams { lambda: DEFAULT_LAMBDA, grace: GRACE_MINUTES, horizon: DEFAULT_HORIZON_MINUTES }
    }
}

impl DecayParams {
    pub fn with_lambda(lambda: f64) -> Self {
        DecayParams { lambda, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(RiskError::InvalidDecay(format!("lambda {} must be positive", self.lambda)));
        }
        if !(LAMBDA_RANGE.0..=LAMBDA_RANGE.1).contains(&self.lambda) {
            return Err(RiskError::InvalidDecay(format!(
                "lambda {} outside the searched range [{}, {}]",
                self.lambda, LAMBDA_RANGE.0, LAMBDA_RANGE.1
            )));
        }
        if self.grace < 0 || self.horizon < self.grace {
            return Err(RiskError::InvalidDecay("need 0 <= grace <= horizon".into()));
        }
        Ok(())
    }
}

/// `delta(x, y)` in minutes with the standard two-day grace window.
pub fn delta(x: i64, y: i64) -> Result<i64, RiskError> {
    delta_with_grace(x, y, GRACE_MINUTES)
}

pub fn delta_with_grace(x: i64, y: i64, grace: i64) -> Result<i64, RiskError> {
    if x < y {
        return Err(RiskError::NegativeGap { later: y, earlier: x });
    }
    let gap = x - y;
    Ok(if gap <= grace { 0 } else { gap - grace })
}

/// `exp(-lambda * delta(gap))`; exactly 1 within the grace window.
pub fn decay_weight(gap: i64, params: &DecayParams) -> f64 {
    debug_assert!(gap >= 0);
    let excess = if gap <= params.grace { 0 } else { gap - params.grace };
    (-params.lambda * excess as f64).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureEvent {
    pub at: Timestamp,
    /// Contamination probability of this single exposure.
    pub probability: f64,
}

impl ExposureEvent {
    pub fn new(at: Timestamp, probability: f64) -> Self {
        ExposureEvent { at, probability }
    }
}

pub fn combined_risk(events: &[ExposureEvent], now: Timestamp, params: &DecayParams) -> Result<f64, RiskError> {
    let mut escape = 1.0;
    for event in events {
        if event.at > now {
            return Err(RiskError::FutureEvent { event: event.at.0, now: now.0 });
        }
        if !(0.0..=1.0).contains(&event.probability) {
            return Err(RiskError::InvalidProbability(event.probability));
        }
        escape *= 1.0 - event.probability * decay_weight(now.0 - event.at.0, params);
    }
    Ok((1.0 - escape).clamp(0.0, 1.0))
}

/// Drops exposures older than the configured horizon.
pub fn prune_events(events: &mut Vec<ExposureEvent>, now: Timestamp, params: &DecayParams) {
    events.retain(|e| now.0 - e.at.0 <= params.horizon);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskLevel {
    Low,
    Medium,
    High,
    VeryHigh,
}

impl RiskLevel {
    pub const ALL: [RiskLevel; 4] = [RiskLevel::Low, RiskLevel::Medium, RiskLevel::High, RiskLevel::VeryHigh];

    pub fn colour(self, palette: Palette) -> &'static str {
        match (palette, self) {
            (Palette::Standard, RiskLevel::Low) => "green",
            (Palette::Standard, RiskLevel::Medium) => "yellow",
            (Palette::Standard, RiskLevel::High) => "orange",
            (Palette::Standard, RiskLevel::VeryHigh) => "red",
            (Palette::ColourBlind, RiskLevel::Low) => "blue",
            (Palette::ColourBlind, RiskLevel::Medium) => "light-blue",
            (Palette::ColourBlind, RiskLevel::High) => "light-orange",
            (Palette::ColourBlind, RiskLevel::VeryHigh) => "orange",
        }
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RiskLevel::Low => "low",
            RiskLevel::Medium => "medium",
            RiskLevel::High => "high",
            RiskLevel::VeryHigh => "very high",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    #[default]
    Standard,
    ColourBlind,
}

/// Level boundaries `(t1, t2, t3)`, strictly increasing inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds(pub f64, pub f64, pub f64);

/// Per-profile thresholds. Vulnerable profiles get lower thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub high: Thresholds,
    pub moderate: Thresholds,
    pub low: Thresholds,
}

impl Default for ThresholdTable {
    fn default() -> Self {
        ThresholdTable {
            high: Thresholds(0.10, 0.25, 0.45),
            moderate: Thresholds(0.15, 0.35, 0.60),
            low: Thresholds(0.25, 0.50, 0.75),
        }
    }
}

impl ThresholdTable {
    pub fn for_profile(&self, profile: RiskProfile) -> Thresholds {
        match profile {
            RiskProfile::High => self.high,
            RiskProfile::Moderate => self.moderate,
            RiskProfile::Low => self.low,
        }
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        for profile in RiskProfile::ALL {
            let Thresholds(a, b, c) = self.for_profile(profile);
            if !(0.0 < a && a < b && b < c && c < 1.0) {
                return Err(RiskError::InvalidThresholds(format!(
                    "{profile:?} thresholds ({a}, {b}, {c}) must satisfy 0 < t1 < t2 < t3 < 1"
                )));
            }
        }
        let pairs = [(self.high, self.moderate), (self.moderate, self.low)];
        for (lower, upper) in pairs {
            if lower.0 > upper.0 || lower.1 > upper.1 || lower.2 > upper.2 {
                return Err(RiskError::InvalidThresholds("thresholds must not increase with vulnerability".into()));
            }
        }
        Ok(())
    }
}

pub fn risk_level(score: f64, profile: RiskProfile, table: &ThresholdTable) -> RiskLevel {
    let Thresholds(t1, t2, t3) = table.for_profile(profile);
    if score < t1 {
        RiskLevel::Low
    } else if score < t2 {
        RiskLevel::Medium
    } else if score < t3 {
        RiskLevel::High
    } else {
        RiskLevel::VeryHigh
    }
}

/// Candidates from `lo` to `hi`: `lo`, then every multiple of `step` above it up
/// to `hi`. With (5e-5, 5e-4, 1e-4) this is {5e-5, 1e-4, 2e-4, ..., 5e-4}.
pub fn lambda_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && step > 0.0);
    let mut grid = vec![lo];
    let mut k = (lo / step).floor() as i64 + 1;
    loop {
        let value = k as f64 * step;
        // Snap to a short decimal so grid values print and compare cleanly.
        let value = (value * 1e12).round() / 1e12;
        if value > hi * (1.0 + 1e-12) {
            break;
        }
        if value > lo * (1.0 + 1e-12) {
            grid.push(value);
        }
        k += 1;
    }
    grid
}

/// The first candidate maximising `objective`.
pub fn select_lambda(candidates: &[f64], mut objective: impl FnMut(f64) -> f64) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &lambda in candidates {
        let score = objective(lambda);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((lambda, score));
        }
    }
    best.map(|(lambda, _)| lambda)
}

/// A user's exposures and the outcome of a test taken at `assessed_at`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserHistory {
    pub profile: RiskProfile,
    pub events: Vec<ExposureEvent>,
    pub assessed_at: Timestamp,
    pub positive: bool,
}

/// Share of histories whose level at assessment agrees with the outcome, a
/// level of High or above counting as a positive call.
pub fn level_accuracy(histories: &[UserHistory], params: &DecayParams, table: &ThresholdTable) -> f64 {
    if histories.is_empty() {
        return 0.0;
    }
    let correct = histories
        .iter()
        .filter(|h| {
            let score = combined_risk(&h.events, h.assessed_at, params).unwrap_or(1.0);
            (risk_level(score, h.profile, table) >= RiskLevel::High) == h.positive
        })
        .count();
    correct as f64 / histories.len() as f64
}

/// Objective value of every candidate, keyed by candidate order.
pub fn lambda_report(
    candidates: &[f64],
    histories: &[UserHistory],
    base: &DecayParams,
    table: &ThresholdTable,
) -> BTreeMap<usize, (f64, f64)> {
    candidates
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let params = DecayParams { lambda, ..*base };
            (i, (lambda, level_accuracy(histories, &params, table)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DAY: i64 = MINUTES_PER_DAY;

    #[test]
    fn delta_piecewise() {
        assert_eq!(delta(1440, 0).unwrap(), 0);
        assert_eq!(delta(2880, 0).unwrap(), 0);
        assert_eq!(delta(4320, 0).unwrap(), 1440);
        assert_eq!(delta(10_000 + 2881, 10_000).unwrap(), 1);
        assert!(matches!(delta(0, 1), Err(RiskError::NegativeGap { .. })));
    }

    #[test]
    fn decay_examples() {
        let p = DecayParams::default();
        assert_eq!(decay_weight(0, &p), 1.0);
        assert_eq!(decay_weight(2880, &p), 1.0);
        assert!((decay_weight(2880 + 6931, &p) - 0.5).abs() < 1e-3);
        assert!((decay_weight(12_960, &p) - 0.3650).abs() < 1e-4);
    }

    #[test]
    fn combined_examples() {
        let p = DecayParams::default();
        let now = Timestamp(100 * DAY);
        assert_eq!(combined_risk(&[], now, &p).unwrap(), 0.0);
        assert_eq!(combined_risk(&[ExposureEvent::new(now, 1.0)], now, &p).unwrap(), 1.0);
        let two = [ExposureEvent::new(Timestamp(now.0 - 60), 0.3), ExposureEvent::new(now, 0.5)];
        assert!((combined_risk(&two, now, &p).unwrap() - 0.65).abs() < 1e-15);
        let old = [ExposureEvent::new(Timestamp(now.0 - 9 * DAY), 0.5)];
        assert!((combined_risk(&old, now, &p).unwrap() - 0.1825).abs() < 1e-3);
        let future = [ExposureEvent::new(Timestamp(now.0 + 1), 0.5)];
        assert!(matches!(combined_risk(&future, now, &p), Err(RiskError::FutureEvent { .. })));
        let bad = [ExposureEvent::new(now, 1.5)];
        assert!(matches!(combined_risk(&bad, now, &p), Err(RiskError::InvalidProbability(_))));
    }

    #[test]
    fn level_examples() {
        let table = ThresholdTable::default();
        table.validate().unwrap();
        for profile in RiskProfile::ALL {
            assert_eq!(risk_level(0.0, profile, &table), RiskLevel::Low);
            assert_eq!(risk_level(0.99, profile, &table), RiskLevel::VeryHigh);
        }
        assert_eq!(risk_level(0.30, RiskProfile::Low, &table), RiskLevel::Medium);
        assert_eq!(risk_level(0.30, RiskProfile::High, &table), RiskLevel::High);
        assert_eq!(risk_level(0.25, RiskProfile::Low, &table), RiskLevel::Medium);
    }

    #[test]
    fn threshold_validation() {
        let table = ThresholdTable { high: Thresholds(0.3, 0.25, 0.45), ..ThresholdTable::default() };
        assert!(table.validate().is_err());
        let table = ThresholdTable { high: Thresholds(0.3, 0.4, 0.5), ..ThresholdTable::default() };
        assert!(table.validate().is_err());
    }

    #[test]
    fn palettes() {
        assert_eq!(RiskLevel::VeryHigh.colour(Palette::Standard), "red");
        assert_eq!(RiskLevel::VeryHigh.colour(Palette::ColourBlind), "orange");
        assert_eq!(RiskLevel::Low.colour(Palette::ColourBlind), "blue");
    }

    #[test]
    fn lambda_selection() {
        assert_eq!(select_lambda(&[0.0001], |_| 0.3), Some(0.0001));
        let grid = lambda_grid(LAMBDA_RANGE.0, LAMBDA_RANGE.1, 0.0001);
        assert_eq!(grid, vec![0.00005, 0.0001, 0.0002, 0.0003, 0.0004, 0.0005]);
        assert_eq!(select_lambda(&grid, |_| 1.0), Some(0.00005));
        assert_eq!(select_lambda(&grid, |l| l), Some(0.0005));
        assert_eq!(select_lambda(&[], |l| l), None);
    }

    #[test]
    fn decay_validation() {
        DecayParams::default().validate().unwrap();
        assert!(DecayParams::with_lambda(0.01).validate().is_err());
        assert!(DecayParams::with_lambda(-1.0).validate().is_err());
    }

    #[test]
    fn pruning_drops_only_old_events() {
        let p = DecayParams::default();
        let now = Timestamp(60 * DAY);
        let mut events = vec![
            ExposureEvent::new(Timestamp(now.0 - 29 * DAY), 0.9),
            ExposureEvent::new(Timestamp(now.0 - 28 * DAY), 0.9),
        ];
        prune_events(&mut events, now, &p);
        assert_eq!(events.len(), 1);
        assert!(decay_weight(28 * DAY, &p) < (-3.74f64).exp() + 1e-3);
    }

    fn events() -> impl Strategy<Value = Vec<(i64, f64)>> {
        prop::collection::vec((0i64..40 * DAY, 0.0f64..=1.0), 0..10)
    }

    proptest! {
        #[test]
        fn score_bounded_and_permutation_invariant(ev in events(), seed in any::<u64>()) {
            let p = DecayParams::default();
            let now = Timestamp(50 * DAY);
            let list: Vec<_> = ev.iter().map(|(age, q)| ExposureEvent::new(Timestamp(now.0 - age), *q)).collect();
            let s = combined_risk(&list, now, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            let mut shuffled = list.clone();
            let n = shuffled.len();
            if n > 1 {
                shuffled.rotate_left((seed as usize) % n);
                shuffled.swap(0, n - 1);
            }
            prop_assert!((combined_risk(&shuffled, now, &p).unwrap() - s).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_probability_and_count(ev in events(), extra_age in 0i64..40 * DAY, extra_p in 0.0f64..=1.0, bump in 0.0f64..=1.0) {
            let p = DecayParams::default();
            let now = Timestamp(50 * DAY);
            let list: Vec<_> = ev.iter().map(|(age, q)| ExposureEvent::new(Timestamp(now.0 - age), *q)).collect();
            let base = combined_risk(&list, now, &p).unwrap();

            let mut more = list.clone();
            more.push(ExposureEvent::new(Timestamp(now.0 - extra_age), extra_p));
            prop_assert!(combined_risk(&more, now, &p).unwrap() >= base - 1e-15);

            let mut zero = list.clone();
            zero.push(ExposureEvent::new(Timestamp(now.0 - extra_age), 0.0));
            prop_assert_eq!(combined_risk(&zero, now, &p).unwrap(), base);

            if let Some(first) = list.first() {
                let mut raised = list.clone();
                raised[0].probability = first.probability + (1.0 - first.probability) * bump;
                prop_assert!(combined_risk(&raised, now, &p).unwrap() >= base - 1e-15);
            }
        }

        #[test]
        fn decay_non_increasing(a in 0i64..100 * DAY, b in 0i64..100 * DAY) {
            let p = DecayParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(decay_weight(hi, &p) <= decay_weight(lo, &p));
            prop_assert!(decay_weight(lo, &p) > 0.0 && decay_weight(lo, &p) <= 1.0);
        }

        #[test]
        fn single_event_level_never_rises(q in 0.0f64..=1.0, profile in prop::sample::select(RiskProfile::ALL.to_vec())) {
            let p = DecayParams::default();
            let table = ThresholdTable::default();
            let start = Timestamp(10 * DAY);
            let ev = [ExposureEvent::new(start, q)];
            let mut previous = RiskLevel::VeryHigh;
            for hours in (0..40 * 24).step_by(6) {
                let now = Timestamp(start.0 + hours * 60);
                let level = risk_level(combined_risk(&ev, now, &p).unwrap(), profile, &table);
                prop_assert!(level <= previous);
                previous = level;
            }
        }
    }

    #[test]
    fn decay_continuous_at_grace_boundary() {
        let p = DecayParams::default();
        assert_eq!(decay_weight(p.grace, &p), 1.0);
        assert!((decay_weight(p.grace + 1, &p) - 1.0).abs() < 2e-4);
    }
}
