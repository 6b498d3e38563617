//! Adaptive proof-of-work client puzzles.
//!
//! A client proves work by finding a nonce such that
//! `SHA-256(server_nonce ‖ client_key ‖ nonce)` starts with at least
//! `difficulty` zero bits, where `nonce` is hashed as a big-endian `u64`.

use std::collections::{BTreeMap, HashMap, VecDeque};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const NONCE_BYTES: usize = 16;
pub type ServerNonce = [u8; NONCE_BYTES];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowParams {
    /// Difficulty of a first connection on an unweighted route.
    pub d_base: u32,
    pub d_min: u32,
    pub d_max: u32,
    /// Requests per minute that cost nothing extra.
    pub r_free: f64,
    /// Extra bits per request per minute above `r_free`.
    pub step: f64,
    /// Extra bits per route, keyed by the role the session is requested for.
    pub route_weights: BTreeMap<String, u32>,
    pub challenge_ttl_secs: i64,
    /// Trailing window over which the request rate is observed.
    pub rate_window_secs: i64,
}

impl Default for PowParams {
    fn default() -> Self {
        PowParams {
            d_base: 8,
            d_min: 0,
            d_max: 20,
            r_free: 10.0,
            step: 0.2,
            route_weights: BTreeMap::new(),
            challenge_ttl_secs: 120,
            rate_window_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid proof-of-work parameters: {0}")]
pub struct InvalidPowParams(pub String);

impl PowParams {
    pub fn validate(&self) -> Result<(), InvalidPowParams> {
        let bad = |m: &str| Err(InvalidPowParams(m.to_owned()));
        if self.d_min > self.d_max || self.d_max > 256 {
            return bad("need d_min <= d_max <= 256");
        }
        if !(self.r_free >= 0.0 && self.r_free.is_finite()) || !(self.step >= 0.0 && self.step.is_finite()) {
            return bad("r_free and step must be finite and non-negative");
        }
        if self.challenge_ttl_secs <= 0 || self.rate_window_secs <= 0 {
            return bad("durations must be positive");
        }
        Ok(())
    }

    pub fn route_weight(&self, route: &str) -> u32 {
        self.route_weights.get(route).copied().unwrap_or(0)
    }

    /// `clamp(d_base + floor(step · max(0, rate − r_free)) + route_weight, d_min, d_max)`.
    pub fn difficulty(&self, observed_rate: f64, route_weight: u32) -> u32 {
        let excess = (observed_rate - self.r_free).max(0.0);
        // The epsilon keeps exact products such as 0.2 · 15 from rounding down.
        let extra = (self.step * excess + 1e-9).floor();
        let raw = f64::from(self.d_base) + extra + f64::from(route_weight);
        raw.clamp(f64::from(self.d_min), f64::from(self.d_max)) as u32
    }
}

pub fn pow_digest(server_nonce: &ServerNonce, client_key: &[u8], nonce: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(server_nonce);
    h.update(client_key);
    h.update(nonce.to_be_bytes());
    h.finalize().into()
}

pub fn leading_zero_bits(digest: &[u8]) -> u32 {
    let mut bits = 0;
    for b in digest {
        if *b == 0 {
            bits += 8;
        } else {
            return bits + b.leading_zeros();
        }
    }
    bits
}

pub fn meets_difficulty(server_nonce: &ServerNonce, client_key: &[u8], nonce: u64, difficulty: u32) -> bool {
    leading_zero_bits(&pow_digest(server_nonce, client_key, nonce)) >= difficulty
}

/// Smallest nonce at or after `start` that meets `difficulty`.
pub fn solve(server_nonce: &ServerNonce, client_key: &[u8], difficulty: u32, start: u64) -> Option<u64> {
    (start..=u64::MAX).find(|n| meets_difficulty(server_nonce, client_key, *n, difficulty))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Challenge<T> {
    pub server_nonce: ServerNonce,
    pub client_key: Vec<u8>,
    pub difficulty: u32,
    pub expires_at: DateTime<Utc>,
    /// What a successful proof unlocks.
    pub grant: T,
}

impl<T> Challenge<T> {
    pub fn id(&self) -> String {
        hex::encode(self.server_nonce)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PowError {
    #[error("challenge expired")]
    Expired,
    #[error("challenge unknown or already used")]
    Replay,
    #[error("proof has {found} leading zero bits; {required} required")]
    InsufficientWork { required: u32, found: u32 },
}

/// Outstanding challenges. Each is consumed by its first proof attempt.
pub struct ChallengeStore<T> {
    pending: HashMap<ServerNonce, Challenge<T>>,
}

impl<T> Default for ChallengeStore<T> {
    fn default() -> Self {
        ChallengeStore { pending: HashMap::new() }
    }
}

impl<T> ChallengeStore<T> {
    pub fn insert(&mut self, challenge: Challenge<T>, now: DateTime<Utc>) {
        self.pending.retain(|_, c| c.expires_at > now);
        self.pending.insert(challenge.server_nonce, challenge);
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Consumes the challenge whatever the outcome.
    pub fn verify(
        &mut self,
        server_nonce: &ServerNonce,
        nonce: u64,
        now: DateTime<Utc>,
    ) -> Result<Challenge<T>, PowError> {
        let c = self.pending.remove(server_nonce).ok_or(PowError::Replay)?;
        if now >= c.expires_at {
            return Err(PowError::Expired);
        }
        let found = leading_zero_bits(&pow_digest(&c.server_nonce, &c.client_key, nonce));
        if found < c.difficulty {
            return Err(PowError::InsufficientWork { required: c.difficulty, found });
        }
        Ok(c)
    }
}

/// Request counts per source over a trailing window.
#[derive(Default)]
pub struct RateTracker {
    seen: HashMap<String, VecDeque<DateTime<Utc>>>,
}

impl RateTracker {
    /// Records a request and returns the number of requests from `source`
    /// within the window, this one included.
    pub fn observe(&mut self, source: &str, now: DateTime<Utc>, window: Duration) -> usize {
        let cutoff = now - window;
        if self.seen.len() > 10_000 {
            self.seen.retain(|_, q| q.back().is_some_and(|t| *t > cutoff));
        }
        let q = self.seen.entry(source.to_owned()).or_default();
        while q.front().is_some_and(|t| *t <= cutoff) {
            q.pop_front();
        }
        q.push_back(now);
        q.len()
    }
}

/// Requests per minute equivalent of `count` requests over `window`.
pub fn per_minute(count: usize, window: Duration) -> f64 {
    count as f64 * 60.0 / window.num_seconds() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nonce(b: u8) -> ServerNonce {
        [b; NONCE_BYTES]
    }

    fn at(s: i64) -> DateTime<Utc> {
        DateTime::from_timestamp(1_614_556_800 + s, 0).unwrap()
    }

    #[test]
    fn difficulty_formula() {
        let p = PowParams::default();
        assert_eq!(p.difficulty(1.0, 0), 8);
        assert_eq!(p.difficulty(10.0, 0), 8);
        assert_eq!(p.difficulty(20.0, 0), 10);
        assert_eq!(p.difficulty(25.0, 0), 11);
        assert_eq!(p.difficulty(1e9, 0), 20);
        let unit = PowParams { step: 1.0, ..PowParams::default() };
        assert_eq!(unit.difficulty(14.0, 0), 12);
        assert_eq!(unit.difficulty(14.0, 3), 15);
        assert_eq!(unit.difficulty(0.0, 100), 20);
        let floor = PowParams { d_min: 10, ..PowParams::default() };
        assert_eq!(floor.difficulty(0.0, 0), 10);
    }

    #[test]
    fn zero_bits() {
        assert_eq!(leading_zero_bits(&[0, 0, 0x80]), 16);
        assert_eq!(leading_zero_bits(&[0, 0x01]), 15);
        assert_eq!(leading_zero_bits(&[0xff]), 0);
        assert_eq!(leading_zero_bits(&[0; 4]), 32);
    }

    #[test]
    fn digest_layout() {
        let mut h = Sha256::new();
        h.update([7u8; 16]);
        h.update(b"key");
        h.update([0, 0, 0, 0, 0, 0, 1, 2]);
        let want: [u8; 32] = h.finalize().into();
        assert_eq!(pow_digest(&nonce(7), b"key", 0x0102), want);
    }

    fn challenge(d: u32, expires: i64) -> Challenge<()> {
        Challenge {
            server_nonce: nonce(1),
            client_key: b"ck".to_vec(),
            difficulty: d,
            expires_at: at(expires),
            grant: (),
        }
    }

    #[test]
    fn zero_difficulty_accepts_anything() {
        let mut store = ChallengeStore::default();
        store.insert(challenge(0, 60), at(0));
        assert!(store.verify(&nonce(1), 12345, at(1)).is_ok());
    }

    #[test]
    fn solved_proof_is_accepted_once() {
        let n = solve(&nonce(1), b"ck", 8, 0).unwrap();
        let mut store = ChallengeStore::default();
        store.insert(challenge(8, 60), at(0));
        assert!(store.verify(&nonce(1), n, at(1)).is_ok());
        assert_eq!(store.verify(&nonce(1), n, at(1)), Err(PowError::Replay));
    }

    #[test]
    fn failed_attempt_consumes() {
        let mut store = ChallengeStore::default();
        store.insert(challenge(20, 60), at(0));
        let bad = (0..).find(|n| !meets_difficulty(&nonce(1), b"ck", *n, 20)).unwrap();
        assert!(matches!(store.verify(&nonce(1), bad, at(1)), Err(PowError::InsufficientWork { required: 20, .. })));
        assert_eq!(store.verify(&nonce(1), bad, at(1)), Err(PowError::Replay));
    }

    #[test]
    fn expiry() {
        let mut store = ChallengeStore::default();
        store.insert(challenge(0, 60), at(0));
        assert_eq!(store.verify(&nonce(1), 0, at(60)), Err(PowError::Expired));
        assert!(store.is_empty());
    }

    #[test]
    fn expired_challenges_are_pruned() {
        let mut store = ChallengeStore::default();
        store.insert(challenge(0, 10), at(0));
        store.insert(Challenge { server_nonce: nonce(2), ..challenge(0, 100) }, at(20));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn rate_window() {
        let mut r = RateTracker::default();
        let w = Duration::seconds(60);
        assert_eq!(r.observe("a", at(0), w), 1);
        assert_eq!(r.observe("a", at(30), w), 2);
        assert_eq!(r.observe("b", at(30), w), 1);
        assert_eq!(r.observe("a", at(60), w), 2);
        assert_eq!(r.observe("a", at(200), w), 1);
        assert_eq!(per_minute(30, Duration::seconds(30)), 60.0);
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(
            mut rates in proptest::collection::vec(0.0f64..1e4, 1..40),
            weight in 0u32..30,
            step in 0.0f64..5.0,
        ) {
            let p = PowParams { step, ..PowParams::default() };
            rates.sort_by(f64::total_cmp);
            let ds: Vec<u32> = rates.iter().map(|r| p.difficulty(*r, weight)).collect();
            prop_assert!(ds.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(ds.iter().all(|d| (p.d_min..=p.d_max).contains(d)));
        }
    }
}
