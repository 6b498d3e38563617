//! Venue-sharded silos, each an independent consensus group.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;
use venuetrace_core::model::levels::Outcome;
use venuetrace_core::model::{Answers, Timestamp, VenueType};

use crate::chain::LedgerEntry;
use crate::consensus::quorum;
use crate::crypto::sha256;
use crate::sim::{ScenarioError, SimNetConfig, Simulation};

pub type SiloId = usize;

/// First eight bytes of `SHA-256(venue_id)`, big-endian, modulo `n_silos`.
pub fn assign_silo(venue_id: &str, n_silos: usize) -> SiloId {
    assert!(n_silos >= 1, "at least one silo");
    let d = sha256(&[venue_id.as_bytes()]);
    let head = u64::from_be_bytes(d[..8].try_into().expect("eight bytes"));
    (head % n_silos as u64) as SiloId
}

/// A venue check-in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanEvent {
    pub handle: Uuid,
    pub user_id: Uuid,
    pub venue_id: String,
    pub venue_type: VenueType,
    pub timestamp: Timestamp,
}

/// Questionnaire answers for an earlier scan. Later submissions for the same
/// handle supersede earlier ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerSubmission {
    pub handle: Uuid,
    pub user_id: Uuid,
    pub answers: Answers,
    pub outcome: Outcome,
    pub submitted_at: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SiloPayload {
    Scan(ScanEvent),
    Answers(AnswerSubmission),
}

impl SiloPayload {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("payload serialises")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub n_silos: usize,
    /// Template for every silo's group; silo `i` runs with seed `seed + i`.
    pub net: SimNetConfig,
    /// Simulated ticks a replicate call may take before timing out.
    pub max_ticks: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { n_silos: 4, net: SimNetConfig::default(), max_ticks: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no silo {0}")]
pub struct UnknownSilo(pub SiloId);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplicateError {
    #[error(transparent)]
    UnknownSilo(#[from] UnknownSilo),
    #[error("silo {silo} has {live} live honest replicas; a quorum needs {needed}")]
    NoQuorum { silo: SiloId, live: usize, needed: usize },
    #[error("silo {silo} did not commit within {ticks} ticks")]
    Timeout { silo: SiloId, ticks: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiloHealth {
    pub silo: SiloId,
    pub live_honest: usize,
    pub quorum: usize,
    pub has_quorum: bool,
    pub committed: usize,
}

/// Decoded view of one silo's committed log.
#[derive(Default)]
struct Decoded {
    /// Log entries consumed so far.
    seen: usize,
    payloads: Vec<SiloPayload>,
    /// Positions in `payloads` of each venue's scans.
    by_venue: HashMap<String, Vec<usize>>,
}

pub struct SiloCluster {
    cfg: ClusterConfig,
    silos: Vec<Simulation>,
    decoded: Vec<Decoded>,
}

impl SiloCluster {
    pub fn new(cfg: ClusterConfig) -> Result<Self, ScenarioError> {
        if cfg.n_silos == 0 {
            return Err(ScenarioError::InvalidNetwork("n_silos must be positive"));
        }
        let silos = (0..cfg.n_silos)
            .map(|i| Simulation::new(SimNetConfig { seed: cfg.net.seed.wrapping_add(i as u64), ..cfg.net.clone() }))
            .collect::<Result<_, _>>()?;
        let decoded = (0..cfg.n_silos).map(|_| Decoded::default()).collect();
        Ok(SiloCluster { cfg, silos, decoded })
    }

    pub fn n_silos(&self) -> usize {
        self.silos.len()
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.cfg
    }

    pub fn silo_for(&self, venue_id: &str) -> SiloId {
        assign_silo(venue_id, self.n_silos())
    }

    fn silo(&self, silo: SiloId) -> Result<&Simulation, UnknownSilo> {
        self.silos.get(silo).ok_or(UnknownSilo(silo))
    }

    /// Commits one payload; returns its log index once every live honest
    /// replica holds it.
    pub fn replicate(&mut self, silo: SiloId, payload: Vec<u8>) -> Result<u64, ReplicateError> {
        Ok(self.replicate_batch(silo, vec![payload])?[0])
    }

    /// Commits payloads in submission order where the leader preserves it.
    pub fn replicate_batch(&mut self, silo: SiloId, payloads: Vec<Vec<u8>>) -> Result<Vec<u64>, ReplicateError> {
        let max_ticks = self.cfg.max_ticks;
        let sim = self.silos.get_mut(silo).ok_or(UnknownSilo(silo))?;
        if !sim.has_quorum() {
            let cfg = sim.config();
            return Err(ReplicateError::NoQuorum {
                silo,
                live: sim.live_honest().len(),
                needed: quorum(cfg.n_nodes, cfg.f_byzantine),
            });
        }
        let ids: Vec<u64> = payloads.into_iter().map(|p| sim.submit(p)).collect();
        let mut next = 0;
        let done = sim.run_until(max_ticks, |s| {
            while next < ids.len() && s.committed_index(ids[next]).is_some() {
                next += 1;
            }
            next == ids.len()
        });
        let indices = done.then(|| ids.iter().map(|id| sim.committed_index(*id).expect("committed")).collect());
        self.refresh(silo);
        indices.ok_or(ReplicateError::Timeout { silo, ticks: max_ticks })
    }

    fn refresh(&mut self, silo: SiloId) {
        let log = self.silos[silo].committed_log();
        let d = &mut self.decoded[silo];
        for e in &log[d.seen..] {
            if let Ok(p) = SiloPayload::decode(&e.payload) {
                if let SiloPayload::Scan(s) = &p {
                    d.by_venue.entry(s.venue_id.clone()).or_default().push(d.payloads.len());
                }
                d.payloads.push(p);
            }
        }
        d.seen = log.len();
    }

    /// Committed entries of a silo.
    pub fn log(&self, silo: SiloId) -> Result<&[LedgerEntry], UnknownSilo> {
        Ok(self.silo(silo)?.committed_log())
    }

    /// Committed payloads of a silo in commit order; undecodable entries are
    /// skipped.
    pub fn payloads(&self, silo: SiloId) -> Result<&[SiloPayload], UnknownSilo> {
        self.silo(silo)?;
        Ok(&self.decoded[silo].payloads)
    }

    /// Committed scans of one venue in commit order.
    pub fn venue_scans(&self, venue_id: &str) -> impl Iterator<Item = &ScanEvent> {
        let d = &self.decoded[self.silo_for(venue_id)];
        d.by_venue.get(venue_id).into_iter().flatten().map(|&i| match &d.payloads[i] {
            SiloPayload::Scan(s) => s,
            SiloPayload::Answers(_) => unreachable!("venue index holds scans only"),
        })
    }

    /// Committed scans of `venue_id` with `from ≤ timestamp < to`, in commit order.
    pub fn read_range(
        &self,
        silo: SiloId,
        venue_id: &str,
        from: Timestamp,
        to: Timestamp,
    ) -> Result<Vec<LedgerEntry>, UnknownSilo> {
        Ok(self
            .log(silo)?
            .iter()
            .filter(|e| {
                matches!(SiloPayload::decode(&e.payload),
                    Ok(SiloPayload::Scan(s)) if s.venue_id == venue_id && from <= s.timestamp && s.timestamp < to)
            })
            .cloned()
            .collect())
    }

    pub fn health(&self) -> Vec<SiloHealth> {
        self.silos
            .iter()
            .enumerate()
            .map(|(silo, sim)| {
                let cfg = sim.config();
                SiloHealth {
                    silo,
                    live_honest: sim.live_honest().len(),
                    quorum: quorum(cfg.n_nodes, cfg.f_byzantine),
                    has_quorum: sim.has_quorum(),
                    committed: sim.committed_log().len(),
                }
            })
            .collect()
    }

    /// Safety check over every silo.
    pub fn check_safety(&self) -> Result<(), (SiloId, crate::sim::Divergence)> {
        for (i, sim) in self.silos.iter().enumerate() {
            sim.check_safety().map_err(|d| (i, d))?;
        }
        Ok(())
    }
}
