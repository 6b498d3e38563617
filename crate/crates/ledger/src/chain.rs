//! Hash-chained log entries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{sha256, Digest};

/// Predecessor digest of the first entry.
pub const GENESIS: Digest = [0; 32];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// Commit position, starting at 0.
    pub index: u64,
    /// Client request id; unique within a log.
    pub request: u64,
    pub payload: Vec<u8>,
    pub prev: Digest,
    /// `H(index ‖ request ‖ prev ‖ payload)`.
    pub digest: Digest,
}

pub fn entry_digest(index: u64, request: u64, prev: &Digest, payload: &[u8]) -> Digest {
    sha256(&[&index.to_be_bytes(), &request.to_be_bytes(), prev, payload])
}

impl LedgerEntry {
    pub fn new(index: u64, request: u64, prev: Digest, payload: Vec<u8>) -> Self {
        let digest = entry_digest(index, request, &prev, &payload);
        LedgerEntry { index, request, payload, prev, digest }
    }

    fn is_sealed(&self) -> bool {
        self.digest == entry_digest(self.index, self.request, &self.prev, &self.payload)
    }
}

pub fn tip(log: &[LedgerEntry]) -> Digest {
    log.last().map_or(GENESIS, |e| e.digest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("hash chain broken at index {index}")]
pub struct ChainBreak {
    pub index: usize,
}

/// Checks that `entries` continue a chain whose last digest is `prev` and
/// whose next index is `start`.
pub fn verify_extension(entries: &[LedgerEntry], start: u64, prev: Digest) -> Result<(), ChainBreak> {
    let mut expected_prev = prev;
    for (i, e) in entries.iter().enumerate() {
        if e.index != start + i as u64 || e.prev != expected_prev || !e.is_sealed() {
            return Err(ChainBreak { index: start as usize + i });
        }
        expected_prev = e.digest;
    }
    Ok(())
}

/// Recomputes the chain from genesis; reports the earliest bad entry.
pub fn verify_chain(log: &[LedgerEntry]) -> Result<(), ChainBreak> {
    verify_extension(log, 0, GENESIS)
}
