//! Append-only exposure ledger.
//!
//! Venues are sharded into silos; each silo is a hash-chained log replicated
//! by a Byzantine-fault-tolerant consensus group running over a deterministic
//! in-process network. The federated layer answers investigator and research
//! queries across silos.

pub mod chain;
pub mod consensus;
pub mod crypto;
pub mod federated;
pub mod silo;
pub mod sim;

pub use chain::{verify_chain, ChainBreak, LedgerEntry};
pub use crypto::{sha256, Digest, KeyedHashScheme, NodeId, Signature, SignatureScheme};
pub use silo::{assign_silo, SiloCluster, SiloId, SiloPayload};
