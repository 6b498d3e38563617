//! Digest and signature primitives behind one interface.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Digest = [u8; 32];
pub type NodeId = usize;

pub fn sha256(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

/// First four bytes as hex, for traces.
pub fn short(d: &Digest) -> String {
    hex::encode(&d[..4])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature(pub Digest);

pub trait SignatureScheme: Send + Sync {
    fn sign(&self, signer: NodeId, message: &[u8]) -> Signature;
    fn verify(&self, signer: NodeId, message: &[u8], signature: &Signature) -> bool;
}

/// Keyed-hash stand-in for an asymmetric scheme: `sig = H(key ‖ msg)`.
///
/// Every key lives in this one object, so unforgeability rests on replicas
/// only ever calling `sign` with their own id. The simulator guarantees that.
pub struct KeyedHashScheme {
    keys: Vec<[u8; 32]>,
}

impl KeyedHashScheme {
    pub fn new(n_nodes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x6b65_7973);
        let keys = (0..n_nodes)
            .map(|_| {
                let mut k = [0u8; 32];
                rng.fill_bytes(&mut k);
                k
            })
            .collect();
        KeyedHashScheme { keys }
    }
}

impl SignatureScheme for KeyedHashScheme {
    fn sign(&self, signer: NodeId, message: &[u8]) -> Signature {
        Signature(sha256(&[&self.keys[signer], message]))
    }

    fn verify(&self, signer: NodeId, message: &[u8], signature: &Signature) -> bool {
        signer < self.keys.len() && self.sign(signer, message) == *signature
    }
}
