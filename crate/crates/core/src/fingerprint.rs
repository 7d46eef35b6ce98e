//! Stable hashes over canonical JSON, used for config fingerprints and
//! seeded derivations.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::manifest::to_canonical_line;

/// Hex SHA-256 (first 16 hex digits) of the canonical JSON form of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let line = to_canonical_line(value).expect("fingerprinted values are plain data");
    let digest = Sha256::digest(line.as_bytes());
    hex::encode(&digest[..8])
}

/// Deterministic 64-bit value derived from a seed and a list of labels.
pub fn derive_u64(seed: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Deterministic uniform value in `[0, 1)`.
pub fn derive_unit(seed: u64, parts: &[&str]) -> f64 {
    (derive_u64(seed, parts) >> 11) as f64 / (1u64 << 53) as f64
}
