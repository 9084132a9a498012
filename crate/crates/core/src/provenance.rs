//! Content hashes used to tag serialized artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a float slice through its little-endian bit patterns.
pub fn hash_f64s(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Hash of the compact JSON encoding of a value.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_vec(value).expect("serializable value");
    sha256_hex(&text)
}

/// First 16 hex digits, for file names and table columns.
pub fn short(hash: &str) -> &str {
    &hash[..hash.len().min(16)]
}
