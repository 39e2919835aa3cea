use std::hash::Hasher;

use sha2::{Digest, Sha256};

/// Stable 64-bit FNV-1a hash, identical across platforms and runs.
pub(crate) fn fnv64(bytes: &[u8]) -> u64 {
    let mut hasher = fnv::FnvHasher::default();
    hasher.write(bytes);
    hasher.finish()
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
