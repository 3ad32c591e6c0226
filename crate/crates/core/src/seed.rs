//! Seed derivation. Every random stream in the crate is derived from an
//! explicit seed plus a label, never from ambient entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(seed: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

pub fn derive_rng(seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(seed, parts))
}

pub fn derive_u64(seed: u64, parts: &[&[u8]]) -> u64 {
    let bytes = derive_seed(seed, parts);
    u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
}
