//! Reproducible random streams.
//!
//! Every draw comes from a ChaCha stream keyed by a SHA-256 digest of
//! `(root seed, replicate, wave time, purpose, actor id)`. Streams are
//! independent of evaluation order, so actors and replicates can be sampled
//! in parallel without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedStream {
    pub root: u64,
    pub replicate: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self { root, replicate: 0 }
    }

    pub fn replicate(self, replicate: u64) -> Self {
        Self { replicate, ..self }
    }

    /// Stream for one `(time, purpose, actor)` key.
    pub fn rng(&self, t: u64, purpose: &str, actor: Option<&str>) -> StreamRng {
        let mut h = Sha256::new();
        h.update(b"stepp-stream-v1");
        h.update(self.root.to_le_bytes());
        h.update(self.replicate.to_le_bytes());
        h.update(t.to_le_bytes());
        for part in [Some(purpose), actor] {
            match part {
                Some(s) => {
                    h.update([1u8]);
                    h.update((s.len() as u64).to_le_bytes());
                    h.update(s.as_bytes());
                }
                None => h.update([0u8]),
            }
        }
        let digest: [u8; 32] = h.finalize().into();
        StreamRng::from_seed(digest)
    }
}
