//! Counter-based random streams.
//!
//! Every stream is a pure function of `(base_seed, stream_id, counter)`, so a
//! run is reproducible from its seed alone, independent of thread scheduling.
//! Child streams are derived by hashing a label through the same block cipher,
//! which keeps replicate-level parallelism deterministic: replicate `i` always
//! consumes the stream derived with label `i`, no matter which worker runs it.

use rand::RngCore;

const MULTIPLIER: u64 = 0xD2B7_4407_B1CE_6E93;
const KEY_BUMP: u64 = 0x9E37_79B9_7F4A_7C15;
const ROUNDS: usize = 10;

/// One block of the Philox-2x64 permutation: 10 rounds over a 128-bit counter
/// under a 64-bit key.
#[inline]
fn philox2x64(ctr: [u64; 2], key: u64) -> [u64; 2] {
    let mut x = ctr;
    let mut k = key;
    for round in 0..ROUNDS {
        if round > 0 {
            k = k.wrapping_add(KEY_BUMP);
        }
        let product = u128::from(MULTIPLIER) * u128::from(x[0]);
        let hi = (product >> 64) as u64;
        let lo = product as u64;
        x = [hi ^ k ^ x[1], lo];
    }
    x
}

/// A deterministic stream of pseudo-random 64-bit words.
///
/// `base_seed` keys the cipher, `stream_id` selects the block-counter lane.
/// Streams with distinct ids are statistically independent. Cloning a stream
/// clones its position; both copies then produce the same continuation.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    stream: u64,
    counter: u64,
    buffered: Option<u64>,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        RngStream {
            key: base_seed,
            stream: stream_id,
            counter: 0,
            buffered: None,
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.key
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Seed and stream id, in the order reports record them.
    pub fn ids(&self) -> [u64; 2] {
        [self.key, self.stream]
    }

    /// A fresh stream addressed by `label` under this stream's id.
    ///
    /// Derivation runs the label through the cipher itself, so children of
    /// distinct labels, and children of distinct parents, do not collide in
    /// practice. The child starts at counter zero; the parent is unaffected.
    pub fn derive(&self, label: u64) -> RngStream {
        let mixed = philox2x64([label, self.stream], self.key);
        RngStream {
            key: self.key,
            stream: mixed[0],
            counter: 0,
            buffered: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        if let Some(word) = self.buffered.take() {
            return word;
        }
        let block = philox2x64([self.counter, self.stream], self.key);
        self.counter = self.counter.wrapping_add(1);
        self.buffered = Some(block[1]);
        block[0]
    }

    /// Uniform draw strictly inside (0, 1), safe under `ln` and division.
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64 + 0.5) * SCALE
    }
}

/// Runs `f` once per replicate, each on its own child stream derived from
/// `parent` by replicate index, and returns results in index order.
///
/// The output is a pure function of `(parent, n, f)`: work may be scheduled
/// across any number of rayon threads without changing a single bit.
pub fn par_samples<T: Send>(
    parent: &RngStream,
    n: usize,
    f: impl Fn(usize, &mut RngStream) -> T + Sync,
) -> Vec<T> {
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut stream = parent.derive(i as u64);
            f(i, &mut stream)
        })
        .collect()
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (RngStream::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        RngStream::next_u64(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let word = RngStream::next_u64(self).to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}
