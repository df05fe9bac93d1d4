use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The only generator used anywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngAlgorithm {
    /// ChaCha with 8 rounds, seeded through `seed_from_u64`; substreams use
    /// the ChaCha stream id.
    ChaCha8,
}

/// Seeded, platform-stable random source.
///
/// Cloning copies the generator state, so a clone replays the same stream.
/// Independent streams come from [`SeededRng::derive`] (named components)
/// or [`SeededRng::substream`] (numbered work chunks).
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub const ALGORITHM: RngAlgorithm = RngAlgorithm::ChaCha8;

    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh generator whose seed is a fixed hash of `(seed, component)`.
    pub fn derive(&self, component: &str) -> Self {
        Self::new(derive_seed(self.seed, component))
    }

    /// Generator for work chunk `index`: same key, different ChaCha stream.
    pub fn substream(&self, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(index);
        Self { seed: self.seed, inner }
    }
}

/// FNV-1a over the component name, mixed with the seed through splitmix64.
pub fn derive_seed(seed: u64, component: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in component.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
