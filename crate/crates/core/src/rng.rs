//! Keyed random streams.
//!
//! Every random decision in a run is drawn from a stream identified by
//! `(seed, replication, generation, role)`. Streams are independent of the
//! order in which they are created, so a run reproduces bit for bit no matter
//! how replications are scheduled across threads.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator type handed out for a single keyed stream.
pub type StreamRng = Xoshiro256PlusPlus;

/// What a stream is used for inside one generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Initial individual (and, in count mode, the initial matching count).
    Init,
    /// Optimum shift at the start of a generation. At generation 0 this
    /// stream draws the initial optimum instead.
    Shift,
    /// Rate draw and bit flips of the offspring with the given 1-based index.
    Mutation(u32),
}

impl Role {
    fn code(self) -> u64 {
        match self {
            Role::Init => 0,
            Role::Shift => 1,
            Role::Mutation(chi) => 2 + u64::from(chi),
        }
    }
}

/// Stream factory for one replication of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStreams {
    seed: u64,
    replication: u64,
}

impl RunStreams {
    pub fn new(seed: u64, replication: u64) -> Self {
        Self { seed, replication }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    pub fn stream(&self, generation: u64, role: Role) -> StreamRng {
        StreamRng::seed_from_u64(stream_key(&[
            self.seed,
            self.replication,
            generation,
            role.code(),
        ]))
    }
}

/// splitmix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes an ordered tuple of words into a 64-bit stream key.
pub fn stream_key(parts: &[u64]) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut h = GOLDEN;
    for (pos, &p) in parts.iter().enumerate() {
        h = mix64(h ^ mix64(p.wrapping_add(GOLDEN.wrapping_mul(pos as u64 + 1))));
    }
    h
}

/// Derives a child seed, e.g. one per experiment cell.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    stream_key(&[base, index, 0x5eed])
}
