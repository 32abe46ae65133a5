//! Counter-based random numbers.
//!
//! Every random draw in the crate is addressed by a key and a counter rather
//! than by the position in a sequential stream. Bond `e` of a configuration
//! with seed `s` always sees the same uniform, whatever `p` is and whichever
//! worker generates it, and the environment value `omega(i, x)` can be queried
//! in any order without storing the space-time field.
//!
//! The mixing function is the SplitMix64 output permutation; a stream with
//! key `k` emits `mix64(k + c * GOLDEN)` for `c = 1, 2, ...`.

use rand::rand_core::impls;
use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a word into a key. Not commutative, so `key(key(s, a), b)` differs
/// from `key(key(s, b), a)`.
#[inline]
pub fn fold_key(key: u64, word: u64) -> u64 {
    mix64(key ^ mix64(word.wrapping_add(GOLDEN)))
}

/// Domain tags keep the streams of unrelated consumers apart even when they
/// are handed the same user seed.
pub mod tag {
    pub const BONDS: u64 = 0x626f_6e64;
    pub const ENV: u64 = 0x0065_6e76;
    pub const WALK: u64 = 0x7761_6c6b;
    pub const SUBSEED: u64 = 0x7375_6273;
}

/// Random-access uniform: the `index`-th word of the stream keyed by `key`.
#[inline]
pub fn word_at(key: u64, index: u64) -> u64 {
    mix64(key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Maps 64 random bits to `[0, 1)` with 53 bits of resolution.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives the `index`-th child seed of `seed`. Pure, so independent samples
/// can be generated in any order or in parallel.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    fold_key(fold_key(seed, tag::SUBSEED), index)
}

/// A short-lived generator over one key. Cheap to construct, so one can be
/// spun up per lattice site.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn from_key(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    pub fn new(seed: u64, stream: u64) -> Self {
        Self::from_key(fold_key(seed, stream))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn next_unit(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let w = word_at(self.key, self.counter);
        self.counter = self.counter.wrapping_add(1);
        w
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
