use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Seeded random source for dataset generation.
///
/// The mapping from seed to values is fixed so datasets can be regenerated
/// by other implementations:
///
/// * the generator is ChaCha8, keyed with `rand_core` 0.6
///   `SeedableRng::seed_from_u64(seed)` (PCG32 expansion of the seed);
/// * every draw consumes whole 32-bit outputs of `next_u32`;
/// * `below(n)` rejects outputs `>= 2^32 - (2^32 mod n)` and returns
///   `x mod n`;
/// * `bytes(k)` takes `ceil(k / 4)` outputs and emits their little-endian
///   bytes, dropping the surplus of the last one.
pub struct DatasetRng(ChaCha8Rng);

impl DatasetRng {
    pub fn new(seed: u64) -> Self {
        DatasetRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    pub fn u16(&mut self) -> u16 {
        self.u32() as u16
    }

    pub fn u8(&mut self) -> u8 {
        self.u32() as u8
    }

    /// Uniform in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: u32) -> u32 {
        assert!(n > 0, "empty range");
        let zone = u32::MAX - (u32::MAX - n + 1) % n;
        loop {
            let x = self.u32();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Uniform in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: u32, hi: u32) -> u32 {
        debug_assert!(lo <= hi);
        match (hi - lo).checked_add(1) {
            Some(span) => lo + self.below(span),
            None => self.u32(),
        }
    }

    pub fn bytes<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        for chunk in out.chunks_mut(4) {
            let word = self.u32().to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
        out
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u32) as usize]
    }

    /// Fisher-Yates, walking from the last element down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u32 + 1) as usize;
            items.swap(i, j);
        }
    }
}
