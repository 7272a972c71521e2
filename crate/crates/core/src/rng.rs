//! Counter-based random streams.
//!
//! Every random draw in a run is addressed, not sequenced: the value at
//! `(stream key, element index, draw index)` is a pure function of that
//! tuple. Workers can therefore generate any element of any stream in any
//! order and still agree bit-for-bit with a sequential reader.
//!
//! The block function is Philox4x32-10 (Salmon et al., SC'11). For a fixed
//! key it is a bijection on 128-bit counters, so distinct counters under one
//! key never produce the same block.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Domain tag placed in counter word 3 when deriving stream keys, so key
/// derivation never shares a counter with sample generation.
const KEY_DERIVATION_TAG: u32 = 0x5354_524D;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

fn split(x: u64) -> [u32; 2] {
    [x as u32, (x >> 32) as u32]
}

fn join(lo: u32, hi: u32) -> u64 {
    u64::from(lo) | (u64::from(hi) << 32)
}

/// Derives the 64-bit stream key for task `(state_index, slot)` under
/// `master_seed`.
///
/// Keys are truncations of distinct Philox blocks; collisions are possible in
/// principle, so callers that need disjoint streams check the whole task set
/// (see [`crate::engine::check_stream_keys`]).
pub fn derive_stream_key(master_seed: u64, state_index: u32, slot: u32) -> u64 {
    let out = philox4x32_10([state_index, slot, 0, KEY_DERIVATION_TAG], split(master_seed));
    join(out[0], out[1])
}

/// A positioned random stream: one element of a keyed stream, read draw by
/// draw.
///
/// Draw `d` of element `i` under key `k` is the `d % 2`-th 64-bit half of
/// the Philox block with counter `[d / 2, 0, lo(i), hi(i)]` and key `k`.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: [u32; 2],
    element: u64,
    draw: u32,
    block: [u32; 4],
}

impl RngStream {
    pub fn new(stream_key: u64, element: u64) -> Self {
        RngStream {
            key: split(stream_key),
            element,
            draw: 0,
            block: [0; 4],
        }
    }

    pub fn element(&self) -> u64 {
        self.element
    }

    /// Number of 64-bit draws consumed so far from this element.
    pub fn draws_consumed(&self) -> u32 {
        self.draw
    }

    /// Moves to the start of another element of the same stream.
    pub fn seek(&mut self, element: u64) {
        self.element = element;
        self.draw = 0;
    }

    pub fn next_u64(&mut self) -> u64 {
        let half = self.draw & 1;
        if half == 0 {
            let e = split(self.element);
            self.block = philox4x32_10([self.draw >> 1, 0, e[0], e[1]], self.key);
        }
        self.draw += 1;
        if half == 0 {
            join(self.block[0], self.block[1])
        } else {
            join(self.block[2], self.block[3])
        }
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        u64_to_unit(self.next_u64())
    }

    /// Uniform index in `0..n` (`n >= 1`) from one draw.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n >= 1);
        // floor(u * n) with u on a 2^-53 grid; bias is below 2^-53 * n.
        let i = (self.next_f64() * n as f64) as usize;
        i.min(n - 1)
    }
}

#[inline]
pub fn u64_to_unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
