//! Counter-based random numbers (Philox4x32-10).
//!
//! A stream is identified by `(seed, stream id)` and positioned by a 64-bit
//! block counter, so any consumer can jump straight to "the k-th draw of
//! stream s" without replaying earlier draws. The simulators rely on this:
//! a particle only stores its lineage id and an event counter.

use rand::RngCore;

const MUL0: u32 = 0xD251_1F53;
const MUL1: u32 = 0xCD9E_8D57;
const WEYL0: u32 = 0x9E37_79B9;
const WEYL1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// The Philox4x32 bijection with ten rounds.
#[inline]
pub fn philox4x32(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        let (hi0, lo0) = mulhilo(MUL0, c[0]);
        let (hi1, lo1) = mulhilo(MUL1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
        if round < 9 {
            k[0] = k[0].wrapping_add(WEYL0);
            k[1] = k[1].wrapping_add(WEYL1);
        }
    }
    c
}

fn words(x: u128) -> [u32; 4] {
    [
        x as u32,
        (x >> 32) as u32,
        (x >> 64) as u32,
        (x >> 96) as u32,
    ]
}

fn join(w: [u32; 4]) -> u128 {
    w[0] as u128 | (w[1] as u128) << 32 | (w[2] as u128) << 64 | (w[3] as u128) << 96
}

/// SplitMix64 finalizer, used to fold a seed and part of a stream id into a key.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic id of the `index`-th child of `parent`.
///
/// For a fixed parent this is injective in `index`, so siblings never collide.
pub fn child_id(parent: u128, index: u64) -> u128 {
    let p = words(parent);
    let ctr = [index as u32, (index >> 32) as u32, p[0], p[1]];
    join(philox4x32(ctr, [p[2], p[3]]))
}

/// Philox stream implementing [`RngCore`].
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: [u32; 2],
    stream_lo: u64,
    block: u64,
    buf: [u32; 4],
    used: usize,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u128) -> Self {
        Self::at_block(seed, stream, 0)
    }

    /// Stream positioned at the start of block `block` (four 32-bit words per block).
    pub fn at_block(seed: u64, stream: u128, block: u64) -> Self {
        let k = mix64(seed ^ mix64((stream >> 64) as u64));
        CounterRng {
            key: [k as u32, (k >> 32) as u32],
            stream_lo: stream as u64,
            block,
            buf: [0; 4],
            used: 4,
        }
    }

    /// Index of the next block that will be generated.
    pub fn next_block(&self) -> u64 {
        self.block
    }

    fn refill(&mut self) {
        let ctr = [
            self.block as u32,
            (self.block >> 32) as u32,
            self.stream_lo as u32,
            (self.stream_lo >> 32) as u32,
        ];
        self.buf = philox4x32(ctr, self.key);
        self.block = self.block.wrapping_add(1);
        self.used = 0;
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        lo | hi << 32
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let v = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn known_answers() {
        assert_eq!(
            philox4x32([0; 4], [0; 2]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn jump_matches_replay() {
        let mut a = CounterRng::new(7, 99);
        for _ in 0..12 {
            a.next_u32();
        }
        let mut b = CounterRng::at_block(7, 99, 3);
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn streams_differ() {
        let mut a = CounterRng::new(1, 5);
        let mut b = CounterRng::new(1, 6);
        let mut c = CounterRng::new(2, 5);
        let x: u64 = a.random();
        assert_ne!(x, b.random::<u64>());
        assert_ne!(x, c.random::<u64>());
    }

    #[test]
    fn siblings_distinct() {
        let ids: std::collections::HashSet<u128> = (0..10_000).map(|i| child_id(1, i)).collect();
        assert_eq!(ids.len(), 10_000);
    }

    #[test]
    fn uniform_mean() {
        let mut r = CounterRng::new(3, 0);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| r.random::<f64>()).sum::<f64>() / n as f64;
        assert!((m - 0.5).abs() < 0.005);
    }
}
