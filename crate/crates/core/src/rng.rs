//! Counter-based Gaussian streams.
//!
//! Every Gaussian draw is a pure function of `(seed, replica, step, coordinate)`:
//! the generator is Philox4x32-10 keyed by the 64-bit seed, with the counter
//! holding the block index (low 64 bits) and the replica index (high 64 bits).
//! One Philox block yields two 53-bit uniforms, turned into two normals by the
//! Box–Muller transform. Coordinates `2j` and `2j + 1` of a step share a block
//! (cosine and sine branch); a step of a `d`-dimensional path consumes
//! `ceil(d / 2)` blocks.
//!
//! Nothing here is stateful, so replicas can be evaluated in any order or in
//! parallel and still reproduce the same bits.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

const TWO_PI: f64 = core::f64::consts::TAU;
const INV_2_53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// The Philox4x32 bijection with 10 rounds.
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(PHILOX_W0);
            key[1] = key[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

#[inline]
fn split(v: u64) -> (u32, u32) {
    (v as u32, (v >> 32) as u32)
}

#[inline]
fn join(lo: u32, hi: u32) -> u64 {
    (lo as u64) | ((hi as u64) << 32)
}

/// Seed of replica `replica` in an ensemble rooted at `base_seed`.
///
/// Running a single simulation with the returned seed reproduces that replica
/// exactly.
pub fn replica_seed(base_seed: u64, replica: u64) -> u64 {
    let (k0, k1) = split(base_seed);
    let (r0, r1) = split(replica);
    // Counter region disjoint from the Gaussian blocks of any realistic run.
    let out = philox4x32_10([r0, r1, 0xFFFF_FFFF, 0x5EED_5EED], [k0, k1]);
    join(out[0], out[1])
}

/// A deterministic source of standard normal vectors, one per time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianStream {
    key: [u32; 2],
    replica: u64,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self::with_replica(seed, 0)
    }

    pub fn with_replica(seed: u64, replica: u64) -> Self {
        let (k0, k1) = split(seed);
        Self { key: [k0, k1], replica }
    }

    #[inline]
    fn block(&self, index: u64) -> [u32; 4] {
        let (c0, c1) = split(index);
        let (c2, c3) = split(self.replica);
        philox4x32_10([c0, c1, c2, c3], self.key)
    }

    /// Two independent uniforms in `(0, 1]` from block `index`.
    #[inline]
    pub fn uniform_pair(&self, index: u64) -> (f64, f64) {
        let b = self.block(index);
        let u1 = (join(b[0], b[1]) >> 11) + 1;
        let u2 = (join(b[2], b[3]) >> 11) + 1;
        (u1 as f64 * INV_2_53, u2 as f64 * INV_2_53)
    }

    #[inline]
    pub fn normal_pair(&self, index: u64) -> (f64, f64) {
        let (u1, u2) = self.uniform_pair(index);
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(TWO_PI * u2);
        (r * c, r * s)
    }

    /// Fill `out` with the standard normals of time step `step`.
    pub fn fill_step(&self, step: u64, out: &mut [f64]) {
        let blocks = out.len().div_ceil(2) as u64;
        let base = step * blocks;
        for (j, pair) in out.chunks_mut(2).enumerate() {
            let (z0, z1) = self.normal_pair(base + j as u64);
            pair[0] = z0;
            if let Some(p) = pair.get_mut(1) {
                *p = z1;
            }
        }
    }
}
