//! Counter-based random numbers (Philox4x32-10).
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so trajectories
//! can be simulated in any order or on any thread and still see identical
//! Brownian increments.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

/// Blocks reserved per time step; a step may draw up to `2 * BLOCKS_PER_STEP` normals.
const BLOCKS_PER_STEP: u64 = 1 << 16;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// The Philox4x32 bijection with 10 rounds.
pub fn philox4x32_10(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// SplitMix64 finalizer, used to derive child seeds.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn unit_open(hi: u32, lo: u32) -> f64 {
    let bits = (((hi as u64) << 32) | lo as u64) >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Identifies one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A stream nested under this one, e.g. (outer point, inner replica).
    pub fn child(self, index: u64) -> Self {
        Self {
            seed: mix64(self.seed ^ mix64(self.stream.wrapping_add(0x5851_F42D_4C95_7F2D))),
            stream: index,
        }
    }

    #[inline]
    pub fn block(&self, counter: u64) -> [u32; 4] {
        philox4x32_10(
            [
                counter as u32,
                (counter >> 32) as u32,
                self.stream as u32,
                (self.stream >> 32) as u32,
            ],
            [self.seed as u32, (self.seed >> 32) as u32],
        )
    }

    /// Fills `out` with standard normals assigned to time step `step`.
    ///
    /// Two normals per Philox block; the values depend only on `(key, step, index)`.
    pub fn normals_at(&self, step: u64, out: &mut [f64]) {
        assert!(
            out.len() as u64 <= 2 * BLOCKS_PER_STEP,
            "too many normals per step"
        );
        let base = step.wrapping_mul(BLOCKS_PER_STEP);
        for (j, pair) in out.chunks_mut(2).enumerate() {
            let b = self.block(base.wrapping_add(j as u64));
            let (g0, g1) = box_muller(unit_open(b[0], b[1]), unit_open(b[2], b[3]));
            pair[0] = g0;
            if pair.len() > 1 {
                pair[1] = g1;
            }
        }
    }

    /// Sequential generator reading this stream from counter zero.
    pub fn rng(self) -> CounterRng {
        CounterRng {
            key: self,
            counter: 0,
            spare: None,
        }
    }
}

/// Sequential view over a [`StreamKey`] for non-time-stepped sampling.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: StreamKey,
    counter: u64,
    spare: Option<f64>,
}

impl CounterRng {
    fn next_block(&mut self) -> [u32; 4] {
        let b = self.key.block(self.counter);
        self.counter += 1;
        b
    }

    pub fn next_u64(&mut self) -> u64 {
        let b = self.next_block();
        ((b[0] as u64) << 32) | b[1] as u64
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        let b = self.next_block();
        unit_open(b[0], b[1])
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let b = self.next_block();
        let (g0, g1) = box_muller(unit_open(b[0], b[1]), unit_open(b[2], b[3]));
        self.spare = Some(g1);
        g0
    }

    pub fn normals(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Uniform direction on the unit sphere in `dim` dimensions.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let mut v = vec![0.0; dim];
            self.normals(&mut v);
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 1e-12 {
                v.iter_mut().for_each(|a| *a /= n);
                return v;
            }
        }
    }

    /// Uniform point in the ball of radius `r`.
    pub fn in_ball(&mut self, dim: usize, r: f64) -> Vec<f64> {
        let mut v = self.unit_vector(dim);
        let s = r * self.uniform().powf(1.0 / dim as f64);
        v.iter_mut().for_each(|a| *a *= s);
        v
    }
}
