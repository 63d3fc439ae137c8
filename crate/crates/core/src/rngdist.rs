//! Counter-based random streams and exact samplers for the scalar laws.
//!
//! The generator is Philox4x64-10 (Salmon et al., "Parallel random numbers:
//! as easy as 1, 2, 3"). A stream is keyed by `(master_seed, stream_index)`;
//! draw number `c` of a stream is lane `c % 4` of the Philox block at
//! counter `c / 4`. Sample `i` of a replicate loop always runs on substream
//! `i`, so results do not depend on how work is split across threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun;

const PHILOX_M0: u64 = 0xD2E7_470E_E14C_6C93;
const PHILOX_M1: u64 = 0xCA5A_8263_9512_1157;
const PHILOX_W0: u64 = 0x9E37_79B9_7F4A_7C15;
const PHILOX_W1: u64 = 0xBB67_AE85_84CA_A73B;

#[inline]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

/// One Philox4x64 block with 10 rounds.
pub fn philox4x64_10(counter: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Position in a counter-based random stream.
///
/// Value-like: clone it to fork, never share one mutably across workers.
#[derive(Debug, Clone)]
pub struct StreamKey {
    master_seed: u64,
    stream_index: u64,
    counter: u64,
    block_index: u64,
    block: [u64; 4],
}

impl PartialEq for StreamKey {
    fn eq(&self, other: &Self) -> bool {
        self.master_seed == other.master_seed
            && self.stream_index == other.stream_index
            && self.counter == other.counter
    }
}

impl Eq for StreamKey {}

impl StreamKey {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self::with_counter(master_seed, stream_index, 0)
    }

    pub fn with_counter(master_seed: u64, stream_index: u64, counter: u64) -> Self {
        Self {
            master_seed,
            stream_index,
            counter,
            block_index: u64::MAX,
            block: [0; 4],
        }
    }

    /// Key for a named experiment: the master seed is a hash of
    /// `(seed, label)` so different experiments never share streams.
    pub fn experiment(seed: u64, label: &str) -> Self {
        let mixed = philox4x64_10([fnv1a(label), 0, 0, 0], [seed, 0x6265_7461_666c_6f77]);
        Self::new(mixed[0], 0)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Stream `(master_seed, index)` at counter 0.
    pub fn substream(&self, index: u64) -> StreamKey {
        StreamKey::new(self.master_seed, index)
    }

    /// Derived key for a named sub-experiment of this one.
    pub fn fork(&self, label: &str) -> StreamKey {
        StreamKey::experiment(self.master_seed ^ self.stream_index.rotate_left(32), label)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let blk = self.counter >> 2;
        if blk != self.block_index {
            self.block = philox4x64_10([blk, 0, 0, 0], [self.master_seed, self.stream_index]);
            self.block_index = blk;
        }
        let out = self.block[(self.counter & 3) as usize];
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform on the open interval `(0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by the Marsaglia polar method.
    pub fn normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s < 1.0 && s > 0.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    /// `Gamma(shape, 1)`, assuming `shape > 0`.
    ///
    /// Marsaglia-Tsang squeeze for `shape >= 1`; smaller shapes use the
    /// boost `Gamma(shape) = Gamma(shape + 1) U^{1/shape}`.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        if shape == 1.0 {
            return -self.uniform().ln();
        }
        if shape < 1.0 {
            let g = self.marsaglia_tsang(shape + 1.0);
            return g * self.uniform().powf(1.0 / shape);
        }
        self.marsaglia_tsang(shape)
    }

    fn marsaglia_tsang(&mut self, shape: f64) -> f64 {
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// `Beta(a, b)` as `G_a / (G_a + G_b)`.
    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        loop {
            let x = self.gamma(a);
            let y = self.gamma(b);
            let s = x + y;
            if s > 0.0 {
                return x / s;
            }
        }
    }
}

/// Run `f` once per replicate, replicate `i` on substream `i` of `key`.
///
/// Output order is replicate order regardless of thread count.
pub fn replicate<T, F>(key: &StreamKey, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(StreamKey) -> T + Sync + Send,
{
    (0..n as u64).into_par_iter().map(|i| f(key.substream(i))).collect()
}

/// Fallible variant of [`replicate`]; the first error in replicate order wins.
pub fn try_replicate<T, F>(key: &StreamKey, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(StreamKey) -> Result<T> + Sync + Send,
{
    let out: Vec<Result<T>> = replicate(key, n, f);
    out.into_iter().collect()
}

/// A scalar law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum DistSpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Bernoulli {
        p: f64,
    },
    Beta {
        a: f64,
        b: f64,
    },
    Gamma {
        shape: f64,
    },
    PointMass {
        c: f64,
    },
    /// Symmetric splitting density `z (1 - 2u)^{z-1}` on `(0, 1/2)`,
    /// mirrored on `[1/2, 1)`.
    TentPower {
        z: f64,
    },
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl DistSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        DistSpec::Uniform { lo, hi }.validated()
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        DistSpec::Bernoulli { p }.validated()
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        DistSpec::Beta { a, b }.validated()
    }

    pub fn gamma(shape: f64) -> Result<Self> {
        DistSpec::Gamma { shape }.validated()
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        DistSpec::PointMass { c }.validated()
    }

    pub fn tent_power(z: f64) -> Result<Self> {
        DistSpec::TentPower { z }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate().map(|_| self)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DistSpec::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            DistSpec::Bernoulli { p } => (0.0..=1.0).contains(&p),
            DistSpec::Beta { a, b } => positive(a) && positive(b),
            DistSpec::Gamma { shape } => positive(shape),
            DistSpec::PointMass { c } => (0.0..=1.0).contains(&c),
            DistSpec::TentPower { z } => positive(z),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(self.to_string()))
        }
    }

    /// Draw assuming the spec is valid.
    #[inline]
    pub(crate) fn sample(&self, key: &mut StreamKey) -> f64 {
        match *self {
            DistSpec::Uniform { lo, hi } => lo + (hi - lo) * key.uniform(),
            DistSpec::Bernoulli { p } => {
                if key.uniform() < p {
                    1.0
                } else {
                    0.0
                }
            }
            DistSpec::Beta { a, b } => key.beta(a, b),
            DistSpec::Gamma { shape } => key.gamma(shape),
            DistSpec::PointMass { c } => c,
            DistSpec::TentPower { z } => tent_quantile(key.uniform(), z),
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            DistSpec::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            DistSpec::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            DistSpec::Beta { a, b } => specfun::reg_inc_beta(x.clamp(0.0, 1.0), a, b).unwrap_or(f64::NAN),
            DistSpec::Gamma { shape } => specfun::reg_inc_gamma(shape, x.max(0.0)).unwrap_or(f64::NAN),
            DistSpec::PointMass { c } => {
                if x < c {
                    0.0
                } else {
                    1.0
                }
            }
            DistSpec::TentPower { z } => tent_power_cdf(x, z),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistSpec::Bernoulli { p } => p,
            DistSpec::Beta { a, b } => a / (a + b),
            DistSpec::Gamma { shape } => shape,
            DistSpec::PointMass { c } => c,
            DistSpec::TentPower { .. } => 0.5,
        }
    }
}

impl std::fmt::Display for DistSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            DistSpec::Uniform { lo, hi } => write!(f, "Uniform({lo}, {hi})"),
            DistSpec::Bernoulli { p } => write!(f, "Bernoulli({p})"),
            DistSpec::Beta { a, b } => write!(f, "Beta({a}, {b})"),
            DistSpec::Gamma { shape } => write!(f, "Gamma({shape})"),
            DistSpec::PointMass { c } => write!(f, "PointMass({c})"),
            DistSpec::TentPower { z } => write!(f, "TentPower({z})"),
        }
    }
}

/// One variate of `spec`; advances `key`.
pub fn draw(spec: &DistSpec, key: &mut StreamKey) -> Result<f64> {
    spec.validate()?;
    Ok(spec.sample(key))
}

#[inline]
fn tent_quantile(u: f64, z: f64) -> f64 {
    if u < 0.5 {
        0.5 * (1.0 - (1.0 - 2.0 * u).powf(1.0 / z))
    } else {
        0.5 * (1.0 + (2.0 * u - 1.0).powf(1.0 / z))
    }
}

/// Inverse of `F(s) = (1 - (1-2s)^z)/2` for `s < 1/2`,
/// `F(s) = (1 + (2s-1)^z)/2` for `s >= 1/2`.
pub fn tent_power_quantile(u: f64, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain("tent_power_quantile", format!("u = {u} outside [0,1]")));
    }
    if !positive(z) {
        return Err(Error::domain("tent_power_quantile", format!("z = {z} must be > 0")));
    }
    Ok(tent_quantile(u, z).clamp(0.0, 1.0))
}

pub fn tent_power_cdf(s: f64, z: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else if s < 0.5 {
        0.5 * (1.0 - (1.0 - 2.0 * s).powf(z))
    } else {
        0.5 * (1.0 + (2.0 * s - 1.0).powf(z))
    }
}
