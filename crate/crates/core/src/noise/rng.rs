//! Deterministic seeding and the normal-variate rule.
//!
//! Every (master seed, path index, component index) triple maps to an
//! independent stream seed through the SplitMix64 finalizer:
//!
//! ```text
//! mix(z)  = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!           z ^= z >> 27; z *= 0x94D049BB133111EB;
//!           z ^= z >> 31
//! path    = mix(seed + GOLDEN * (path_index + 1))
//! stream  = mix(path + GOLDEN * (component + 1))
//! ```
//!
//! with `GOLDEN = 0x9E3779B97F4A7C15` and wrapping arithmetic. The stream
//! seed initialises a ChaCha8 generator (`rand_chacha`, `seed_from_u64`).
//! Uniforms are `((u >> 11) + 0.5) * 2^-53` from successive `next_u64`
//! outputs, and normals are the inverse normal CDF of that uniform using
//! Acklam's rational approximation (relative error below 1.2e-9).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of path `path_index` in an ensemble driven by `master`.
pub fn path_seed(master: u64, path_index: u64) -> u64 {
    mix64(master.wrapping_add(GOLDEN.wrapping_mul(path_index.wrapping_add(1))))
}

/// Seed of the RNG stream for one martingale component of one path.
pub fn stream_seed(master: u64, path_index: u64, component: u64) -> u64 {
    let p = path_seed(master, path_index);
    mix64(p.wrapping_add(GOLDEN.wrapping_mul(component.wrapping_add(1))))
}

/// Standard normal variates by inversion.
#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(stream_seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(stream_seed),
        }
    }

    /// Uniform in the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.next_uniform())
    }
}

const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Acklam's rational approximation to the standard normal quantile.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const P_LOW: f64 = 0.024_25;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_match_reference_values() {
        // Reference quantiles of the standard normal.
        let cases = [
            (0.5, 0.0),
            (0.975, 1.959_963_984_540_054),
            (0.025, -1.959_963_984_540_054),
            (0.841_344_746_068_542_9, 1.0),
            (0.001, -3.090_232_306_167_813_5),
            (0.999_9, 3.719_016_485_455_709),
        ];
        for (p, z) in cases {
            let got = inverse_normal_cdf(p);
            assert!((got - z).abs() < 5e-9 * z.abs().max(1.0), "p={p} got={got}");
        }
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        assert_ne!(stream_seed(1, 0, 0), stream_seed(1, 0, 1));
        assert_ne!(stream_seed(1, 0, 0), stream_seed(1, 1, 0));
        assert_ne!(stream_seed(1, 0, 0), stream_seed(2, 0, 0));
        let mut a = NormalStream::new(stream_seed(7, 3, 1));
        let mut b = NormalStream::new(stream_seed(7, 3, 1));
        for _ in 0..100 {
            assert_eq!(a.next_normal().to_bits(), b.next_normal().to_bits());
        }
    }

    #[test]
    fn sample_moments() {
        let mut s = NormalStream::new(42);
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.next_normal();
            m1 += z;
            m2 += z * z;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        assert!(m1.abs() < 0.01);
        assert!((m2 - 1.0).abs() < 0.015);
    }

    #[test]
    fn uniform_is_open_interval() {
        let mut s = NormalStream::new(0);
        for _ in 0..10_000 {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
