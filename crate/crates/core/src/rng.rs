//! Seed splitting. Every random draw is keyed by `(seed, iteration, purpose)`
//! so results do not depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Data,
    GradientNoise,
    HessianNoise,
    GradientSample,
    HessianSample,
    Eigen,
    Start,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Data => 0x11,
            Purpose::GradientNoise => 0x23,
            Purpose::HessianNoise => 0x35,
            Purpose::GradientSample => 0x47,
            Purpose::HessianSample => 0x59,
            Purpose::Eigen => 0x6b,
            Purpose::Start => 0x7d,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one `(seed, iteration, purpose)` triple.
pub fn stream(seed: u64, iteration: u64, purpose: Purpose) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ iteration) ^ purpose.tag());
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Uniformly distributed unit vector in `R^n`.
pub fn unit_vector<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vector {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v = Vector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 1e-300 {
            return v / norm;
        }
    }
}

/// Derives a child seed from `seed` and two indices.
pub fn derive(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a).wrapping_add(b))
}
