//! Seedable random source shared by every generator.
//!
//! All randomness goes through ChaCha8 seeded with `seed_from_u64`, so a
//! seed fully determines every generated instance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::problems::Point;

/// Identifier written into experiment metadata.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64";

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_vector(rng: &mut Rng, n: usize) -> Point {
    Point::from_fn(n, |_, _| gaussian(rng))
}

/// Uniform draw from `[0, 1)`.
pub fn uniform(rng: &mut Rng) -> f64 {
    rand::Rng::random(rng)
}
