//! Oracles and generators shared by the unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::g2_algebra::G2AlgCoords;
use crate::Mat7;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_coords(r: &mut impl Rng) -> G2AlgCoords {
    G2AlgCoords(std::array::from_fn(|_| r.gen_range(-1.0..1.0)))
}

/// Taylor series with scaling and squaring.
pub fn expm_taylor(a: &Mat7) -> Mat7 {
    let norm = a.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / 2f64.powi(squarings);
    let mut term = Mat7::identity();
    let mut sum = Mat7::identity();
    for k in 1..30 {
        term = term * b / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}
