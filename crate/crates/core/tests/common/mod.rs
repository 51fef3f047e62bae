#![allow(dead_code)]

use famspec::generator::{plant_society, GeneratorParams};
use famspec::Society;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random society shape: `q` in 2..=5, `n` in 20..=n_max, up to `n/2` low-class people.
pub fn layout(seed: u64, n_max: usize) -> (Vec<usize>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let q = rng.random_range(2..=5);
    let n = rng.random_range(20..=n_max);
    let low = rng.random_range(0..=n / 2);
    let mut sizes = vec![1; q];
    for _ in 0..(n - low - q) {
        sizes[rng.random_range(0..q)] += 1;
    }
    (sizes, low)
}

pub fn random_society(seed: u64, n_max: usize, epsilon: f64) -> Society {
    let (sizes, low) = layout(seed, n_max);
    plant_society(&GeneratorParams::new(&sizes, low, epsilon, seed)).expect("fixture society")
}

/// The five-family, fifty-person fixture.
pub fn fixture_42(epsilon: f64) -> Society {
    plant_society(&GeneratorParams::new(&[4, 5, 6, 5, 6], 24, epsilon, 42)).expect("seed 42 fixture")
}
