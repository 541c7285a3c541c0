use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{ComplexImage, KSpaceSamples, Trajectory};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_image(h: usize, w: usize, seed: u64) -> ComplexImage {
    ComplexImage::new(h, w, random_complex(h * w, &mut rng(seed))).unwrap()
}

pub fn random_samples(m: usize, seed: u64) -> KSpaceSamples {
    KSpaceSamples::new(random_complex(m, &mut rng(seed))).unwrap()
}

pub fn random_trajectory(m: usize, seed: u64) -> Trajectory {
    let mut r = rng(seed);
    Trajectory::new(
        (0..m)
            .map(|_| [r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)])
            .collect(),
    )
    .unwrap()
}

pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
